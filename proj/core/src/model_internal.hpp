#pragma once

#include <cstdint>
#include <memory>

#include "ifthen/model.hpp"

namespace ifthen {

// Family constructors; vocabularies are already capped by make_model.
std::unique_ptr<SeqModel> make_lstm_encdec(const LstmEncDecConfig& config, Vocabulary source_vocab,
                                           Vocabulary target_vocab, std::uint64_t seed);
std::unique_ptr<SeqModel> make_stacked_rnn(const StackedRnnConfig& config, Vocabulary source_vocab,
                                           Vocabulary target_vocab, std::uint64_t seed);
std::unique_ptr<SeqModel> make_transformer(const TransformerConfig& config,
                                           Vocabulary source_vocab, Vocabulary target_vocab,
                                           std::uint64_t seed);

// Shared helpers for the recurrent families.

// Column col of a (batch, len) id matrix. Teacher forcing feeds target
// columns 0..4 (BOS-shifted prefix, EOS never fed); encoders feed source
// columns in order.
inline std::vector<int> batch_column(const IdBatch& batch, std::size_t col) {
  std::vector<int> ids(batch.batch);
  for (std::size_t b = 0; b < batch.batch; ++b) ids[b] = batch.ids[b * batch.len + col];
  return ids;
}

// Per-row source mask with the all-PAD sentinel applied.
Tensor source_mask(const IdBatch& source);

}  // namespace ifthen

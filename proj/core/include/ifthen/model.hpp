#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ifthen/corpus.hpp"
#include "ifthen/nn.hpp"
#include "ifthen/ops.hpp"
#include "ifthen/tensor.hpp"

namespace ifthen {

enum class Arch { lstm, stacked_rnn, transformer };

std::string_view arch_name(Arch arch);
Arch parse_arch(std::string_view name);  // throws ValidationError on unknown names

// Bidirectional LSTM encoder + attentional LSTM decoder, the small baseline.
struct LstmEncDecConfig {
  std::size_t embedding_size = 16;
  std::size_t hidden_size = 64;
  double dropout = 0.10;
  std::size_t max_source_len = 25;
  std::optional<std::size_t> source_vocab_cap;  // unset = keep every token
};

// Two-layer bidirectional encoder and two-layer stacked LSTM decoder with
// global multiplicative attention.
struct StackedRnnConfig {
  std::size_t encoder_layers = 2;
  std::size_t decoder_layers = 2;
  std::size_t embedding_size = 500;
  std::size_t hidden_size = 500;
  double dropout = 0.30;
  std::size_t max_source_len = 25;
  std::optional<std::size_t> source_vocab_cap;
};

struct TransformerConfig {
  std::size_t layers = 6;  // encoder and decoder depth
  std::size_t heads = 8;
  std::size_t model_size = 512;
  std::size_t feed_forward_size = 2048;
  double dropout = 0.10;
  std::size_t max_source_len = 30;
  std::optional<std::size_t> source_vocab_cap = 4000;
  bool additive_attention = false;  // score via v.tanh(Wq+Um) instead of scaled dot product
};

using ModelConfig = std::variant<LstmEncDecConfig, StackedRnnConfig, TransformerConfig>;

Arch config_arch(const ModelConfig& config);
ModelConfig default_config(Arch arch);

// Row-major (batch, len) id matrix.
struct IdBatch {
  std::size_t batch = 0;
  std::size_t len = 0;
  std::vector<int> ids;

  std::span<const int> row(std::size_t b) const {
    return std::span<const int>(ids).subspan(b * len, len);
  }
};

IdBatch make_batch(const std::vector<std::vector<int>>& rows);

// Encoder output. mask holds 1.0 on attendable positions and 0.0 on PAD; an
// all-PAD row keeps position 0 unmasked as a sentinel so attention stays
// well-defined. extras carries family-specific tensors (recurrent families
// stash their bridged initial decoder states there).
struct Encoded {
  Tensor memory;  // (batch, len, width)
  Tensor mask;    // (batch, len), constant
  std::size_t batch = 0;
  std::size_t len = 0;
  std::vector<Tensor> extras;
};

enum class AttentionKind { multiplicative, scaled_dot };

struct AttentionResult {
  Tensor context;  // (batch, width)
  Tensor weights;  // (batch, len)
};

// Single-query attention over per-position memory. multiplicative scores are
// q W m (weight required, shape (dq, width)); scaled_dot scores are
// q.m / sqrt(width) and require dq == width. Throws ValidationError when some
// mask row has no attendable position.
AttentionResult attention(const Tensor& query, const Tensor& memory, const Tensor& mask,
                          AttentionKind kind, const Tensor& weight = {});

// Constant tensor holding 0.0 where mask is 1 and -1e30 where mask is 0; adding
// it to scores before softmax zeroes masked positions exactly.
Tensor mask_to_penalty(const Tensor& mask);

// Architecture-specific incremental decoding state.
struct DecoderState {
  virtual ~DecoderState() = default;
};

// Common face of the three encoder-decoder families. Decoding contracts:
// target ids are BOS + 4 recipe tokens + EOS; teacher forcing feeds the
// BOS-shifted prefix and predicts positions 1..5.
class SeqModel {
 public:
  SeqModel(Arch arch, Vocabulary source_vocab, Vocabulary target_vocab, std::uint64_t seed);
  virtual ~SeqModel() = default;

  SeqModel(const SeqModel&) = delete;
  SeqModel& operator=(const SeqModel&) = delete;

  Arch arch() const { return arch_; }
  const Vocabulary& source_vocab() const { return source_vocab_; }
  const Vocabulary& target_vocab() const { return target_vocab_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  // Dropout switch; inference must run with training off.
  void set_train(bool train) { train_ = train; }
  bool is_train() const { return train_; }
  void reseed_dropout(std::uint64_t seed) { dropout_rng_ = Rng(seed); }

  virtual ModelConfig config() const = 0;
  virtual std::size_t max_source_len() const = 0;

  // source (b, max_source_len) -> per-position memory plus attention mask.
  virtual Encoded encode(const IdBatch& source) = 0;

  // source (b, L), target (b, 6) -> logits (b, 5, |target vocab|).
  virtual Tensor forward_teacher_forced(const IdBatch& source, const IdBatch& target) = 0;

  // Incremental decoding over a single encoded source (batch must be 1).
  virtual std::unique_ptr<DecoderState> init_state(const Encoded& encoded) = 0;
  // Feeds one previous token (BOS first) and returns logits (|target vocab|).
  // Throws ValidationError when the state does not belong to this model.
  virtual Tensor decode_step(int prev_token_id, DecoderState& state, const Encoded& encoded) = 0;

 protected:
  Tensor apply_dropout(const Tensor& x, double p);

  Arch arch_;
  Vocabulary source_vocab_;
  Vocabulary target_vocab_;
  ParameterStore params_;
  Rng dropout_rng_;
  bool train_ = false;
};

// Builds the family selected by the config. When the config carries a source
// vocabulary cap smaller than the given vocabulary, the model keeps the
// most-frequent tokens only.
std::unique_ptr<SeqModel> make_model(const ModelConfig& config, const Vocabulary& source_vocab,
                                     const Vocabulary& target_vocab, std::uint64_t seed);

}  // namespace ifthen

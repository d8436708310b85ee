#include "ifthen/model.hpp"

#include <cmath>

#include "ifthen/common.hpp"
#include "model_internal.hpp"

namespace ifthen {

std::string_view arch_name(Arch arch) {
  switch (arch) {
    case Arch::lstm:
      return "lstm";
    case Arch::stacked_rnn:
      return "stacked_rnn";
    case Arch::transformer:
      return "transformer";
  }
  throw ValidationError("unknown architecture tag");
}

Arch parse_arch(std::string_view name) {
  if (name == "lstm") return Arch::lstm;
  if (name == "stacked_rnn") return Arch::stacked_rnn;
  if (name == "transformer") return Arch::transformer;
  throw ValidationError("unknown architecture '" + std::string(name) +
                        "' (expected lstm, stacked_rnn, or transformer)");
}

Arch config_arch(const ModelConfig& config) {
  if (std::holds_alternative<LstmEncDecConfig>(config)) return Arch::lstm;
  if (std::holds_alternative<StackedRnnConfig>(config)) return Arch::stacked_rnn;
  return Arch::transformer;
}

ModelConfig default_config(Arch arch) {
  switch (arch) {
    case Arch::lstm:
      return LstmEncDecConfig{};
    case Arch::stacked_rnn:
      return StackedRnnConfig{};
    case Arch::transformer:
      return TransformerConfig{};
  }
  throw ValidationError("unknown architecture tag");
}

IdBatch make_batch(const std::vector<std::vector<int>>& rows) {
  if (rows.empty()) throw ValidationError("make_batch: no rows");
  IdBatch out;
  out.batch = rows.size();
  out.len = rows[0].size();
  out.ids.reserve(out.batch * out.len);
  for (const auto& row : rows) {
    if (row.size() != out.len) {
      throw ValidationError("make_batch: ragged rows (" + std::to_string(row.size()) + " vs " +
                            std::to_string(out.len) + ")");
    }
    out.ids.insert(out.ids.end(), row.begin(), row.end());
  }
  return out;
}

Tensor source_mask(const IdBatch& source) {
  std::vector<double> mask(source.batch * source.len, 0.0);
  for (std::size_t b = 0; b < source.batch; ++b) {
    bool any = false;
    for (std::size_t t = 0; t < source.len; ++t) {
      if (source.ids[b * source.len + t] != Specials::pad) {
        mask[b * source.len + t] = 1.0;
        any = true;
      }
    }
    if (!any) mask[b * source.len] = 1.0;  // sentinel keeps attention defined
  }
  return Tensor::from_data({source.batch, source.len}, std::move(mask));
}

Tensor mask_to_penalty(const Tensor& mask) {
  std::vector<double> penalty(mask.size());
  std::span<const double> m = mask.value();
  for (std::size_t i = 0; i < penalty.size(); ++i) penalty[i] = m[i] == 0.0 ? -1e30 : 0.0;
  return Tensor::from_data(mask.shape(), std::move(penalty));
}

AttentionResult attention(const Tensor& query, const Tensor& memory, const Tensor& mask,
                          AttentionKind kind, const Tensor& weight) {
  if (query.rank() != 2 || memory.rank() != 3 || mask.rank() != 2) {
    throw ShapeError("attention: expected query (b, d), memory (b, len, width), mask (b, len)");
  }
  const std::size_t batch = query.dim(0);
  const std::size_t len = memory.dim(1);
  const std::size_t width = memory.dim(2);
  if (memory.dim(0) != batch || mask.dim(0) != batch || mask.dim(1) != len) {
    throw ShapeError("attention: batch/length mismatch between query " + shape_str(query.shape()) +
                     ", memory " + shape_str(memory.shape()) + ", mask " +
                     shape_str(mask.shape()));
  }
  {
    std::span<const double> m = mask.value();
    for (std::size_t b = 0; b < batch; ++b) {
      bool any = false;
      for (std::size_t t = 0; t < len && !any; ++t) any = m[b * len + t] != 0.0;
      if (!any) {
        throw ValidationError("attention: row " + std::to_string(b) +
                              " has no attendable position");
      }
    }
  }

  Tensor projected;  // (b, width)
  if (kind == AttentionKind::multiplicative) {
    if (!weight.defined()) throw ValidationError("attention: multiplicative kind needs a weight");
    projected = matmul(query, weight);
  } else {
    if (query.dim(1) != width) {
      throw ShapeError("attention: scaled_dot needs query width " + std::to_string(width) +
                       ", got " + std::to_string(query.dim(1)));
    }
    projected = scale(query, 1.0 / std::sqrt(static_cast<double>(width)));
  }

  // scores[b, t] = memory[b, t, :] . projected[b, :]
  Tensor scores = reshape(bmm(memory, reshape(projected, {batch, width, 1})), {batch, len});
  Tensor weights = softmax(add(scores, mask_to_penalty(mask)), 1);
  Tensor context = reshape(bmm(reshape(weights, {batch, 1, len}), memory), {batch, width});
  return {context, weights};
}

SeqModel::SeqModel(Arch arch, Vocabulary source_vocab, Vocabulary target_vocab,
                   std::uint64_t seed)
    : arch_(arch),
      source_vocab_(std::move(source_vocab)),
      target_vocab_(std::move(target_vocab)),
      params_(seed),
      dropout_rng_(seed ^ 0x9e3779b97f4a7c15ull) {}

Tensor SeqModel::apply_dropout(const Tensor& x, double p) {
  return dropout(x, p, train_, dropout_rng_);
}

std::unique_ptr<SeqModel> make_model(const ModelConfig& config, const Vocabulary& source_vocab,
                                     const Vocabulary& target_vocab, std::uint64_t seed) {
  auto cap_vocab = [&](const std::optional<std::size_t>& cap) {
    if (cap && source_vocab.regular_tokens().size() > *cap) return source_vocab.capped(*cap);
    return source_vocab;
  };
  if (const auto* c = std::get_if<LstmEncDecConfig>(&config)) {
    return make_lstm_encdec(*c, cap_vocab(c->source_vocab_cap), target_vocab, seed);
  }
  if (const auto* c = std::get_if<StackedRnnConfig>(&config)) {
    return make_stacked_rnn(*c, cap_vocab(c->source_vocab_cap), target_vocab, seed);
  }
  const auto& c = std::get<TransformerConfig>(config);
  return make_transformer(c, cap_vocab(c.source_vocab_cap), target_vocab, seed);
}

}  // namespace ifthen

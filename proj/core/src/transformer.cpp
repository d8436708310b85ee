#include <cmath>
#include <memory>
#include <vector>

#include "ifthen/common.hpp"
#include "ifthen/model.hpp"
#include "model_internal.hpp"

namespace ifthen {

namespace {

struct TransformerState : DecoderState {
  std::vector<int> prefix;  // emitted-so-far target ids, BOS first
};

struct AttnBlock {
  Linear wq, wk, wv, wo;
  Tensor v_add;  // additive-scoring vector, defined only in additive mode
};

struct FeedForward {
  Linear w1, w2;
};

struct EncoderLayer {
  AttnBlock self_attn;
  FeedForward ff;
};

struct DecoderLayer {
  AttnBlock self_attn;
  AttnBlock cross_attn;
  FeedForward ff;
};

// -1e30 on masked key positions, replicated to (b, heads, q_len, k_len) so it
// adds directly onto attention scores.
Tensor key_penalty(const Tensor& mask, std::size_t heads, std::size_t q_len) {
  const std::size_t b = mask.dim(0);
  const std::size_t k_len = mask.dim(1);
  std::vector<double> values(b * heads * q_len * k_len);
  std::span<const double> m = mask.value();
  for (std::size_t bi = 0; bi < b; ++bi) {
    for (std::size_t rest = 0; rest < heads * q_len; ++rest) {
      double* row = values.data() + (bi * heads * q_len + rest) * k_len;
      for (std::size_t k = 0; k < k_len; ++k) row[k] = m[bi * k_len + k] == 0.0 ? -1e30 : 0.0;
    }
  }
  return Tensor::from_data({b, heads, q_len, k_len}, std::move(values));
}

// -1e30 above the diagonal: position t may only look at positions <= t.
Tensor causal_penalty(std::size_t len) {
  std::vector<double> values(len * len, 0.0);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t s = t + 1; s < len; ++s) values[t * len + s] = -1e30;
  }
  return Tensor::from_data({len, len}, std::move(values));
}

class Transformer final : public SeqModel {
 public:
  Transformer(const TransformerConfig& config, Vocabulary src, Vocabulary tgt, std::uint64_t seed)
      : SeqModel(Arch::transformer, std::move(src), std::move(tgt), seed),
        config_(config),
        head_dim_(config.model_size / config.heads) {
    const std::size_t d = config_.model_size;
    src_emb_ = Embedding(params_, "src_emb", source_vocab_.size(), d);
    tgt_emb_ = Embedding(params_, "tgt_emb", target_vocab_.size(), d);
    for (std::size_t l = 0; l < config_.layers; ++l) {
      const std::string base = "enc.l" + std::to_string(l);
      EncoderLayer layer;
      layer.self_attn = make_attn(base + ".self");
      layer.ff = make_ff(base + ".ff");
      enc_layers_.push_back(std::move(layer));
    }
    for (std::size_t l = 0; l < config_.layers; ++l) {
      const std::string base = "dec.l" + std::to_string(l);
      DecoderLayer layer;
      layer.self_attn = make_attn(base + ".self");
      layer.cross_attn = make_attn(base + ".cross");
      layer.ff = make_ff(base + ".ff");
      dec_layers_.push_back(std::move(layer));
    }
    out_proj_ = Linear(params_, "out", d, target_vocab_.size());
    pe_src_ = sinusoidal_positions(config_.max_source_len, d);
    pe_tgt_ = sinusoidal_positions(6, d);
  }

  ModelConfig config() const override { return config_; }
  std::size_t max_source_len() const override { return config_.max_source_len; }

  Encoded encode(const IdBatch& source) override {
    if (source.len != config_.max_source_len) {
      throw ShapeError("encode: source length " + std::to_string(source.len) +
                       " does not match configured " + std::to_string(config_.max_source_len));
    }
    const std::size_t b = source.batch;
    Tensor mask = source_mask(source);

    Tensor x = embed(src_emb_, source.ids, b, source.len, pe_src_);
    Tensor penalty = key_penalty(mask, config_.heads, source.len);
    for (EncoderLayer& layer : enc_layers_) {
      x = residual(x, multi_head(layer.self_attn, x, x, penalty, b, source.len, source.len));
      x = residual(x, feed_forward(layer.ff, x));
    }

    Encoded out;
    out.memory = x;
    out.mask = mask;
    out.batch = b;
    out.len = source.len;
    return out;
  }

  Tensor forward_teacher_forced(const IdBatch& source, const IdBatch& target) override {
    if (target.len != 6 || target.batch != source.batch) {
      throw ShapeError("forward_teacher_forced: target must be (batch, 6)");
    }
    Encoded enc = encode(source);
    // Decoder inputs are the BOS-shifted prefix: columns 0..4.
    std::vector<int> prefix_ids(target.batch * 5);
    for (std::size_t bi = 0; bi < target.batch; ++bi) {
      for (std::size_t t = 0; t < 5; ++t) prefix_ids[bi * 5 + t] = target.ids[bi * 6 + t];
    }
    return run_decoder(prefix_ids, target.batch, 5, enc);
  }

  std::unique_ptr<DecoderState> init_state(const Encoded& encoded) override {
    if (encoded.batch != 1) {
      throw ValidationError("init_state: incremental decoding expects batch 1, got " +
                            std::to_string(encoded.batch));
    }
    return std::make_unique<TransformerState>();
  }

  Tensor decode_step(int prev_token_id, DecoderState& state, const Encoded& encoded) override {
    auto* s = dynamic_cast<TransformerState*>(&state);
    if (s == nullptr) {
      throw ValidationError("decode_step: state was not initialized by this model");
    }
    if (encoded.batch != 1) {
      throw ValidationError("decode_step: incremental decoding expects batch 1");
    }
    s->prefix.push_back(prev_token_id);
    if (s->prefix.size() > 5) {
      throw ValidationError("decode_step: prefix exceeds the 6-token decoding budget");
    }
    const std::size_t p = s->prefix.size();
    Tensor logits = run_decoder(s->prefix, 1, p, encoded);  // (1, p, V)
    return reshape(slice(logits, 1, p - 1, p), {target_vocab_.size()});
  }

 private:
  AttnBlock make_attn(const std::string& base) {
    const std::size_t d = config_.model_size;
    AttnBlock block;
    block.wq = Linear(params_, base + ".wq", d, d);
    block.wk = Linear(params_, base + ".wk", d, d);
    block.wv = Linear(params_, base + ".wv", d, d);
    block.wo = Linear(params_, base + ".wo", d, d);
    if (config_.additive_attention) {
      block.v_add = params_.create(base + ".v", {head_dim_, std::size_t{1}},
                                   {InitScheme::uniform_fanin, head_dim_});
    }
    return block;
  }

  FeedForward make_ff(const std::string& base) {
    FeedForward ff;
    ff.w1 = Linear(params_, base + ".w1", config_.model_size, config_.feed_forward_size);
    ff.w2 = Linear(params_, base + ".w2", config_.feed_forward_size, config_.model_size);
    return ff;
  }

  // Token embeddings scaled by sqrt(d), plus the fixed position table, with
  // input dropout.
  Tensor embed(const Embedding& emb, std::span<const int> ids, std::size_t b, std::size_t len,
               const Tensor& pe) {
    Tensor x = scale(emb(ids, {b, len}), std::sqrt(static_cast<double>(config_.model_size)));
    Tensor positions = len == pe.dim(0) ? pe : slice(pe, 0, 0, len);
    return apply_dropout(add(x, positions), config_.dropout);
  }

  // Post-norm residual: LN(x + dropout(sublayer_output)).
  Tensor residual(const Tensor& x, const Tensor& sublayer_out) {
    return layer_norm(add(x, apply_dropout(sublayer_out, config_.dropout)));
  }

  Tensor feed_forward(FeedForward& ff, const Tensor& x) { return ff.w2(relu(ff.w1(x))); }

  // (b, len, d) -> (b, heads, len, head_dim)
  Tensor split_heads(const Tensor& x, std::size_t b, std::size_t len) {
    return transpose(reshape(x, {b, len, config_.heads, head_dim_}), 1, 2);
  }

  Tensor merge_heads(const Tensor& x, std::size_t b, std::size_t len) {
    return reshape(transpose(x, 1, 2), {b, len, config_.model_size});
  }

  Tensor multi_head(AttnBlock& block, const Tensor& q_in, const Tensor& kv_in,
                    const Tensor& penalty, std::size_t b, std::size_t q_len, std::size_t k_len) {
    Tensor qh = split_heads(block.wq(q_in), b, q_len);
    Tensor kh = split_heads(block.wk(kv_in), b, k_len);
    Tensor vh = split_heads(block.wv(kv_in), b, k_len);

    Tensor scores;
    if (config_.additive_attention) {
      scores = additive_scores(block, qh, kh, b, q_len, k_len);
    } else {
      scores = scale(bmm(qh, kh, /*trans_b=*/true),
                     1.0 / std::sqrt(static_cast<double>(head_dim_)));
    }
    if (penalty.defined()) scores = add(scores, penalty);
    Tensor weights = softmax(scores, 3);
    Tensor context = merge_heads(bmm(weights, vh), b, q_len);
    return block.wo(context);
  }

  // score[b,h,t,s] = v . tanh(q[b,h,t,:] + k[b,h,s,:]), one query position at
  // a time (the switch exists for comparison runs, not speed).
  Tensor additive_scores(AttnBlock& block, const Tensor& qh, const Tensor& kh, std::size_t b,
                         std::size_t q_len, std::size_t k_len) {
    std::vector<Tensor> per_query;
    per_query.reserve(q_len);
    for (std::size_t t = 0; t < q_len; ++t) {
      Tensor q_t = slice(qh, 2, t, t + 1);  // (b, heads, 1, head_dim)
      Tensor q_rep = k_len == 1 ? q_t : concat(std::vector<Tensor>(k_len, q_t), 2);
      Tensor scored = matmul(tanh(add(kh, q_rep)), block.v_add);  // (b, heads, k_len, 1)
      per_query.push_back(reshape(scored, {b, config_.heads, std::size_t{1}, k_len}));
    }
    return concat(per_query, 2);
  }

  // Runs the decoder stack over a (b, p) prefix against encoded memory and
  // projects every position to target-vocabulary logits.
  Tensor run_decoder(std::span<const int> prefix_ids, std::size_t b, std::size_t p,
                     const Encoded& enc) {
    Tensor x = embed(tgt_emb_, prefix_ids, b, p, pe_tgt_);
    Tensor self_penalty = causal_penalty(p);
    Tensor cross_penalty = key_penalty(enc.mask, config_.heads, p);
    for (DecoderLayer& layer : dec_layers_) {
      x = residual(x, multi_head(layer.self_attn, x, x, self_penalty, b, p, p));
      x = residual(x, multi_head(layer.cross_attn, x, enc.memory, cross_penalty, b, p, enc.len));
      x = residual(x, feed_forward(layer.ff, x));
    }
    return out_proj_(x);
  }

  TransformerConfig config_;
  std::size_t head_dim_;
  Embedding src_emb_;
  Embedding tgt_emb_;
  std::vector<EncoderLayer> enc_layers_;
  std::vector<DecoderLayer> dec_layers_;
  Linear out_proj_;
  Tensor pe_src_;
  Tensor pe_tgt_;
};

}  // namespace

std::unique_ptr<SeqModel> make_transformer(const TransformerConfig& config,
                                           Vocabulary source_vocab, Vocabulary target_vocab,
                                           std::uint64_t seed) {
  if (config.layers < 1 || config.heads < 1 || config.model_size < 1 ||
      config.feed_forward_size < 1 || config.max_source_len < 1) {
    throw ValidationError("transformer config: sizes must be >= 1");
  }
  if (config.model_size % config.heads != 0) {
    throw ValidationError("transformer config: model_size " + std::to_string(config.model_size) +
                          " is not divisible by heads " + std::to_string(config.heads));
  }
  if (config.dropout < 0.0 || config.dropout >= 1.0) {
    throw ValidationError("transformer config: dropout must be in [0, 1)");
  }
  return std::make_unique<Transformer>(config, std::move(source_vocab), std::move(target_vocab),
                                       seed);
}

}  // namespace ifthen

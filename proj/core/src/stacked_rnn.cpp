#include <memory>
#include <vector>

#include "ifthen/common.hpp"
#include "ifthen/model.hpp"
#include "model_internal.hpp"

namespace ifthen {

namespace {

struct StackedState : DecoderState {
  std::vector<Tensor> h;  // one per decoder layer
  std::vector<Tensor> c;
};

// Keep/carry masks per step, built once per encode (see lstm_encdec.cpp for
// the carry-forward idea).
struct StepMasks {
  std::vector<Tensor> keep;
  std::vector<Tensor> carry;
};

StepMasks build_step_masks(const IdBatch& source, std::size_t hidden) {
  StepMasks out;
  out.keep.reserve(source.len);
  out.carry.reserve(source.len);
  for (std::size_t t = 0; t < source.len; ++t) {
    std::vector<double> keep(source.batch * hidden);
    std::vector<double> carry(source.batch * hidden);
    for (std::size_t b = 0; b < source.batch; ++b) {
      const bool real = source.ids[b * source.len + t] != Specials::pad;
      for (std::size_t j = 0; j < hidden; ++j) {
        keep[b * hidden + j] = real ? 1.0 : 0.0;
        carry[b * hidden + j] = real ? 0.0 : 1.0;
      }
    }
    out.keep.push_back(Tensor::from_data({source.batch, hidden}, std::move(keep)));
    out.carry.push_back(Tensor::from_data({source.batch, hidden}, std::move(carry)));
  }
  return out;
}

Tensor masked_update(const Tensor& fresh, const Tensor& prev, const Tensor& keep,
                     const Tensor& carry) {
  return add(multiply(fresh, keep), multiply(prev, carry));
}

class StackedRnn final : public SeqModel {
 public:
  StackedRnn(const StackedRnnConfig& config, Vocabulary src, Vocabulary tgt, std::uint64_t seed)
      : SeqModel(Arch::stacked_rnn, std::move(src), std::move(tgt), seed), config_(config) {
    const std::size_t e = config_.embedding_size;
    const std::size_t h = config_.hidden_size;

    src_emb_ = Embedding(params_, "src_emb", source_vocab_.size(), e);
    for (std::size_t l = 0; l < config_.encoder_layers; ++l) {
      const std::size_t in = l == 0 ? e : 2 * h;
      const std::string base = "enc.l" + std::to_string(l);
      enc_fwd_.emplace_back(params_, base + ".fwd", in, h);
      enc_bwd_.emplace_back(params_, base + ".bwd", in, h);
    }
    for (std::size_t l = 0; l < config_.decoder_layers; ++l) {
      const std::string base = "bridge.l" + std::to_string(l);
      bridge_h_.emplace_back(params_, base + ".h", 2 * h, h);
      bridge_c_.emplace_back(params_, base + ".c", 2 * h, h);
    }
    tgt_emb_ = Embedding(params_, "tgt_emb", target_vocab_.size(), e);
    for (std::size_t l = 0; l < config_.decoder_layers; ++l) {
      const std::size_t in = l == 0 ? e : h;
      dec_cells_.emplace_back(params_, "dec.l" + std::to_string(l), in, h);
    }
    att_weight_ = params_.create("att.weight", {h, 2 * h}, {InitScheme::uniform_fanin, h});
    combine_ = Linear(params_, "combine", h + 2 * h, h);
    out_proj_ = Linear(params_, "out", h, target_vocab_.size());
  }

  ModelConfig config() const override { return config_; }
  std::size_t max_source_len() const override { return config_.max_source_len; }

  Encoded encode(const IdBatch& source) override {
    if (source.len != config_.max_source_len) {
      throw ShapeError("encode: source length " + std::to_string(source.len) +
                       " does not match configured " + std::to_string(config_.max_source_len));
    }
    const std::size_t b = source.batch;
    const std::size_t h = config_.hidden_size;
    const StepMasks masks = build_step_masks(source, h);

    // Per-position inputs to the current layer; starts as embeddings.
    std::vector<Tensor> inputs(source.len);
    for (std::size_t t = 0; t < source.len; ++t) {
      inputs[t] = apply_dropout(src_emb_(batch_column(source, t), {b}), config_.dropout);
    }

    Tensor final_h_f, final_h_b;
    for (std::size_t l = 0; l < config_.encoder_layers; ++l) {
      if (l > 0) {
        for (Tensor& x : inputs) x = apply_dropout(x, config_.dropout);
      }
      std::vector<Tensor> fwd(source.len);
      Tensor h_f = Tensor::zeros({b, h});
      Tensor c_f = Tensor::zeros({b, h});
      for (std::size_t t = 0; t < source.len; ++t) {
        auto [h_new, c_new] = enc_fwd_[l].step(inputs[t], h_f, c_f);
        h_f = masked_update(h_new, h_f, masks.keep[t], masks.carry[t]);
        c_f = masked_update(c_new, c_f, masks.keep[t], masks.carry[t]);
        fwd[t] = h_f;
      }
      std::vector<Tensor> bwd(source.len);
      Tensor h_b = Tensor::zeros({b, h});
      Tensor c_b = Tensor::zeros({b, h});
      for (std::size_t t = source.len; t-- > 0;) {
        auto [h_new, c_new] = enc_bwd_[l].step(inputs[t], h_b, c_b);
        h_b = masked_update(h_new, h_b, masks.keep[t], masks.carry[t]);
        c_b = masked_update(c_new, c_b, masks.keep[t], masks.carry[t]);
        bwd[t] = h_b;
      }
      for (std::size_t t = 0; t < source.len; ++t) inputs[t] = concat({fwd[t], bwd[t]}, 1);
      final_h_f = h_f;
      final_h_b = h_b;
    }

    std::vector<Tensor> rows;
    rows.reserve(source.len);
    for (std::size_t t = 0; t < source.len; ++t) {
      rows.push_back(reshape(inputs[t], {b, std::size_t{1}, 2 * h}));
    }

    Encoded out;
    out.memory = concat(rows, 1);
    out.mask = source_mask(source);
    out.batch = b;
    out.len = source.len;
    // Every decoder layer starts from its own projection of the top encoder
    // layer's final states.
    Tensor final_both = concat({final_h_f, final_h_b}, 1);
    for (std::size_t l = 0; l < config_.decoder_layers; ++l) {
      out.extras.push_back(bridge_h_[l](final_both));
      out.extras.push_back(bridge_c_[l](final_both));
    }
    return out;
  }

  Tensor forward_teacher_forced(const IdBatch& source, const IdBatch& target) override {
    if (target.len != 6 || target.batch != source.batch) {
      throw ShapeError("forward_teacher_forced: target must be (batch, 6)");
    }
    Encoded enc = encode(source);
    std::vector<Tensor> h(config_.decoder_layers), c(config_.decoder_layers);
    for (std::size_t l = 0; l < config_.decoder_layers; ++l) {
      h[l] = enc.extras[2 * l];
      c[l] = enc.extras[2 * l + 1];
    }
    std::vector<Tensor> logits;
    logits.reserve(5);
    for (std::size_t t = 0; t < 5; ++t) {
      Tensor step = step_logits(batch_column(target, t), enc, h, c);
      logits.push_back(reshape(step, {source.batch, std::size_t{1}, target_vocab_.size()}));
    }
    return concat(logits, 1);
  }

  std::unique_ptr<DecoderState> init_state(const Encoded& encoded) override {
    if (encoded.extras.size() != 2 * config_.decoder_layers) {
      throw ValidationError("init_state: encoded input lacks bridged decoder states");
    }
    auto state = std::make_unique<StackedState>();
    for (std::size_t l = 0; l < config_.decoder_layers; ++l) {
      state->h.push_back(encoded.extras[2 * l]);
      state->c.push_back(encoded.extras[2 * l + 1]);
    }
    return state;
  }

  Tensor decode_step(int prev_token_id, DecoderState& state, const Encoded& encoded) override {
    auto* s = dynamic_cast<StackedState*>(&state);
    if (s == nullptr || s->h.size() != config_.decoder_layers) {
      throw ValidationError("decode_step: state was not initialized by this model");
    }
    std::vector<int> prev{prev_token_id};
    Tensor logits = step_logits(prev, encoded, s->h, s->c);
    return reshape(logits, {target_vocab_.size()});
  }

 private:
  Tensor step_logits(const std::vector<int>& prev_ids, const Encoded& enc, std::vector<Tensor>& h,
                     std::vector<Tensor>& c) {
    const std::size_t b = prev_ids.size();
    Tensor x = apply_dropout(tgt_emb_(prev_ids, {b}), config_.dropout);
    for (std::size_t l = 0; l < config_.decoder_layers; ++l) {
      if (l > 0) x = apply_dropout(x, config_.dropout);
      auto [h_new, c_new] = dec_cells_[l].step(x, h[l], c[l]);
      h[l] = h_new;
      c[l] = c_new;
      x = h_new;
    }
    AttentionResult att =
        attention(x, enc.memory, enc.mask, AttentionKind::multiplicative, att_weight_);
    Tensor combined = tanh(combine_(concat({x, att.context}, 1)));
    return out_proj_(apply_dropout(combined, config_.dropout));
  }

  StackedRnnConfig config_;
  Embedding src_emb_;
  std::vector<LstmCell> enc_fwd_;
  std::vector<LstmCell> enc_bwd_;
  std::vector<Linear> bridge_h_;
  std::vector<Linear> bridge_c_;
  Embedding tgt_emb_;
  std::vector<LstmCell> dec_cells_;
  Tensor att_weight_;
  Linear combine_;
  Linear out_proj_;
};

}  // namespace

std::unique_ptr<SeqModel> make_stacked_rnn(const StackedRnnConfig& config, Vocabulary source_vocab,
                                           Vocabulary target_vocab, std::uint64_t seed) {
  if (config.encoder_layers < 1 || config.decoder_layers < 1) {
    throw ValidationError("stacked_rnn config: layer counts must be >= 1");
  }
  if (config.embedding_size < 1 || config.hidden_size < 1 || config.max_source_len < 1) {
    throw ValidationError("stacked_rnn config: sizes must be >= 1");
  }
  if (config.dropout < 0.0 || config.dropout >= 1.0) {
    throw ValidationError("stacked_rnn config: dropout must be in [0, 1)");
  }
  return std::make_unique<StackedRnn>(config, std::move(source_vocab), std::move(target_vocab),
                                      seed);
}

}  // namespace ifthen

#include <memory>
#include <vector>

#include "ifthen/common.hpp"
#include "ifthen/model.hpp"
#include "model_internal.hpp"

namespace ifthen {

namespace {

// Per-step keep/carry masks as full (b, h) constants so masked rows carry the
// previous state through PAD positions.
struct StepMasks {
  std::vector<Tensor> keep;   // 1 on real tokens
  std::vector<Tensor> carry;  // 1 on PAD
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

// h_new on real positions, previous state on PAD positions.
Tensor masked_update(const Tensor& fresh, const Tensor& prev, const Tensor& keep,
                     const Tensor& carry) {
  return add(multiply(fresh, keep), multiply(prev, carry));
}

struct LstmState : DecoderState {
  Tensor h;
  Tensor c;
};

class LstmEncDec final : public SeqModel {
 public:
  LstmEncDec(const LstmEncDecConfig& config, Vocabulary src, Vocabulary tgt, std::uint64_t seed)
      : SeqModel(Arch::lstm, std::move(src), std::move(tgt), seed), config_(config) {
    const std::size_t e = config_.embedding_size;
    const std::size_t h = config_.hidden_size;
    const std::size_t v_src = source_vocab_.size();
    const std::size_t v_tgt = target_vocab_.size();

    src_emb_ = Embedding(params_, "src_emb", v_src, e);
    enc_fwd_ = LstmCell(params_, "enc.fwd", e, h);
    enc_bwd_ = LstmCell(params_, "enc.bwd", e, h);
    bridge_h_ = Linear(params_, "bridge.h", 2 * h, h);
    bridge_c_ = Linear(params_, "bridge.c", 2 * h, h);
    tgt_emb_ = Embedding(params_, "tgt_emb", v_tgt, e);
    dec_cell_ = LstmCell(params_, "dec.cell", e, h);
    att_weight_ = params_.create("att.weight", {h, 2 * h}, {InitScheme::uniform_fanin, h});
    combine_ = Linear(params_, "combine", h + 2 * h, h);
    out_proj_ = Linear(params_, "out", h, v_tgt);
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

    std::vector<Tensor> embedded(source.len);
    for (std::size_t t = 0; t < source.len; ++t) {
      embedded[t] = apply_dropout(src_emb_(batch_column(source, t), {b}), config_.dropout);
    }

    std::vector<Tensor> fwd(source.len);
    Tensor h_f = Tensor::zeros({b, h});
    Tensor c_f = Tensor::zeros({b, h});
    for (std::size_t t = 0; t < source.len; ++t) {
      auto [h_new, c_new] = enc_fwd_.step(embedded[t], h_f, c_f);
      h_f = masked_update(h_new, h_f, masks.keep[t], masks.carry[t]);
      c_f = masked_update(c_new, c_f, masks.keep[t], masks.carry[t]);
      fwd[t] = h_f;
    }

    std::vector<Tensor> bwd(source.len);
    Tensor h_b = Tensor::zeros({b, h});
    Tensor c_b = Tensor::zeros({b, h});
    for (std::size_t t = source.len; t-- > 0;) {
      auto [h_new, c_new] = enc_bwd_.step(embedded[t], h_b, c_b);
      h_b = masked_update(h_new, h_b, masks.keep[t], masks.carry[t]);
      c_b = masked_update(c_new, c_b, masks.keep[t], masks.carry[t]);
      bwd[t] = h_b;
    }

    std::vector<Tensor> rows;
    rows.reserve(source.len);
    for (std::size_t t = 0; t < source.len; ++t) {
      rows.push_back(reshape(concat({fwd[t], bwd[t]}, 1), {b, 1, 2 * h}));
    }

    Encoded out;
    out.memory = concat(rows, 1);
    out.mask = source_mask(source);
    out.batch = b;
    out.len = source.len;
    Tensor final_both = concat({h_f, h_b}, 1);
    out.extras = {bridge_h_(final_both), bridge_c_(final_both)};
    return out;
  }

  Tensor forward_teacher_forced(const IdBatch& source, const IdBatch& target) override {
    if (target.len != 6 || target.batch != source.batch) {
      throw ShapeError("forward_teacher_forced: target must be (batch, 6)");
    }
    Encoded enc = encode(source);
    Tensor h = enc.extras[0];
    Tensor c = enc.extras[1];
    std::vector<Tensor> logits;
    logits.reserve(5);
    for (std::size_t t = 0; t < 5; ++t) {
      Tensor step = step_logits(batch_column(target, t), enc, h, c);
      logits.push_back(reshape(step, {source.batch, std::size_t{1}, target_vocab_.size()}));
    }
    return concat(logits, 1);
  }

  std::unique_ptr<DecoderState> init_state(const Encoded& encoded) override {
    if (encoded.extras.size() != 2) {
      throw ValidationError("init_state: encoded input lacks bridged decoder states");
    }
    auto state = std::make_unique<LstmState>();
    state->h = encoded.extras[0];
    state->c = encoded.extras[1];
    return state;
  }

  Tensor decode_step(int prev_token_id, DecoderState& state, const Encoded& encoded) override {
    auto* s = dynamic_cast<LstmState*>(&state);
    if (s == nullptr || !s->h.defined()) {
      throw ValidationError("decode_step: state was not initialized by this model");
    }
    std::vector<int> prev{prev_token_id};
    Tensor logits = step_logits(prev, encoded, s->h, s->c);
    return reshape(logits, {target_vocab_.size()});
  }

 private:
  // One decoder step shared by teacher forcing and incremental decoding; h/c
  // are updated in place.
  Tensor step_logits(const std::vector<int>& prev_ids, const Encoded& enc, Tensor& h, Tensor& c) {
    const std::size_t b = prev_ids.size();
    Tensor x = apply_dropout(tgt_emb_(prev_ids, {b}), config_.dropout);
    auto [h_new, c_new] = dec_cell_.step(x, h, c);
    h = h_new;
    c = c_new;
    AttentionResult att =
        attention(h, enc.memory, enc.mask, AttentionKind::multiplicative, att_weight_);
    Tensor combined = tanh(combine_(concat({h, att.context}, 1)));
    return out_proj_(apply_dropout(combined, config_.dropout));
  }

  LstmEncDecConfig config_;
  Embedding src_emb_;
  LstmCell enc_fwd_;
  LstmCell enc_bwd_;
  Linear bridge_h_;
  Linear bridge_c_;
  Embedding tgt_emb_;
  LstmCell dec_cell_;
  Tensor att_weight_;
  Linear combine_;
  Linear out_proj_;
};

}  // namespace

std::unique_ptr<SeqModel> make_lstm_encdec(const LstmEncDecConfig& config, Vocabulary source_vocab,
                                           Vocabulary target_vocab, std::uint64_t seed) {
  if (config.embedding_size < 1 || config.hidden_size < 1 || config.max_source_len < 1) {
    throw ValidationError("lstm config: sizes must be >= 1");
  }
  if (config.dropout < 0.0 || config.dropout >= 1.0) {
    throw ValidationError("lstm config: dropout must be in [0, 1)");
  }
  return std::make_unique<LstmEncDec>(config, std::move(source_vocab), std::move(target_vocab),
                                      seed);
}

}  // namespace ifthen

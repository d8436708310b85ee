#include "ifthen/train.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "ifthen/checkpoint.hpp"
#include "ifthen/common.hpp"
#include "ifthen/decode.hpp"
#include "ifthen/optim.hpp"
#include "ifthen/rng.hpp"

namespace ifthen {

double noam_lr(std::size_t step, std::size_t model_size, double factor, std::size_t warmup) {
  if (step == 0) throw ValidationError("noam_lr: steps count from 1");
  if (model_size == 0 || warmup == 0 || factor <= 0.0) {
    throw ValidationError("noam_lr: model_size, warmup, and factor must be positive");
  }
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(warmup);
  return factor * std::pow(static_cast<double>(model_size), -0.5) *
         std::min(std::pow(s, -0.5), s * std::pow(w, -1.5));
}

namespace {

std::vector<std::vector<double>> snapshot_params(const ParameterStore& store) {
  std::vector<std::vector<double>> out;
  out.reserve(store.entries().size());
  for (const NamedParam& p : store.entries()) {
    out.emplace_back(p.tensor.value().begin(), p.tensor.value().end());
  }
  return out;
}

void restore_params(const ParameterStore& store, const std::vector<std::vector<double>>& values) {
  const auto& entries = store.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Tensor t = entries[i].tensor;  // handles share the underlying storage
    std::span<double> dst = t.value_mut();
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

void check_pairs(const std::vector<EncodedPair>& pairs, std::size_t source_len,
                 const char* which) {
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].source_ids.size() != source_len) {
      throw ValidationError(std::string(which) + " pair " + std::to_string(i) + " has source of " +
                            std::to_string(pairs[i].source_ids.size()) + " ids, model expects " +
                            std::to_string(source_len));
    }
    if (pairs[i].target_ids.size() != 6) {
      throw ValidationError(std::string(which) + " pair " + std::to_string(i) +
                            " has a target of " + std::to_string(pairs[i].target_ids.size()) +
                            " ids, expected 6");
    }
  }
}

// Source/target batches for a span of pair indices.
struct Batch {
  IdBatch source;
  IdBatch target;
  std::vector<int> loss_targets;  // columns 1..5 (4 tokens + EOS), row-major
};

Batch gather(const std::vector<EncodedPair>& pairs, std::span<const std::size_t> idx,
             std::size_t source_len) {
  Batch b;
  b.source.batch = idx.size();
  b.source.len = source_len;
  b.source.ids.reserve(idx.size() * source_len);
  b.target.batch = idx.size();
  b.target.len = 6;
  b.target.ids.reserve(idx.size() * 6);
  b.loss_targets.reserve(idx.size() * 5);
  for (std::size_t i : idx) {
    const EncodedPair& p = pairs[i];
    b.source.ids.insert(b.source.ids.end(), p.source_ids.begin(), p.source_ids.end());
    b.target.ids.insert(b.target.ids.end(), p.target_ids.begin(), p.target_ids.end());
    b.loss_targets.insert(b.loss_targets.end(), p.target_ids.begin() + 1, p.target_ids.end());
  }
  return b;
}

struct BestTracker {
  bool seen = false;
  std::size_t step = 0;
  double sequence_acc = 0.0;
  double valid_loss = 0.0;
  std::vector<std::vector<double>> params;

  bool improves(double seq, double loss) const {
    if (!seen) return true;
    if (seq != sequence_acc) return seq > sequence_acc;
    return loss < valid_loss;
  }
};

}  // namespace

std::string validation_record_json(const ValidationRecord& r) {
  nlohmann::ordered_json j;
  j["step"] = r.step;
  j["train_loss"] = r.train_loss;
  j["valid_loss"] = r.valid_loss;
  j["learning_rate"] = r.learning_rate;
  j["valid"] = nlohmann::ordered_json::parse(eval_report_json(r.valid));
  return j.dump();
}

void save_history(const std::filesystem::path& path, const TrainHistory& history) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write history file: " + path.string());
  for (const ValidationRecord& r : history.records) out << validation_record_json(r) << '\n';
}

TrainResult train(SeqModel& model, const std::vector<EncodedPair>& train_pairs,
                  const std::vector<EncodedPair>& valid_pairs, const TrainConfig& config) {
  if (train_pairs.empty()) throw ValidationError("train: empty training set");
  if (valid_pairs.empty()) throw ValidationError("train: empty validation set");
  if (config.epochs < 1) throw ValidationError("train: epochs must be >= 1");
  if (config.batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
  if (config.validate_every_steps < 1) {
    throw ValidationError("train: validate_every_steps must be >= 1");
  }
  if (config.noam && (config.noam->warmup < 1 || config.noam->model_size < 1)) {
    throw ValidationError("train: noam warmup and model_size must be >= 1");
  }
  const std::size_t source_len = model.max_source_len();
  check_pairs(train_pairs, source_len, "train");
  check_pairs(valid_pairs, source_len, "validation");

  model.reseed_dropout(config.seed ^ 0xd1b54a32d192ed03ull);
  Rng shuffle_rng(config.seed);

  const std::vector<Tensor> params = model.params().tensors();
  AdamConfig adam{config.base_lr};
  AdamState adam_state;

  TrainResult result;
  BestTracker best;
  double loss_since_record = 0.0;
  std::size_t batches_since_record = 0;
  double current_lr = config.noam ? 0.0 : config.base_lr;
  bool stop = false;

  auto reference_tokens = [&](const EncodedPair& p) {
    std::array<std::string, 4> slots;
    for (std::size_t s = 0; s < 4; ++s) {
      slots[s] = model.target_vocab().token(p.target_ids[s + 1]);
    }
    return slots;
  };

  auto run_validation = [&](std::size_t step) {
    if (!result.history.records.empty() && result.history.records.back().step == step) return;
    model.set_train(false);

    double loss_total = 0.0;
    std::size_t rows = 0;
    for (std::size_t start = 0; start < valid_pairs.size(); start += config.batch_size) {
      const std::size_t end = std::min(valid_pairs.size(), start + config.batch_size);
      std::vector<std::size_t> idx(end - start);
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = start + i;
      Batch b = gather(valid_pairs, idx, source_len);
      Tensor logits = model.forward_teacher_forced(b.source, b.target);
      Tensor loss = cross_entropy(logits, b.loss_targets, Specials::pad);
      loss_total += loss.scalar() * static_cast<double>(b.loss_targets.size());
      rows += b.loss_targets.size();
    }

    std::vector<std::vector<std::string>> preds;
    std::vector<std::array<std::string, 4>> refs;
    preds.reserve(valid_pairs.size());
    refs.reserve(valid_pairs.size());
    for (const EncodedPair& p : valid_pairs) {
      preds.push_back(greedy_decode(model, p.source_ids).tokens);
      refs.push_back(reference_tokens(p));
    }

    ValidationRecord record;
    record.step = step;
    record.train_loss = batches_since_record > 0
                            ? loss_since_record / static_cast<double>(batches_since_record)
                            : 0.0;
    record.valid_loss = loss_total / static_cast<double>(rows);
    record.learning_rate = current_lr;
    record.valid = evaluate_tokens(preds, refs);
    loss_since_record = 0.0;
    batches_since_record = 0;

    if (best.improves(record.valid.sequence_acc, record.valid_loss)) {
      best.seen = true;
      best.step = step;
      best.sequence_acc = record.valid.sequence_acc;
      best.valid_loss = record.valid_loss;
      best.params = snapshot_params(model.params());
      if (config.checkpoint_dir) {
        std::filesystem::create_directories(*config.checkpoint_dir);
        save_checkpoint(*config.checkpoint_dir / "best.ckpt", model, step,
                        config.use_description);
      }
    }
    result.history.records.push_back(std::move(record));
    if (config.target_sequence_acc &&
        result.history.records.back().valid.sequence_acc >= *config.target_sequence_acc) {
      stop = true;
    }
    model.set_train(true);
  };

  auto finish = [&]() {
    if (best.seen) restore_params(model.params(), best.params);
    model.set_train(false);
    result.best_step = best.step;
    result.best_sequence_acc = best.sequence_acc;
    result.best_valid_loss = best.valid_loss;
    if (config.checkpoint_dir) {
      std::filesystem::create_directories(*config.checkpoint_dir);
      save_history(*config.checkpoint_dir / "history.jsonl", result.history);
    }
  };

  std::vector<std::size_t> order(train_pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  try {
    model.set_train(true);
    for (std::size_t epoch = 0; epoch < config.epochs && !stop; ++epoch) {
      shuffle_rng.shuffle(order);
      for (std::size_t start = 0; start < order.size() && !stop; start += config.batch_size) {
        const std::size_t end = std::min(order.size(), start + config.batch_size);
        Batch b = gather(train_pairs, std::span(order).subspan(start, end - start), source_len);

        model.params().zero_grads();
        Tensor logits = model.forward_teacher_forced(b.source, b.target);
        Tensor loss = cross_entropy(logits, b.loss_targets, Specials::pad);
        backward(loss);
        if (config.clip_norm) clip_global_norm(params, *config.clip_norm);

        const std::size_t step = result.steps + 1;
        current_lr = config.noam ? noam_lr(step, config.noam->model_size, config.noam->factor,
                                           config.noam->warmup)
                                 : config.base_lr;
        adam.lr = current_lr;
        adam_step(params, adam_state, adam);
        result.steps = step;
        loss_since_record += loss.scalar();
        ++batches_since_record;

        if (result.steps % config.validate_every_steps == 0) run_validation(result.steps);
        if (config.max_steps && result.steps >= *config.max_steps) stop = true;
      }
      if (!stop) run_validation(result.steps);
    }
    if (result.history.records.empty() || result.history.records.back().step != result.steps) {
      run_validation(result.steps);
    }
  } catch (const NonFiniteGradient&) {
    finish();
    throw;
  }

  finish();
  return result;
}

}  // namespace ifthen

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ifthen/corpus.hpp"
#include "ifthen/metrics.hpp"
#include "ifthen/model.hpp"

namespace ifthen {

// lr = factor * model_size^(-1/2) * min(step^(-1/2), step * warmup^(-3/2));
// rises linearly to the peak at step == warmup, then decays as 1/sqrt(step).
// Steps count from 1; step 0 throws ValidationError.
double noam_lr(std::size_t step, std::size_t model_size, double factor, std::size_t warmup);

struct NoamConfig {
  double factor = 1.0;
  std::size_t warmup = 4000;
  std::size_t model_size = 512;
};

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t validate_every_steps = 4000;  // validation also runs at every epoch end
  double base_lr = 0.001;
  std::optional<NoamConfig> noam;  // when set, replaces base_lr entirely
  std::size_t batch_size = 64;
  std::optional<std::size_t> max_steps;  // whichever of epochs/max_steps hits first stops
  std::optional<double> clip_norm;       // global gradient-norm clip, off when unset
  std::optional<double> target_sequence_acc;  // early stop once validation reaches this
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> checkpoint_dir;  // best.ckpt + history.jsonl
  bool use_description = false;                         // recorded in checkpoints
};

struct ValidationRecord {
  std::size_t step = 0;
  double train_loss = 0.0;  // mean batch loss since the previous record
  double valid_loss = 0.0;

  double learning_rate = 0.0;
  EvalReport valid;
};

struct TrainHistory {
  std::vector<ValidationRecord> records;  // steps strictly increasing
};

struct TrainResult {
  TrainHistory history;
  std::size_t steps = 0;
  std::size_t best_step = 0;
  double best_sequence_acc = 0.0;
  double best_valid_loss = 0.0;
};

std::string validation_record_json(const ValidationRecord& r);
void save_history(const std::filesystem::path& path, const TrainHistory& history);

// Adam + cross-entropy over seeded per-epoch shuffles. Validates every
// validate_every_steps steps, at each epoch end, and once at the very end
// (never recording the same step twice). The model is left holding the
// parameters of the record with the highest validation sequence accuracy
// (ties broken by lower validation loss); when checkpoint_dir is set, that
// checkpoint and the history land on disk. A NonFiniteGradient abort restores
// the best parameters seen and rethrows.
TrainResult train(SeqModel& model, const std::vector<EncodedPair>& train_pairs,
                  const std::vector<EncodedPair>& valid_pairs, const TrainConfig& config);

}  // namespace ifthen

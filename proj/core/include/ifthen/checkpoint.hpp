#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>

#include "ifthen/model.hpp"

namespace ifthen {

// A restored model plus the training metadata stored alongside it.
struct CheckpointData {
  std::unique_ptr<SeqModel> model;
  std::size_t step = 0;
  bool use_description = false;  // how source texts were built for this model
};

// Binary container: magic + format version, a JSON metadata block
// (architecture, config, step, vocabulary hashes, use_description), both
// vocabularies verbatim, then every parameter in creation order as
// little-endian float64 with its name and shape.
void save_checkpoint(const std::filesystem::path& path, const SeqModel& model, std::size_t step,
                     bool use_description);

// Rebuilds the model from the embedded config and vocabularies. Throws
// IncompatibleCheckpoint when the container is malformed, the stored
// vocabulary hashes disagree with the embedded vocabularies, the parameter
// list does not match the rebuilt model, or expected_arch is given and
// differs; IoError on unreadable files.
CheckpointData load_checkpoint(const std::filesystem::path& path,
                               std::optional<Arch> expected_arch = std::nullopt);

}  // namespace ifthen

#include "ifthen/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ifthen/common.hpp"
#include "json_util.hpp"

namespace ifthen {

namespace {

constexpr char kMagic[8] = {'I', 'F', 'C', 'K', 'P', 'T', '0', '1'};

void write_u64(std::ofstream& out, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t read_u64(std::ifstream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) throw IoError("checkpoint ends unexpectedly");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

void write_string(std::ofstream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in, std::uint64_t limit = 1ull << 32) {
  const std::uint64_t n = read_u64(in);
  if (n > limit) throw IncompatibleCheckpoint("checkpoint block length is implausible");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw IoError("checkpoint ends unexpectedly");
  return s;
}

void write_doubles(std::ofstream& out, std::span<const double> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
  } else {
    for (double v : values) {
      std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
      write_u64(out, bits);
    }
  }
}

void read_doubles(std::ifstream& in, std::span<double> values) {
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!in) throw IoError("checkpoint ends unexpectedly");
  } else {
    for (double& v : values) v = std::bit_cast<double>(read_u64(in));
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const SeqModel& model, std::size_t step,
                     bool use_description) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint: " + path.string());

  nlohmann::ordered_json meta;
  meta["arch"] = std::string(arch_name(model.arch()));
  meta["config"] = config_to_json(model.config());
  meta["step"] = step;
  meta["source_vocab_hash"] = model.source_vocab().hash();
  meta["target_vocab_hash"] = model.target_vocab().hash();
  meta["use_description"] = use_description;
  meta["parameters"] = model.params().entries().size();

  out.write(kMagic, sizeof(kMagic));
  write_string(out, meta.dump());
  write_string(out, model.source_vocab().to_text());
  write_string(out, model.target_vocab().to_text());

  write_u64(out, model.params().entries().size());
  for (const NamedParam& p : model.params().entries()) {
    write_string(out, p.name);
    write_u64(out, p.tensor.rank());
    for (std::size_t d = 0; d < p.tensor.rank(); ++d) write_u64(out, p.tensor.dim(d));
    write_doubles(out, p.tensor.value());
  }
  out.flush();
  if (!out) throw IoError("failed while writing checkpoint: " + path.string());
}

CheckpointData load_checkpoint(const std::filesystem::path& path,
                               std::optional<Arch> expected_arch) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());

  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IncompatibleCheckpoint("not a recognized checkpoint file: " + path.string());
  }

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_string(in));
  } catch (const nlohmann::json::exception& e) {
    throw IncompatibleCheckpoint("checkpoint metadata is not valid JSON: " +
                                 std::string(e.what()));
  }

  Arch arch;
  ModelConfig config;
  std::uint64_t src_hash = 0, tgt_hash = 0;
  CheckpointData data;
  try {
    arch = parse_arch(meta.at("arch").get<std::string>());
    config = config_from_json(arch, meta.at("config"));
    data.step = meta.at("step").get<std::size_t>();
    src_hash = meta.at("source_vocab_hash").get<std::uint64_t>();
    tgt_hash = meta.at("target_vocab_hash").get<std::uint64_t>();
    data.use_description = meta.at("use_description").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw IncompatibleCheckpoint("checkpoint metadata is incomplete: " + std::string(e.what()));
  }
  if (expected_arch && *expected_arch != arch) {
    throw IncompatibleCheckpoint("checkpoint holds a " + std::string(arch_name(arch)) +
                                 " model, expected " + std::string(arch_name(*expected_arch)));
  }

  Vocabulary src_vocab = Vocabulary::from_text(read_string(in), std::nullopt,
                                               "checkpoint source vocabulary");
  Vocabulary tgt_vocab = Vocabulary::from_text(read_string(in), std::nullopt,
                                               "checkpoint target vocabulary");
  if (src_vocab.hash() != src_hash || tgt_vocab.hash() != tgt_hash) {
    throw IncompatibleCheckpoint("vocabulary hash mismatch in " + path.string());
  }

  data.model = make_model(config, src_vocab, tgt_vocab, /*seed=*/0);

  const std::uint64_t count = read_u64(in);
  const auto& entries = data.model->params().entries();
  if (count != entries.size()) {
    throw IncompatibleCheckpoint("checkpoint stores " + std::to_string(count) +
                                 " parameters, model has " + std::to_string(entries.size()));
  }
  for (const NamedParam& p : entries) {
    const std::string name = read_string(in);
    if (name != p.name) {
      throw IncompatibleCheckpoint("parameter order mismatch: stored '" + name + "', expected '" +
                                   p.name + "'");
    }
    const std::uint64_t rank = read_u64(in);
    Shape shape(rank);
    for (std::uint64_t d = 0; d < rank; ++d) shape[d] = read_u64(in);
    if (shape != p.tensor.shape()) {
      throw IncompatibleCheckpoint("parameter '" + name + "' has shape " + shape_str(shape) +
                                   " in the checkpoint but " + shape_str(p.tensor.shape()) +
                                   " in the model");
    }
    read_doubles(in, p.tensor.node()->value);
  }
  return data;
}

}  // namespace ifthen

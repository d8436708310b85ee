#include "ifthen/cli.hpp"

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ifthen/checkpoint.hpp"
#include "ifthen/common.hpp"
#include "ifthen/corpus.hpp"
#include "ifthen/decode.hpp"
#include "ifthen/metrics.hpp"
#include "ifthen/model.hpp"
#include "ifthen/train.hpp"
#include "json_util.hpp"

namespace ifthen {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string iso_timestamp_utc() {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string file_hash_hex(const fs::path& path) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(read_file_bytes(path))));
  return buf;
}

void ensure_parent_dir(const fs::path& path) {
  const fs::path parent = path.parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

void write_text_file(const fs::path& path, const std::string& text) {
  ensure_parent_dir(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

// Every command that produces files drops a manifest next to them first:
// tool version, command, start time, seed, input-file fingerprints, and the
// fully resolved configuration. The timestamp is the only non-reproducible
// field, and it lives only here.
void write_manifest(const fs::path& path, const std::string& command, std::uint64_t seed,
                    const std::vector<fs::path>& inputs, const ordered_json& config) {
  ordered_json m;
  m["tool_version"] = std::string(kVersion);
  m["command"] = command;
  m["started_at"] = iso_timestamp_utc();
  m["seed"] = seed;
  ordered_json hashed = ordered_json::object();
  for (const fs::path& p : inputs) hashed[p.string()] = file_hash_hex(p);
  m["inputs"] = hashed;
  m["config"] = config;
  write_text_file(path, m.dump(2) + "\n");
}

void check_known_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                      const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) throw ValidationError("unknown key '" + it.key() + "' in " + where);
  }
}

// ---------------------------------------------------------------------------
// prepare

struct PrepareArgs {
  std::string input;
  std::optional<std::string> test;
  std::string output;
  int min_title_words = 3;
  bool english_only = false;
  std::optional<int> min_agreement;
  std::optional<std::size_t> valid_count;
  std::optional<double> valid_fraction;
  std::uint64_t seed = 0;
  bool use_description = false;
};

ordered_json clean_report_json(const CleanReport& r) {
  ordered_json j;
  j["original"] = r.original;
  j["kept"] = r.kept;
  ordered_json removed = ordered_json::object();
  for (const auto& [filter, count] : r.removed_by_filter) {
    ordered_json entry;
    entry["count"] = count;
    entry["percent"] = r.original == 0 ? 0.0 : 100.0 * static_cast<double>(count) / r.original;
    removed[filter] = entry;
  }
  j["removed"] = removed;
  j["percent_removed"] = r.percent_removed();
  return j;
}

int cmd_prepare(const PrepareArgs& a, std::ostream& out) {
  const fs::path outdir = a.output;
  fs::create_directories(outdir);

  ordered_json cfg;
  cfg["min_title_words"] = a.min_title_words;
  cfg["english_only"] = a.english_only;
  cfg["min_agreement"] = a.min_agreement ? ordered_json(*a.min_agreement) : ordered_json(nullptr);
  if (a.valid_fraction) {
    cfg["valid_fraction"] = *a.valid_fraction;
  } else {
    cfg["valid_count"] = a.valid_count.value_or(0);
  }
  cfg["use_description"] = a.use_description;

  std::vector<fs::path> inputs{a.input};
  if (a.test) inputs.emplace_back(*a.test);
  write_manifest(outdir / "manifest.json", "prepare", a.seed, inputs, cfg);

  DatasetLoad loaded = load_dataset(a.input);
  CleanFilters filters;
  filters.min_title_words = a.min_title_words;
  filters.english_only = a.english_only;
  // Agreement pruning needs annotations, which only held-out sets carry; when
  // no --test file is given the flag applies to --input instead.
  if (!a.test) filters.min_agreement = a.min_agreement;
  CleanResult cleaned = clean_examples(loaded.examples, filters);

  SplitSpec spec = a.valid_fraction ? SplitSpec::fraction(*a.valid_fraction)
                                    : SplitSpec::count(a.valid_count.value_or(0));
  Split split = split_validation(cleaned.kept, spec, a.seed);
  save_dataset(outdir / "train.jsonl", split.train);
  save_dataset(outdir / "valid.jsonl", split.valid);

  ordered_json report;
  report["input"] = clean_report_json(cleaned.report);
  report["train_examples"] = split.train.size();
  report["valid_examples"] = split.valid.size();

  if (a.test) {
    DatasetLoad test_loaded = load_dataset(*a.test);
    CleanFilters test_filters = filters;
    test_filters.min_agreement = a.min_agreement;
    CleanResult test_cleaned = clean_examples(test_loaded.examples, test_filters);
    save_dataset(outdir / "test.jsonl", test_cleaned.kept);
    report["test"] = clean_report_json(test_cleaned.report);
    report["test_examples"] = test_cleaned.kept.size();
  }

  // Vocabularies come from the train half only, so validation stays unseen.
  std::vector<std::string> src_texts;
  std::vector<std::string> tgt_texts;
  src_texts.reserve(split.train.size());
  tgt_texts.reserve(split.train.size());
  for (const Example& e : split.train) {
    src_texts.push_back(build_source_text(e, a.use_description));
    tgt_texts.push_back(recipe_to_text(e.recipe));
  }
  Vocabulary src_vocab = build_vocabulary(src_texts);
  Vocabulary tgt_vocab = build_vocabulary(tgt_texts);
  src_vocab.save(outdir / "src_vocab.tsv");
  tgt_vocab.save(outdir / "tgt_vocab.tsv");

  write_text_file(outdir / "clean_report.json", report.dump(2) + "\n");

  out << "kept " << cleaned.report.kept << "/" << cleaned.report.original << " examples ("
      << split.train.size() << " train, " << split.valid.size() << " valid)\n";
  if (a.test) out << "test examples kept: " << report["test_examples"].dump() << "\n";
  out << "source vocabulary: " << src_vocab.size() << " tokens\n";
  out << "target vocabulary: " << tgt_vocab.size() << " tokens\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string arch;
  std::string data_dir;
  std::optional<std::string> config_file;
  std::string out_dir;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_steps;
  std::optional<std::size_t> validate_every;
  std::optional<double> clip_norm;
  std::optional<std::string> scheduler;
  std::optional<std::size_t> warmup;
  std::optional<double> noam_factor;
  std::optional<double> target_seq_acc;
  bool use_description = false;
  bool dry_run = false;
};

struct ResolvedTrain {
  Arch arch = Arch::lstm;
  ModelConfig model;
  TrainConfig tcfg;
  std::string scheduler;  // "constant" or "noam"
};

std::string check_scheduler(const std::string& name) {
  if (name != "constant" && name != "noam") {
    throw ValidationError("unknown scheduler '" + name + "' (expected 'constant' or 'noam')");
  }
  return name;
}

std::size_t scheduler_model_size(const ModelConfig& config) {
  return std::visit(
      [](const auto& m) -> std::size_t {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, TransformerConfig>) {
          return m.model_size;
        } else {
          return m.hidden_size;
        }
      },
      config);
}

// Precedence: architecture defaults, then the config file, then flags. The
// noam schedule is the default for the transformer; the recurrent models
// default to a constant rate with gradient-norm clipping at 5.
ResolvedTrain resolve_train_config(const TrainArgs& a) {
  ResolvedTrain r;
  r.arch = parse_arch(a.arch);
  r.model = default_config(r.arch);
  TrainConfig& t = r.tcfg;

  const bool is_transformer = r.arch == Arch::transformer;
  r.scheduler = is_transformer ? "noam" : "constant";
  if (!is_transformer) t.clip_norm = 5.0;

  NoamConfig noam;
  std::optional<std::size_t> noam_model_size;

  if (a.config_file) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file_bytes(*a.config_file));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("config file '" + *a.config_file + "': " + e.what());
    }
    try {
      check_known_keys(j, {"model", "train"}, "config file");
      if (j.contains("model")) r.model = config_from_json(r.arch, j.at("model"));
      if (j.contains("train")) {
        const nlohmann::json& tj = j.at("train");
        check_known_keys(tj,
                         {"epochs", "batch_size", "base_lr", "seed", "max_steps",
                          "validate_every_steps", "clip_norm", "scheduler", "noam",
                          "target_sequence_acc", "use_description"},
                         "the \"train\" block");
        if (tj.contains("epochs")) t.epochs = tj.at("epochs").get<std::size_t>();
        if (tj.contains("batch_size")) t.batch_size = tj.at("batch_size").get<std::size_t>();
        if (tj.contains("base_lr")) t.base_lr = tj.at("base_lr").get<double>();
        if (tj.contains("seed")) t.seed = tj.at("seed").get<std::uint64_t>();
        if (tj.contains("max_steps")) {
          if (tj.at("max_steps").is_null()) {
            t.max_steps.reset();
          } else {
            t.max_steps = tj.at("max_steps").get<std::size_t>();
          }
        }
        if (tj.contains("validate_every_steps")) {
          t.validate_every_steps = tj.at("validate_every_steps").get<std::size_t>();
        }
        if (tj.contains("clip_norm")) {
          if (tj.at("clip_norm").is_null()) {
            t.clip_norm.reset();
          } else {
            double v = tj.at("clip_norm").get<double>();
            t.clip_norm = v > 0 ? std::optional<double>(v) : std::nullopt;
          }
        }
        if (tj.contains("scheduler")) {
          r.scheduler = check_scheduler(tj.at("scheduler").get<std::string>());
        }
        if (tj.contains("noam")) {
          const nlohmann::json& nj = tj.at("noam");
          check_known_keys(nj, {"factor", "warmup", "model_size"}, "the \"noam\" block");
          if (nj.contains("factor")) noam.factor = nj.at("factor").get<double>();
          if (nj.contains("warmup")) noam.warmup = nj.at("warmup").get<std::size_t>();
          if (nj.contains("model_size")) noam_model_size = nj.at("model_size").get<std::size_t>();
        }
        if (tj.contains("target_sequence_acc")) {
          if (tj.at("target_sequence_acc").is_null()) {
            t.target_sequence_acc.reset();
          } else {
            t.target_sequence_acc = tj.at("target_sequence_acc").get<double>();
          }
        }
        if (tj.contains("use_description")) {
          t.use_description = tj.at("use_description").get<bool>();
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("config file '" + *a.config_file + "': " + e.what());
    }
  }

  if (a.epochs) t.epochs = *a.epochs;
  if (a.batch_size) t.batch_size = *a.batch_size;
  if (a.lr) t.base_lr = *a.lr;
  if (a.seed) t.seed = *a.seed;
  if (a.max_steps) t.max_steps = *a.max_steps;
  if (a.validate_every) t.validate_every_steps = *a.validate_every;
  if (a.clip_norm) t.clip_norm = *a.clip_norm > 0 ? a.clip_norm : std::nullopt;
  if (a.scheduler) r.scheduler = check_scheduler(*a.scheduler);
  if (a.warmup) noam.warmup = *a.warmup;
  if (a.noam_factor) noam.factor = *a.noam_factor;
  if (a.target_seq_acc) t.target_sequence_acc = *a.target_seq_acc;
  if (a.use_description) t.use_description = true;

  if (r.scheduler == "noam") {
    noam.model_size = noam_model_size.value_or(scheduler_model_size(r.model));
    t.noam = noam;
  } else {
    t.noam.reset();
  }
  return r;
}

ordered_json train_config_json(const TrainConfig& t, const std::string& scheduler) {
  ordered_json j;
  j["epochs"] = t.epochs;
  j["batch_size"] = t.batch_size;
  j["validate_every_steps"] = t.validate_every_steps;
  j["scheduler"] = scheduler;
  if (t.noam) {
    ordered_json nj;
    nj["factor"] = t.noam->factor;
    nj["warmup"] = t.noam->warmup;
    nj["model_size"] = t.noam->model_size;
    j["noam"] = nj;
  } else {
    j["base_lr"] = t.base_lr;
  }
  j["max_steps"] = t.max_steps ? ordered_json(*t.max_steps) : ordered_json(nullptr);
  j["clip_norm"] = t.clip_norm ? ordered_json(*t.clip_norm) : ordered_json(nullptr);
  j["target_sequence_acc"] =
      t.target_sequence_acc ? ordered_json(*t.target_sequence_acc) : ordered_json(nullptr);
  j["seed"] = t.seed;
  j["use_description"] = t.use_description;
  return j;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  ResolvedTrain r = resolve_train_config(a);

  const fs::path data_dir = a.data_dir;
  const fs::path train_path = data_dir / "train.jsonl";
  const fs::path valid_path = data_dir / "valid.jsonl";
  const fs::path src_vocab_path = data_dir / "src_vocab.tsv";
  const fs::path tgt_vocab_path = data_dir / "tgt_vocab.tsv";
  for (const fs::path& p : {train_path, valid_path, src_vocab_path, tgt_vocab_path}) {
    if (!fs::exists(p)) {
      throw IoError("missing data file '" + p.string() + "' (run prepare first)");
    }
  }

  ordered_json resolved;
  resolved["arch"] = std::string(arch_name(r.arch));
  resolved["model"] = config_to_json(r.model);
  resolved["train"] = train_config_json(r.tcfg, r.scheduler);
  out << resolved.dump(2) << "\n";

  const fs::path out_dir = a.out_dir;
  fs::create_directories(out_dir);
  std::vector<fs::path> inputs = {train_path, valid_path, src_vocab_path, tgt_vocab_path};
  if (a.config_file) inputs.emplace_back(*a.config_file);
  write_manifest(out_dir / "manifest.json", "train", r.tcfg.seed, inputs, resolved);

  if (a.dry_run) return 0;

  DatasetLoad train_set = load_dataset(train_path);
  DatasetLoad valid_set = load_dataset(valid_path);
  Vocabulary src_vocab = Vocabulary::load(src_vocab_path);
  Vocabulary tgt_vocab = Vocabulary::load(tgt_vocab_path);

  std::unique_ptr<SeqModel> model = make_model(r.model, src_vocab, tgt_vocab, r.tcfg.seed);

  auto encode_all = [&](const std::vector<Example>& examples) {
    std::vector<EncodedPair> pairs;
    pairs.reserve(examples.size());
    for (const Example& e : examples) {
      pairs.push_back(encode_pair(e, model->source_vocab(), model->target_vocab(),
                                  model->max_source_len(), r.tcfg.use_description));
    }
    return pairs;
  };
  std::vector<EncodedPair> train_pairs = encode_all(train_set.examples);
  std::vector<EncodedPair> valid_pairs = encode_all(valid_set.examples);

  out << "training " << arch_name(r.arch) << ": " << train_pairs.size() << " train / "
      << valid_pairs.size() << " valid examples, " << model->params().parameter_count()
      << " parameters\n";

  r.tcfg.checkpoint_dir = out_dir;
  TrainResult result = train(*model, train_pairs, valid_pairs, r.tcfg);

  out << "finished after " << result.steps << " steps; best step " << result.best_step
      << " (sequence accuracy " << result.best_sequence_acc << ", validation loss "
      << result.best_valid_loss << ")\n";
  for (const ValidationRecord& rec : result.history.records) {
    if (rec.step == result.best_step) {
      out << eval_report_table(rec.valid);
      break;
    }
  }
  out << "checkpoint: " << (out_dir / "best.ckpt").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::string model;
  std::string data;
  std::optional<std::string> report;
  std::string format = "json";
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  if (a.format != "json" && a.format != "table") {
    throw ValidationError("--format must be 'json' or 'table'");
  }
  CheckpointData ckpt = load_checkpoint(a.model);
  DatasetLoad data = load_dataset(a.data);
  if (data.examples.empty()) throw ValidationError("no examples in '" + a.data + "'");

  if (a.report) {
    ordered_json cfg;
    cfg["model"] = a.model;
    cfg["data"] = a.data;
    cfg["format"] = a.format;
    cfg["use_description"] = ckpt.use_description;
    write_manifest(*a.report + ".manifest.json", "evaluate", 0, {a.model, a.data}, cfg);
  }

  std::vector<Prediction> preds;
  std::vector<Recipe> refs;
  preds.reserve(data.examples.size());
  refs.reserve(data.examples.size());
  for (const Example& e : data.examples) {
    preds.push_back(predict_recipe(*ckpt.model, build_source_text(e, ckpt.use_description), e.id));
    refs.push_back(e.recipe);
  }
  EvalReport report = evaluate(preds, refs);
  out << eval_report_table(report);
  if (a.report) {
    write_text_file(*a.report, a.format == "json" ? eval_report_json(report) + "\n"
                                                  : eval_report_table(report));
    out << "report written to " << *a.report << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
  std::string model;
  std::optional<std::string> text;
  std::optional<std::string> batch;
  std::optional<std::string> output;
};

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  if (!a.text && !a.batch) throw ValidationError("provide either --text or --batch");
  CheckpointData ckpt = load_checkpoint(a.model);

  if (a.text) {
    Prediction p = predict_recipe(*ckpt.model, *a.text);
    out << join_tokens(p.raw) << "\n";
    if (p.parsed) {
      out << "  trigger channel:  " << p.parsed->trigger_channel << "\n"
          << "  trigger function: " << p.parsed->trigger_function << "\n"
          << "  action channel:   " << p.parsed->action_channel << "\n"
          << "  action function:  " << p.parsed->action_function << "\n";
    } else {
      out << "  malformed: " << p.malformed->detail << "\n";
    }
    return 0;
  }

  if (!a.output) throw ValidationError("--batch requires --output");
  DatasetLoad data = load_dataset(*a.batch);
  ordered_json cfg;
  cfg["model"] = a.model;
  cfg["batch"] = *a.batch;
  cfg["use_description"] = ckpt.use_description;
  write_manifest(*a.output + ".manifest.json", "predict", 0, {a.model, *a.batch}, cfg);

  ensure_parent_dir(*a.output);
  std::ofstream lines(*a.output, std::ios::binary);
  if (!lines) throw IoError("cannot write '" + *a.output + "'");
  for (const Example& e : data.examples) {
    Prediction p = predict_recipe(*ckpt.model, build_source_text(e, ckpt.use_description), e.id);
    lines << prediction_to_json_line(p) << "\n";
  }
  if (!lines) throw IoError("failed while writing '" + *a.output + "'");
  out << data.examples.size() << " predictions written to " << *a.output << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"If-Then recipe toolkit: turn automation descriptions into recipes"};
  app.name("ifthen");
  app.require_subcommand(1);

  PrepareArgs prep;
  CLI::App* prepare =
      app.add_subcommand("prepare", "Clean a dataset, split off validation, build vocabularies");
  prepare->add_option("--input", prep.input, "training-pool dataset (line-delimited JSON)")
      ->required();
  prepare->add_option("--test", prep.test, "held-out dataset, cleaned with the same filters");
  prepare->add_option("--output", prep.output, "output directory")->required();
  prepare->add_option("--min-title-words", prep.min_title_words,
                      "drop examples whose title has fewer words (default 3)");
  prepare->add_flag("--english-only", prep.english_only, "drop titles that do not look English");
  prepare->add_option("--min-agreement", prep.min_agreement,
                      "keep annotated examples only when at least this many annotators "
                      "agree with the gold recipe");
  CLI::Option* valid_count_opt =
      prepare->add_option("--valid-count", prep.valid_count, "validation examples to split off");
  CLI::Option* valid_fraction_opt = prepare->add_option("--valid-fraction", prep.valid_fraction,
                                                        "validation fraction to split off");
  valid_count_opt->excludes(valid_fraction_opt);
  valid_fraction_opt->excludes(valid_count_opt);
  prepare->add_option("--seed", prep.seed, "split shuffle seed (default 0)");
  prepare->add_flag("--use-description", prep.use_description,
                    "include descriptions when building the source vocabulary");

  TrainArgs tr;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model on a prepared data directory");
  train_cmd->add_option("--arch", tr.arch, "lstm, stacked_rnn, or transformer")->required();
  train_cmd->add_option("--data", tr.data_dir, "directory produced by prepare")->required();
  train_cmd->add_option("--config", tr.config_file,
                        "JSON file with \"model\" and \"train\" blocks");
  train_cmd->add_option("--out", tr.out_dir, "run directory for checkpoint, history, manifest")
      ->required();
  train_cmd->add_option("--epochs", tr.epochs, "training epochs");
  train_cmd->add_option("--batch-size", tr.batch_size, "examples per step");
  train_cmd->add_option("--lr", tr.lr, "learning rate for the constant scheduler");
  train_cmd->add_option("--seed", tr.seed, "initialization, shuffle, and dropout seed");
  train_cmd->add_option("--max-steps", tr.max_steps, "hard cap on optimizer steps");
  train_cmd->add_option("--validate-every", tr.validate_every, "steps between validations");
  train_cmd->add_option("--clip-norm", tr.clip_norm, "global gradient-norm clip; 0 disables");
  train_cmd->add_option("--scheduler", tr.scheduler, "constant or noam");
  train_cmd->add_option("--warmup", tr.warmup, "noam warmup steps");
  train_cmd->add_option("--noam-factor", tr.noam_factor, "noam scale factor");
  train_cmd->add_option("--target-seq-acc", tr.target_seq_acc,
                        "stop once validation sequence accuracy reaches this");
  train_cmd->add_flag("--use-description", tr.use_description,
                      "feed title [SEP] description as the source text");
  train_cmd->add_flag("--dry-run", tr.dry_run,
                      "write the manifest and echo the resolved config, then exit");

  EvaluateArgs ev;
  CLI::App* evaluate_cmd =
      app.add_subcommand("evaluate", "Score a checkpoint against a labelled dataset");
  evaluate_cmd->add_option("--model", ev.model, "checkpoint file")->required();
  evaluate_cmd->add_option("--data", ev.data, "labelled dataset (line-delimited JSON)")
      ->required();
  evaluate_cmd->add_option("--report", ev.report, "write the report to this file");
  evaluate_cmd->add_option("--format", ev.format, "report file format: json or table");

  PredictArgs pr;
  CLI::App* predict_cmd =
      app.add_subcommand("predict", "Decode recipes for raw text or a dataset");
  predict_cmd->add_option("--model", pr.model, "checkpoint file")->required();
  CLI::Option* text_opt =
      predict_cmd->add_option("--text", pr.text, "one description to translate");
  CLI::Option* batch_opt =
      predict_cmd->add_option("--batch", pr.batch, "dataset of descriptions to translate");
  text_opt->excludes(batch_opt);
  batch_opt->excludes(text_opt);
  predict_cmd->add_option("--output", pr.output, "prediction file for --batch");

  int rc = 0;
  prepare->callback([&] { rc = cmd_prepare(prep, out); });
  train_cmd->callback([&] { rc = cmd_train(tr, out); });
  evaluate_cmd->callback([&] { rc = cmd_evaluate(ev, out); });
  predict_cmd->callback([&] { rc = cmd_predict(pr, out); });

  try {
    // CLI11's string-vector parse entry point consumes from the back.
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::Success&) {
    std::vector<CLI::App*> open = app.get_subcommands();
    out << (open.empty() ? app.help() : open.front()->help());
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const NonFiniteGradient& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}

}  // namespace ifthen

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ifthen/recipe.hpp"

namespace ifthen {

// One corpus record: natural-language title (the model input), optional
// description, the gold recipe, and per-annotator recipes on test sets.
struct Example {
  std::string id;
  std::string title;
  std::optional<std::string> description;
  Recipe recipe;
  std::optional<std::vector<Recipe>> annotations;
};

enum class LoadMode { strict, lenient };

struct DatasetLoad {
  std::vector<Example> examples;
  std::size_t skipped_lines = 0;
};

// Reads UTF-8 line-delimited JSON records. In strict mode a malformed line
// throws ValidationError with its 1-based line number; in lenient mode it is
// skipped and counted.
DatasetLoad load_dataset(const std::filesystem::path& path, LoadMode mode = LoadMode::strict);

// Serializes examples back to the line-delimited record format. Field order
// is fixed so identical inputs produce identical bytes.
void save_dataset(const std::filesystem::path& path, const std::vector<Example>& examples);
std::string example_to_json_line(const Example& e);

struct CleanFilters {
  int min_title_words = 3;
  bool english_only = false;
  std::optional<int> min_agreement;  // test sets only
};

// Removal buckets keyed in the order the filters run. kept + sum(removed)
// always equals the input size.
struct CleanReport {
  std::size_t original = 0;
  std::size_t kept = 0;
  std::map<std::string, std::size_t> removed_by_filter;

  std::size_t removed_total() const;
  double percent_removed() const;
};

struct CleanResult {
  std::vector<Example> kept;
  CleanReport report;
};

CleanResult clean_examples(const std::vector<Example>& examples, const CleanFilters& filters);

// Approximate English check: >= 90% of title bytes are ASCII and at least
// one lowercased title token appears in a bundled 200-word stopword list.
bool looks_english(const std::string& title);
const std::vector<std::string>& english_stopwords();

// Lowercased title, optionally followed by " [SEP] " and the lowercased
// description.
std::string build_source_text(const Example& e, bool use_description);

// Reserved ids; [SEP] survives any vocabulary cap because it is special.
struct Specials {
  static constexpr int pad = 0;
  static constexpr int unk = 1;
  static constexpr int bos = 2;
  static constexpr int eos = 3;
  static constexpr int sep = 4;
  static constexpr std::size_t count = 5;
};

inline constexpr const char* kPadToken = "<pad>";
inline constexpr const char* kUnkToken = "<unk>";
inline constexpr const char* kBosToken = "<s>";
inline constexpr const char* kEosToken = "</s>";
inline constexpr const char* kSepToken = "[SEP]";

class Vocabulary {
 public:
  Vocabulary();  // specials only

  // Token -> id; unknown tokens map to unk.
  int id(const std::string& token) const;
  const std::string& token(int id) const;
  bool contains(const std::string& token) const;
  std::size_t size() const { return id_to_token_.size(); }

  // Non-special entries in id order (descending frequency).
  const std::vector<std::string>& regular_tokens() const { return regular_; }
  // Frequency recorded at build time; 0 for specials and loaded-from-file
  // entries without counts.
  std::uint64_t frequency(const std::string& token) const;

  std::uint64_t hash() const;  // order-sensitive fingerprint over all tokens

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path,
                         std::optional<std::size_t> max_size = std::nullopt);

  // The save()/load() file format ("token\tfreq" per line) as a string, used
  // to embed vocabularies inside checkpoints.
  std::string to_text() const;
  static Vocabulary from_text(const std::string& text,
                              std::optional<std::size_t> max_size = std::nullopt,
                              const std::string& label = "vocabulary data");

  // Rebuilds a capped copy keeping the first max_size regular tokens.
  Vocabulary capped(std::size_t max_size) const;

  friend Vocabulary build_vocabulary(const std::vector<std::string>& texts,
                                     std::optional<std::size_t> max_size);

 private:
  void add_regular(const std::string& token, std::uint64_t freq);

  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
  std::vector<std::string> regular_;
  std::unordered_map<std::string, std::uint64_t> freq_;
};

// Whitespace tokenization over already-lowercased text. When max_size is
// set, keeps the max_size most frequent tokens; frequency ties go to the
// earlier first occurrence. Tokens matching a special surface form are not
// re-added.
Vocabulary build_vocabulary(const std::vector<std::string>& texts,
                            std::optional<std::size_t> max_size = std::nullopt);

// Fixed-length id encoding: truncation keeps the head, padding is a trailing
// run of pad ids.
std::vector<int> encode_source(const std::string& text, const Vocabulary& v, std::size_t max_len);

// BOS + 4 recipe tokens + EOS; always length 6.
std::vector<int> encode_target(const Recipe& r, const Vocabulary& target_vocab);

struct EncodedPair {
  std::vector<int> source_ids;  // length = max_source_len
  std::vector<int> target_ids;  // length = 6
};

EncodedPair encode_pair(const Example& e, const Vocabulary& src, const Vocabulary& tgt,
                        std::size_t max_source_len, bool use_description);

// Validation split request: either an absolute count or a fraction of the
// input size.
struct SplitSpec {
  static SplitSpec count(std::size_t n);
  static SplitSpec fraction(double f);

  std::size_t resolve(std::size_t total) const;

  bool is_fraction = false;
  std::size_t count_ = 0;
  double fraction_ = 0.0;
};

struct Split {
  std::vector<Example> train;
  std::vector<Example> valid;
};

// Deterministic for a fixed seed; both halves keep the input order.
Split split_validation(const std::vector<Example>& train, const SplitSpec& spec,
                       std::uint64_t seed);

}  // namespace ifthen

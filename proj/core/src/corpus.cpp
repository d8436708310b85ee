#include "ifthen/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "ifthen/common.hpp"
#include "ifthen/rng.hpp"

namespace ifthen {

namespace {

using ordered_json = nlohmann::ordered_json;

Recipe recipe_from_json(const nlohmann::json& j) {
  Recipe r{
      j.at("trigger_channel").get<std::string>(),
      j.at("trigger_function").get<std::string>(),
      j.at("action_channel").get<std::string>(),
      j.at("action_function").get<std::string>(),
  };
  return r.normalized();
}

Example example_from_json(const nlohmann::json& j) {
  Example e;
  e.id = j.at("id").get<std::string>();
  e.title = j.at("title").get<std::string>();
  if (whitespace_tokens(e.title).empty()) {
    throw ValidationError("title is empty");
  }
  if (j.contains("description") && !j.at("description").is_null()) {
    e.description = j.at("description").get<std::string>();
  }
  e.recipe = recipe_from_json(j);
  if (j.contains("annotations") && !j.at("annotations").is_null()) {
    std::vector<Recipe> anns;
    for (const auto& a : j.at("annotations")) anns.push_back(recipe_from_json(a));
    e.annotations = std::move(anns);
  }
  return e;
}

}  // namespace

DatasetLoad load_dataset(const std::filesystem::path& path, LoadMode mode) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file: " + path.string());

  DatasetLoad out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (whitespace_tokens(line).empty()) continue;
    try {
      out.examples.push_back(example_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      if (mode == LoadMode::strict) {
        throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
      }
      ++out.skipped_lines;
    }
  }
  return out;
}

std::string example_to_json_line(const Example& e) {
  ordered_json j;
  j["id"] = e.id;
  j["title"] = e.title;
  if (e.description) {
    j["description"] = *e.description;
  } else {
    j["description"] = nullptr;
  }
  j["trigger_channel"] = e.recipe.trigger_channel;
  j["trigger_function"] = e.recipe.trigger_function;
  j["action_channel"] = e.recipe.action_channel;
  j["action_function"] = e.recipe.action_function;
  if (e.annotations) {
    ordered_json anns = ordered_json::array();
    for (const Recipe& r : *e.annotations) {
      ordered_json a;
      a["trigger_channel"] = r.trigger_channel;
      a["trigger_function"] = r.trigger_function;
      a["action_channel"] = r.action_channel;
      a["action_function"] = r.action_function;
      anns.push_back(a);
    }
    j["annotations"] = anns;
  }
  return j.dump();
}

void save_dataset(const std::filesystem::path& path, const std::vector<Example>& examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset file: " + path.string());
  for (const Example& e : examples) out << example_to_json_line(e) << '\n';
}

std::size_t CleanReport::removed_total() const {
  std::size_t n = 0;
  for (const auto& [_, c] : removed_by_filter) n += c;
  return n;
}

double CleanReport::percent_removed() const {
  if (original == 0) return 0.0;
  return 100.0 * static_cast<double>(removed_total()) / static_cast<double>(original);
}

const std::vector<std::string>& english_stopwords() {
  // 200 common English function/filler words; the count is pinned by a test.
  static const std::vector<std::string> words = {
      "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "your",
      "yours", "yourself", "yourselves", "he", "him", "his", "himself", "she", "her", "hers",
      "herself", "it", "its", "itself", "they", "them", "their", "theirs", "themselves", "what",
      "which", "who", "whom", "this", "that", "these", "those", "am", "is", "are",
      "was", "were", "be", "been", "being", "have", "has", "had", "having", "do",
      "does", "did", "doing", "a", "an", "the", "and", "but", "if", "or",
      "because", "as", "until", "while", "of", "at", "by", "for", "with", "about",
      "against", "between", "into", "through", "during", "before", "after", "above", "below", "to",
      "from", "up", "down", "in", "out", "on", "off", "over", "under", "again",
      "further", "then", "once", "here", "there", "when", "where", "why", "how", "all",
      "any", "both", "each", "few", "more", "most", "other", "some", "such", "no",
      "nor", "not", "only", "own", "same", "so", "than", "too", "very", "can",
      "will", "just", "should", "now", "also", "always", "anyone", "anything", "around", "away",
      "back", "become", "becomes", "came", "come", "could", "day", "done", "every", "everything",
      "get", "gets", "give", "goes", "going", "gone", "got", "keep", "know", "last",
      "let", "like", "made", "make", "many", "may", "might", "much", "must", "never",
      "new", "next", "nothing", "often", "one", "onto", "put", "really", "said", "say",
      "see", "send", "shall", "since", "still", "take", "tell", "time", "today", "together",
      "upon", "use", "used", "using", "want", "way", "well", "went", "whenever", "whether",
      "without", "would", "yet", "something", "soon", "sure", "via", "whose", "within", "ever",
  };
  return words;
}

bool looks_english(const std::string& title) {
  if (title.empty()) return false;
  std::size_t ascii = 0;
  for (unsigned char c : title) {
    if (c <= 0x7F) ++ascii;
  }
  if (static_cast<double>(ascii) < 0.9 * static_cast<double>(title.size())) return false;

  static const std::unordered_set<std::string> set(english_stopwords().begin(),
                                                   english_stopwords().end());
  for (const std::string& tok : whitespace_tokens(ascii_lower(title))) {
    if (set.count(tok)) return true;
  }
  return false;
}

CleanResult clean_examples(const std::vector<Example>& examples, const CleanFilters& filters) {
  CleanResult out;
  out.report.original = examples.size();
  out.report.removed_by_filter["title_too_short"] = 0;
  if (filters.english_only) out.report.removed_by_filter["non_english"] = 0;
  if (filters.min_agreement) {
    out.report.removed_by_filter["missing_annotations"] = 0;
    out.report.removed_by_filter["low_agreement"] = 0;
  }

  for (const Example& e : examples) {
    if (static_cast<int>(whitespace_tokens(e.title).size()) < filters.min_title_words) {
      ++out.report.removed_by_filter["title_too_short"];
      continue;
    }
    if (filters.english_only && !looks_english(e.title)) {
      ++out.report.removed_by_filter["non_english"];
      continue;
    }
    if (filters.min_agreement) {
      if (!e.annotations) {
        ++out.report.removed_by_filter["missing_annotations"];
        continue;
      }
      int agreeing = 0;
      for (const Recipe& a : *e.annotations) {
        if (a == e.recipe) ++agreeing;
      }
      if (agreeing < *filters.min_agreement) {
        ++out.report.removed_by_filter["low_agreement"];
        continue;
      }
    }
    out.kept.push_back(e);
  }
  out.report.kept = out.kept.size();
  return out;
}

std::string build_source_text(const Example& e, bool use_description) {
  std::string text = ascii_lower(e.title);
  if (use_description && e.description && !whitespace_tokens(*e.description).empty()) {
    text += " ";
    text += kSepToken;
    text += " " + ascii_lower(*e.description);
  }
  return text;
}

Vocabulary::Vocabulary() {
  id_to_token_ = {kPadToken, kUnkToken, kBosToken, kEosToken, kSepToken};
  for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
    token_to_id_[id_to_token_[i]] = static_cast<int>(i);
  }
}

void Vocabulary::add_regular(const std::string& token, std::uint64_t freq) {
  if (token_to_id_.count(token)) return;
  token_to_id_[token] = static_cast<int>(id_to_token_.size());
  id_to_token_.push_back(token);
  regular_.push_back(token);
  freq_[token] = freq;
}

int Vocabulary::id(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? Specials::unk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw ValidationError("token id out of range: " + std::to_string(id));
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(const std::string& token) const {
  return token_to_id_.count(token) > 0;
}

std::uint64_t Vocabulary::frequency(const std::string& token) const {
  auto it = freq_.find(token);
  return it == freq_.end() ? 0 : it->second;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const std::string& t : id_to_token_) {
    h = fnv1a64(h, t);
    h = fnv1a64(h, "\n");
  }
  return h;
}

std::string Vocabulary::to_text() const {
  std::string out;
  for (const std::string& t : id_to_token_) {
    out += t;
    out += '\t';
    out += std::to_string(frequency(t));
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::from_text(const std::string& text, std::optional<std::size_t> max_size,
                                 const std::string& label) {
  if (max_size && *max_size < 1) throw ValidationError("vocabulary max_size must be >= 1");

  Vocabulary v;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::string token = line;
    std::uint64_t freq = 0;
    if (auto tab = line.find('\t'); tab != std::string::npos) {
      token = line.substr(0, tab);
      freq = std::strtoull(line.c_str() + tab + 1, nullptr, 10);
    }
    if (line_no < Specials::count) {
      if (token != v.id_to_token_[line_no]) {
        throw ValidationError(label + " does not start with the reserved special tokens");
      }
    } else if (!max_size || v.regular_.size() < *max_size) {
      v.add_regular(token, freq);
    }
    ++line_no;
  }
  if (line_no < Specials::count) {
    throw ValidationError(label + " is truncated");
  }
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocabulary file: " + path.string());
  out << to_text();
}

Vocabulary Vocabulary::load(const std::filesystem::path& path,
                            std::optional<std::size_t> max_size) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open vocabulary file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_text(buffer.str(), max_size, "vocabulary file " + path.string());
}

Vocabulary Vocabulary::capped(std::size_t max_size) const {
  if (max_size < 1) throw ValidationError("vocabulary max_size must be >= 1");
  Vocabulary v;
  for (const std::string& t : regular_) {
    if (v.regular_.size() >= max_size) break;
    v.add_regular(t, frequency(t));
  }
  return v;
}

Vocabulary build_vocabulary(const std::vector<std::string>& texts,
                            std::optional<std::size_t> max_size) {
  if (max_size && *max_size < 1) throw ValidationError("vocabulary max_size must be >= 1");

  Vocabulary v;
  struct Entry {
    std::uint64_t freq = 0;
    std::size_t first_seen = 0;
  };
  std::unordered_map<std::string, Entry> counts;
  std::vector<std::string> order;
  std::size_t position = 0;
  for (const std::string& text : texts) {
    for (std::string& tok : whitespace_tokens(text)) {
      ++position;
      if (v.contains(tok)) continue;  // special surface forms keep their ids
      auto [it, inserted] = counts.try_emplace(tok);
      if (inserted) {
        it->second.first_seen = position;
        order.push_back(tok);
      }
      ++it->second.freq;
    }
  }
  std::stable_sort(order.begin(), order.end(), [&](const std::string& a, const std::string& b) {
    const Entry& ea = counts[a];
    const Entry& eb = counts[b];
    if (ea.freq != eb.freq) return ea.freq > eb.freq;
    return ea.first_seen < eb.first_seen;
  });
  const std::size_t limit = max_size ? *max_size : order.size();
  for (std::size_t i = 0; i < order.size() && i < limit; ++i) {
    v.add_regular(order[i], counts[order[i]].freq);
  }
  return v;
}

std::vector<int> encode_source(const std::string& text, const Vocabulary& v,
                               std::size_t max_len) {
  if (max_len < 1) throw ValidationError("encode_source max_len must be >= 1");
  std::vector<int> ids;
  ids.reserve(max_len);
  for (const std::string& tok : whitespace_tokens(text)) {
    if (ids.size() == max_len) break;  // truncation keeps the head
    ids.push_back(v.id(tok));
  }
  while (ids.size() < max_len) ids.push_back(Specials::pad);
  return ids;
}

std::vector<int> encode_target(const Recipe& r, const Vocabulary& target_vocab) {
  const RecipeSequence seq = serialize_recipe(r);
  std::vector<int> ids;
  ids.reserve(6);
  ids.push_back(Specials::bos);
  for (const std::string& t : seq.tokens) ids.push_back(target_vocab.id(t));
  ids.push_back(Specials::eos);
  return ids;
}

EncodedPair encode_pair(const Example& e, const Vocabulary& src, const Vocabulary& tgt,
                        std::size_t max_source_len, bool use_description) {
  return EncodedPair{
      encode_source(build_source_text(e, use_description), src, max_source_len),
      encode_target(e.recipe, tgt),
  };
}

SplitSpec SplitSpec::count(std::size_t n) {
  SplitSpec s;
  s.count_ = n;
  return s;
}

SplitSpec SplitSpec::fraction(double f) {
  if (f < 0.0 || f >= 1.0) throw ValidationError("validation fraction must be in [0, 1)");
  SplitSpec s;
  s.is_fraction = true;
  s.fraction_ = f;
  return s;
}

std::size_t SplitSpec::resolve(std::size_t total) const {
  if (!is_fraction) return count_;
  return static_cast<std::size_t>(
      std::llround(fraction_ * static_cast<double>(total)));
}

Split split_validation(const std::vector<Example>& train, const SplitSpec& spec,
                       std::uint64_t seed) {
  const std::size_t n_valid = spec.resolve(train.size());
  if (n_valid >= train.size()) {
    throw ValidationError("validation size " + std::to_string(n_valid) +
                          " must be smaller than the train size " +
                          std::to_string(train.size()));
  }
  std::vector<std::size_t> indices(train.size());
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
  Rng rng(seed);
  rng.shuffle(indices);

  std::vector<bool> in_valid(train.size(), false);
  for (std::size_t i = 0; i < n_valid; ++i) in_valid[indices[i]] = true;

  Split out;
  out.train.reserve(train.size() - n_valid);
  out.valid.reserve(n_valid);
  for (std::size_t i = 0; i < train.size(); ++i) {
    (in_valid[i] ? out.valid : out.train).push_back(train[i]);
  }
  return out;
}

}  // namespace ifthen

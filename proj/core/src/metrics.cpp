#include "ifthen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "ifthen/common.hpp"

namespace ifthen {

namespace {

// Integer tallies; every public fraction is one count divided by n (or 4n),
// so results match a brute-force counting oracle bitwise.
struct Tally {
  std::size_t n = 0;
  std::size_t exact = 0;
  std::array<std::size_t, 4> slot_matches{};
  std::array<std::size_t, 5> error_bins{};
};

bool slot_matches_ref(const SlotAlignment& slots, const std::array<std::string, 4>& ref,
                      std::size_t i) {
  return slots[i].has_value() && *slots[i] == ref[i];
}

Tally tally_tokens(const std::vector<std::vector<std::string>>& pred_tokens,
                   const std::vector<std::array<std::string, 4>>& ref_slots) {
  if (pred_tokens.size() != ref_slots.size()) {
    throw ValidationError("metrics: " + std::to_string(pred_tokens.size()) +
                          " predictions against " + std::to_string(ref_slots.size()) +
                          " references");
  }
  if (pred_tokens.empty()) throw ValidationError("metrics: empty prediction set");

  Tally t;
  t.n = pred_tokens.size();
  for (std::size_t i = 0; i < t.n; ++i) {
    const SlotAlignment slots = slot_align(pred_tokens[i]);
    std::size_t matched = 0;
    for (std::size_t s = 0; s < 4; ++s) {
      if (slot_matches_ref(slots, ref_slots[i], s)) {
        ++matched;
        ++t.slot_matches[s];
      }
    }
    const bool exact = pred_tokens[i].size() == 4 && matched == 4;
    if (exact) ++t.exact;
    const std::size_t errors = exact ? 0 : std::max<std::size_t>(1, 4 - matched);
    ++t.error_bins[errors];
  }
  return t;
}

std::vector<std::vector<std::string>> raw_of(const std::vector<Prediction>& preds) {
  std::vector<std::vector<std::string>> out;
  out.reserve(preds.size());
  for (const Prediction& p : preds) out.push_back(p.raw);
  return out;
}

std::vector<std::array<std::string, 4>> slots_of(const std::vector<Recipe>& refs) {
  std::vector<std::array<std::string, 4>> out;
  out.reserve(refs.size());
  for (const Recipe& r : refs) out.push_back(reference_slots(r));
  return out;
}

Tally tally(const std::vector<Prediction>& preds, const std::vector<Recipe>& refs) {
  return tally_tokens(raw_of(preds), slots_of(refs));
}

EvalReport report_from(const Tally& t) {
  EvalReport r;
  r.n = t.n;
  const double n = static_cast<double>(t.n);
  r.sequence_acc = static_cast<double>(t.exact) / n;
  std::size_t total_slots = 0;
  for (std::size_t s = 0; s < 4; ++s) {
    total_slots += t.slot_matches[s];
    r.component_acc[s] = static_cast<double>(t.slot_matches[s]) / n;
  }
  r.positional_acc = static_cast<double>(total_slots) / (4.0 * n);
  for (std::size_t e = 0; e < 5; ++e) {
    r.error_distribution[e] = static_cast<double>(t.error_bins[e]) / n;
  }
  return r;
}

void enforce_invariants(const EvalReport& r) {
  double dist_sum = 0.0;
  for (double d : r.error_distribution) dist_sum += d;
  if (std::abs(dist_sum - 1.0) > 1e-9) {
    throw ValidationError("metrics: error distribution sums to " + std::to_string(dist_sum));
  }
  if (r.error_distribution[0] != r.sequence_acc) {
    throw ValidationError("metrics: zero-error bin disagrees with sequence accuracy");
  }
  double comp_mean = 0.0;
  for (double c : r.component_acc) comp_mean += c;
  comp_mean /= 4.0;
  if (std::abs(comp_mean - r.positional_acc) > 1e-12) {
    throw ValidationError("metrics: positional accuracy disagrees with component mean");
  }
  if (r.sequence_acc > r.positional_acc) {
    throw ValidationError("metrics: sequence accuracy exceeds positional accuracy");
  }
}

}  // namespace

double sequence_accuracy(const std::vector<Prediction>& preds, const std::vector<Recipe>& refs) {
  const Tally t = tally(preds, refs);
  return static_cast<double>(t.exact) / static_cast<double>(t.n);
}

double positional_accuracy(const std::vector<Prediction>& preds, const std::vector<Recipe>& refs) {
  const Tally t = tally(preds, refs);
  std::size_t total = 0;
  for (std::size_t s = 0; s < 4; ++s) total += t.slot_matches[s];
  return static_cast<double>(total) / (4.0 * static_cast<double>(t.n));
}

double component_accuracy(const std::vector<Prediction>& preds, const std::vector<Recipe>& refs,
                          SlotRole role) {
  const Tally t = tally(preds, refs);
  return static_cast<double>(t.slot_matches[static_cast<std::size_t>(role)]) /
         static_cast<double>(t.n);
}

double component_accuracy(const std::vector<Prediction>& preds, const std::vector<Recipe>& refs,
                          const std::string& role) {
  for (std::size_t s = 0; s < 4; ++s) {
    if (role == kSlotNames[s]) return component_accuracy(preds, refs, static_cast<SlotRole>(s));
  }
  throw ValidationError("metrics: unknown component role '" + role + "'");
}

std::array<double, 5> error_distribution(const std::vector<Prediction>& preds,
                                         const std::vector<Recipe>& refs) {
  const Tally t = tally(preds, refs);
  std::array<double, 5> out{};
  for (std::size_t e = 0; e < 5; ++e) {
    out[e] = static_cast<double>(t.error_bins[e]) / static_cast<double>(t.n);
  }
  return out;
}

EvalReport evaluate(const std::vector<Prediction>& preds, const std::vector<Recipe>& refs) {
  EvalReport r = report_from(tally(preds, refs));
  enforce_invariants(r);
  return r;
}

EvalReport evaluate_tokens(const std::vector<std::vector<std::string>>& pred_tokens,
                           const std::vector<std::array<std::string, 4>>& ref_slots) {
  EvalReport r = report_from(tally_tokens(pred_tokens, ref_slots));
  enforce_invariants(r);
  return r;
}

std::string eval_report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["n"] = r.n;
  j["sequence_acc"] = r.sequence_acc;
  j["positional_acc"] = r.positional_acc;
  nlohmann::ordered_json comp;
  for (std::size_t s = 0; s < 4; ++s) comp[kSlotNames[s]] = r.component_acc[s];
  j["component_acc"] = std::move(comp);
  j["error_distribution"] = r.error_distribution;
  return j.dump();
}

std::string eval_report_table(const EvalReport& r) {
  static constexpr std::array<const char*, 4> kComponentRows = {
      "Trigger Channel", "Trigger Function", "Action Channel", "Action Function"};
  static constexpr std::array<const char*, 5> kErrorRows = {"Zero", "One", "Two", "Three",
                                                            "Four"};
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(4);
  auto row = [&out](const char* label, double value) {
    out << label;
    for (std::size_t pad = std::string(label).size(); pad < 20; ++pad) out << ' ';
    out << value << '\n';
  };
  out << "Accuracy (n=" << r.n << ")\n";
  row("Sequence", r.sequence_acc);
  row("Positional", r.positional_acc);
  for (std::size_t s = 0; s < 4; ++s) row(kComponentRows[s], r.component_acc[s]);
  out << "Errors\n";
  for (std::size_t e = 0; e < 5; ++e) row(kErrorRows[e], r.error_distribution[e]);
  return out.str();
}

}  // namespace ifthen

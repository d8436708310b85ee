#pragma once

#include <array>
#include <string>
#include <vector>

#include "ifthen/decode.hpp"
#include "ifthen/recipe.hpp"

namespace ifthen {

// The full scoring suite over one prediction set. All fractions share the
// same integer-count internals, so cross-metric identities hold exactly:
// error_distribution sums to 1, bin 0 equals sequence_acc, and positional_acc
// is the mean of the four component accuracies.
struct EvalReport {
  double sequence_acc = 0.0;
  double positional_acc = 0.0;
  std::array<double, 4> component_acc{};  // indexed by SlotRole order
  std::array<double, 5> error_distribution{};
  std::size_t n = 0;
};

// Fraction of pairs whose raw sequence, joined by spaces, exactly equals the
// serialized reference.
double sequence_accuracy(const std::vector<Prediction>& preds, const std::vector<Recipe>& refs);

// Mean over pairs of (matching slots)/4; malformed predictions score through
// their slot alignment.
double positional_accuracy(const std::vector<Prediction>& preds, const std::vector<Recipe>& refs);

// Fraction of pairs whose given slot matches exactly; function slots compare
// the fully qualified channel.function token.
double component_accuracy(const std::vector<Prediction>& preds, const std::vector<Recipe>& refs,
                          SlotRole role);
// Name-keyed variant; unknown names throw ValidationError.
double component_accuracy(const std::vector<Prediction>& preds, const std::vector<Recipe>& refs,
                          const std::string& role);

// Histogram over how many of the 4 slots are wrong: an exact sequence match
// counts as zero errors, anything else as max(1, 4 - matching slots).
std::array<double, 5> error_distribution(const std::vector<Prediction>& preds,
                                         const std::vector<Recipe>& refs);

// All metrics in one pass; enforces the report invariants before returning.
EvalReport evaluate(const std::vector<Prediction>& preds, const std::vector<Recipe>& refs);

// Token-level core for callers that already hold raw token sequences and
// reference slot tokens (training-time validation).
EvalReport evaluate_tokens(const std::vector<std::vector<std::string>>& pred_tokens,
                           const std::vector<std::array<std::string, 4>>& ref_slots);

std::string eval_report_json(const EvalReport& r);

// Aligned two-block table: accuracy rows (Sequence, Positional, the four
// components) followed by the error histogram (Zero..Four).
std::string eval_report_table(const EvalReport& r);

}  // namespace ifthen

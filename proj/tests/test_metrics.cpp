#include <doctest.h>

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include "ifthen/common.hpp"
#include "ifthen/decode.hpp"
#include "ifthen/metrics.hpp"
#include "ifthen/recipe.hpp"
#include "ifthen/rng.hpp"

using namespace ifthen;

namespace {

Prediction pred_from(std::vector<std::string> tokens) {
  return prediction_from_tokens(std::move(tokens));
}

// Independent slot-by-slot scorer using integer counts and one final
// division, written against the definitions rather than the library
// internals.
EvalReport oracle(const std::vector<std::vector<std::string>>& preds,
                  const std::vector<Recipe>& refs) {
  EvalReport r;
  r.n = preds.size();
  std::size_t exact = 0;
  std::size_t matched_total = 0;
  std::array<std::size_t, 4> comp{};
  std::array<std::size_t, 5> bins{};
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const std::array<std::string, 4> ref = reference_slots(refs[i]);
    std::size_t matched = 0;
    for (std::size_t s = 0; s < 4; ++s) {
      if (s < preds[i].size() && preds[i][s] == ref[s]) {
        ++matched;
        ++comp[s];
      }
    }
    const bool is_exact = preds[i].size() == 4 && matched == 4;
    if (is_exact) ++exact;
    matched_total += matched;
    bins[is_exact ? 0 : std::max<std::size_t>(1, 4 - matched)] += 1;
  }
  const double n = static_cast<double>(r.n);
  r.sequence_acc = static_cast<double>(exact) / n;
  r.positional_acc = static_cast<double>(matched_total) / (4.0 * n);
  for (std::size_t s = 0; s < 4; ++s) r.component_acc[s] = static_cast<double>(comp[s]) / n;
  for (std::size_t b = 0; b < 5; ++b) r.error_distribution[b] = static_cast<double>(bins[b]) / n;
  return r;
}

const Recipe kGold{"instagram", "any_new_photo_by_you", "dropbox", "add_file_from_url"};

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("an exact prediction scores 1.0 everywhere") {
    std::vector<Prediction> preds = {pred_from(serialize_recipe(kGold).token_vector())};
    std::vector<Recipe> refs = {kGold};
    EvalReport r = evaluate(preds, refs);
    CHECK(r.sequence_acc == 1.0);
    CHECK(r.positional_acc == 1.0);
    for (double c : r.component_acc) CHECK(c == 1.0);
    CHECK(r.error_distribution[0] == 1.0);
    for (int b = 1; b < 5; ++b) CHECK(r.error_distribution[b] == 0.0);
  }

  TEST_CASE("three matching slots score 0.75 positional accuracy") {
    std::vector<std::string> tokens = serialize_recipe(kGold).token_vector();
    tokens[3] = "dropbox.create_a_text_file";  // wrong action function
    EvalReport r = evaluate({pred_from(tokens)}, {kGold});
    CHECK(r.sequence_acc == 0.0);
    CHECK(r.positional_acc == 0.75);
    CHECK(r.component_acc[0] == 1.0);
    CHECK(r.component_acc[1] == 1.0);
    CHECK(r.component_acc[2] == 1.0);
    CHECK(r.component_acc[3] == 0.0);
    CHECK(r.error_distribution[1] == 1.0);
  }

  TEST_CASE("channel errors do not leak into function slots") {
    std::vector<std::string> tokens = serialize_recipe(kGold).token_vector();
    tokens[0] = "flickr";  // wrong trigger channel, function token untouched
    EvalReport r = evaluate({pred_from(tokens)}, {kGold});
    CHECK(r.component_acc[0] == 0.0);
    CHECK(r.component_acc[1] == 1.0);  // still instagram.any_new_photo_by_you
    CHECK(r.positional_acc == 0.75);
  }

  TEST_CASE("a short sequence still earns credit for aligned slots") {
    // Three correct tokens, nothing emitted for the fourth slot.
    std::vector<std::string> trimmed = serialize_recipe(kGold).token_vector();
    trimmed.pop_back();
    EvalReport r = evaluate({pred_from(trimmed)}, {kGold});
    CHECK(r.sequence_acc == 0.0);
    CHECK(r.positional_acc == 0.75);
    CHECK(r.error_distribution[1] == 1.0);  // not exact -> at least one error
  }

  TEST_CASE("overlong sequences are never exact even with perfect slots") {
    std::vector<std::string> longer = serialize_recipe(kGold).token_vector();
    longer.push_back("extra");
    EvalReport r = evaluate({pred_from(longer)}, {kGold});
    CHECK(r.sequence_acc == 0.0);
    CHECK(r.positional_acc == 1.0);
    CHECK(r.error_distribution[0] == 0.0);
    CHECK(r.error_distribution[1] == 1.0);
  }

  TEST_CASE("the 0.75 / 1.0 pair example") {
    Recipe other{"weather", "tomorrows_forecast_calls_for", "sms", "send_me_an_sms"};
    std::vector<std::string> half_right = serialize_recipe(other).token_vector();
    half_right[2] = "gmail";
    half_right[3] = "gmail.send_an_email";
    std::vector<Prediction> preds = {pred_from(serialize_recipe(kGold).token_vector()),
                                     pred_from(half_right)};
    std::vector<Recipe> refs = {kGold, other};
    EvalReport r = evaluate(preds, refs);
    CHECK(r.sequence_acc == 0.5);
    CHECK(r.positional_acc == 0.75);  // (4 + 2) / 8
    CHECK(r.error_distribution[0] == 0.5);
    CHECK(r.error_distribution[2] == 0.5);
  }

  TEST_CASE("corrupting exactly k slots lands in error bin k") {
    Rng rng(99);
    for (std::size_t k = 0; k <= 4; ++k) {
      std::vector<std::string> tokens = serialize_recipe(kGold).token_vector();
      std::vector<std::size_t> order = {0, 1, 2, 3};
      rng.shuffle(order);
      for (std::size_t i = 0; i < k; ++i) tokens[order[i]] += "_corrupt";
      EvalReport r = evaluate({pred_from(tokens)}, {kGold});
      CHECK(r.error_distribution[k] == 1.0);
    }
  }

  TEST_CASE("reports are invariant under pair reordering") {
    Rng rng(123);
    std::vector<Prediction> preds;
    std::vector<Recipe> refs;
    for (int i = 0; i < 30; ++i) {
      std::vector<std::string> tokens = serialize_recipe(kGold).token_vector();
      if (rng.uniform() < 0.5) tokens[rng.index(4)] += "_x";
      if (rng.uniform() < 0.2) tokens.pop_back();
      preds.push_back(pred_from(tokens));
      refs.push_back(kGold);
    }
    EvalReport a = evaluate(preds, refs);

    std::vector<std::size_t> order(preds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<Prediction> preds2;
    std::vector<Recipe> refs2;
    for (std::size_t i : order) {
      preds2.push_back(preds[i]);
      refs2.push_back(refs[i]);
    }
    EvalReport b = evaluate(preds2, refs2);
    CHECK(a.sequence_acc == b.sequence_acc);
    CHECK(a.positional_acc == b.positional_acc);
    for (int s = 0; s < 4; ++s) CHECK(a.component_acc[s] == b.component_acc[s]);
    for (int e = 0; e < 5; ++e) CHECK(a.error_distribution[e] == b.error_distribution[e]);
  }

  TEST_CASE("randomized corpora match the slot-by-slot oracle bitwise") {
    Rng rng(777);
    const std::vector<std::string> channels = {"gmail", "sms", "feed", "hue", "dropbox"};
    const std::vector<std::string> functions = {"new_email", "send", "new_item", "toggle"};

    std::vector<std::vector<std::string>> pred_tokens;
    std::vector<Prediction> preds;
    std::vector<Recipe> refs;
    for (int i = 0; i < 500; ++i) {
      Recipe ref{channels[rng.index(channels.size())], functions[rng.index(functions.size())],
                 channels[rng.index(channels.size())], functions[rng.index(functions.size())]};
      std::vector<std::string> tokens = serialize_recipe(ref).token_vector();
      // Corrupt, shorten, or lengthen at random.
      for (std::size_t s = 0; s < 4; ++s) {
        if (rng.uniform() < 0.3) tokens[s] = channels[rng.index(channels.size())];
      }
      const double roll = rng.uniform();
      if (roll < 0.15) {
        tokens.resize(rng.index(4));
      } else if (roll < 0.25) {
        tokens.push_back("junk");
      }
      pred_tokens.push_back(tokens);
      preds.push_back(pred_from(tokens));
      refs.push_back(ref);
    }

    EvalReport lib = evaluate(preds, refs);
    EvalReport ora = oracle(pred_tokens, refs);
    CHECK(lib.n == ora.n);
    CHECK(lib.sequence_acc == ora.sequence_acc);
    CHECK(lib.positional_acc == ora.positional_acc);
    for (int s = 0; s < 4; ++s) CHECK(lib.component_acc[s] == ora.component_acc[s]);
    for (int e = 0; e < 5; ++e) CHECK(lib.error_distribution[e] == ora.error_distribution[e]);

    // Cross-metric identities hold exactly on the same run.
    double bin_sum = 0.0;
    for (double b : lib.error_distribution) bin_sum += b;
    CHECK(bin_sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(lib.error_distribution[0] == lib.sequence_acc);
    double comp_mean =
        (lib.component_acc[0] + lib.component_acc[1] + lib.component_acc[2] + lib.component_acc[3]) /
        4.0;
    CHECK(lib.positional_acc == doctest::Approx(comp_mean).epsilon(1e-12));
    CHECK(lib.sequence_acc <= lib.positional_acc);
  }

  TEST_CASE("single-metric entry points agree with the full report") {
    std::vector<std::string> tokens = serialize_recipe(kGold).token_vector();
    tokens[2] = "gmail";
    std::vector<Prediction> preds = {pred_from(tokens)};
    std::vector<Recipe> refs = {kGold};
    EvalReport r = evaluate(preds, refs);
    CHECK(sequence_accuracy(preds, refs) == r.sequence_acc);
    CHECK(positional_accuracy(preds, refs) == r.positional_acc);
    CHECK(component_accuracy(preds, refs, SlotRole::action_channel) == r.component_acc[2]);
    CHECK(component_accuracy(preds, refs, "action_channel") == r.component_acc[2]);
    CHECK(component_accuracy(preds, refs, "trigger_function") == r.component_acc[1]);
    CHECK(error_distribution(preds, refs)[1] == r.error_distribution[1]);
    CHECK_THROWS_AS(component_accuracy(preds, refs, "bogus_slot"), ValidationError);
  }

  TEST_CASE("evaluate_tokens mirrors evaluate") {
    std::vector<std::vector<std::string>> tokens = {
        serialize_recipe(kGold).token_vector(),
        {"instagram", "instagram.any_new_photo_by_you", "dropbox"},
    };
    std::vector<Prediction> preds = {pred_from(tokens[0]), pred_from(tokens[1])};
    std::vector<Recipe> refs = {kGold, kGold};
    std::vector<std::array<std::string, 4>> ref_slots = {reference_slots(kGold),
                                                         reference_slots(kGold)};
    EvalReport a = evaluate(preds, refs);
    EvalReport b = evaluate_tokens(tokens, ref_slots);
    CHECK(a.sequence_acc == b.sequence_acc);
    CHECK(a.positional_acc == b.positional_acc);
    for (int e = 0; e < 5; ++e) CHECK(a.error_distribution[e] == b.error_distribution[e]);
  }

  TEST_CASE("size mismatches and empty inputs are rejected") {
    std::vector<Prediction> preds = {pred_from(serialize_recipe(kGold).token_vector())};
    std::vector<Recipe> refs = {kGold, kGold};
    CHECK_THROWS_AS(evaluate(preds, refs), ValidationError);
    CHECK_THROWS_AS(evaluate({}, {}), ValidationError);
  }

  TEST_CASE("report serializations include every metric") {
    EvalReport r = evaluate({pred_from(serialize_recipe(kGold).token_vector())}, {kGold});
    std::string j = eval_report_json(r);
    CHECK(j.find("\"sequence_acc\"") != std::string::npos);
    CHECK(j.find("\"positional_acc\"") != std::string::npos);
    CHECK(j.find("\"trigger_channel\"") != std::string::npos);
    CHECK(j.find("\"error_distribution\"") != std::string::npos);

    std::string t = eval_report_table(r);
    CHECK(t.find("Sequence") != std::string::npos);
    CHECK(t.find("Action Function") != std::string::npos);
    CHECK(t.find("1.0000") != std::string::npos);
  }
}

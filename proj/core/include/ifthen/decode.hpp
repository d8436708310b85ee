#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ifthen/model.hpp"
#include "ifthen/recipe.hpp"

namespace ifthen {

struct DecodeResult {
  // Emitted target tokens in order; never contains BOS, EOS is excluded.
  std::vector<std::string> tokens;
  // Softmax probability of the chosen token at every step taken, including
  // the final EOS step when decoding stopped on EOS.
  std::vector<double> step_probabilities;
};

// Greedy argmax decoding (ties break toward the lowest token id; BOS is never
// emitted). The budget max_len counts the implicit BOS, so at most max_len-1
// tokens come out. Runs with dropout off and restores the model's train flag.
DecodeResult greedy_decode(SeqModel& model, const std::vector<int>& source_ids,
                           std::size_t max_len = 6);

// A scored model output: the raw sequence, its parse (or why it failed), the
// positional slot view that keeps malformed output scorable, and the chosen
// token probabilities.
struct Prediction {
  std::string id;
  std::vector<std::string> raw;
  std::optional<Recipe> parsed;
  std::optional<Malformed> malformed;
  SlotAlignment slots;
  std::vector<double> step_probabilities;
};

Prediction prediction_from_tokens(std::vector<std::string> raw, std::string id = "",
                                  std::vector<double> step_probabilities = {});

// lowercase -> encode_source -> greedy_decode -> parse, with the slot-aligned
// fallback recorded when the parse fails. Throws ValidationError on empty
// text.
Prediction predict_recipe(SeqModel& model, const std::string& text, std::string id = "");

// {"id", "raw", "parsed" | "malformed", "slots", "step_probabilities"} on one
// line, the batch-prediction file format.
std::string prediction_to_json_line(const Prediction& p);

}  // namespace ifthen

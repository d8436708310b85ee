#include "ifthen/decode.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "ifthen/common.hpp"
#include "ifthen/corpus.hpp"

namespace ifthen {

namespace {

// Greedy pick over raw logits: softmax for the reported probability, argmax
// skipping BOS, ties to the lowest id.
std::pair<int, double> pick_token(std::span<const double> logits) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (static_cast<int>(i) == Specials::bos) continue;
    mx = std::max(mx, logits[i]);
  }
  int best = -1;
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    z += std::exp(logits[i] - mx);
    if (static_cast<int>(i) == Specials::bos) continue;
    if (best == -1 && logits[i] == mx) best = static_cast<int>(i);
  }
  return {best, std::exp(logits[static_cast<std::size_t>(best)] - mx) / z};
}

}  // namespace

DecodeResult greedy_decode(SeqModel& model, const std::vector<int>& source_ids,
                           std::size_t max_len) {
  if (max_len < 2) throw ValidationError("greedy_decode: max_len must allow BOS plus one token");
  const bool was_training = model.is_train();
  model.set_train(false);

  DecodeResult result;
  IdBatch source;
  source.batch = 1;
  source.len = source_ids.size();
  source.ids = source_ids;
  Encoded enc = model.encode(source);
  auto state = model.init_state(enc);

  int prev = Specials::bos;
  for (std::size_t emitted = 0; emitted + 1 < max_len; ++emitted) {
    Tensor logits = model.decode_step(prev, *state, enc);
    auto [token_id, prob] = pick_token(logits.value());
    result.step_probabilities.push_back(prob);
    if (token_id == Specials::eos) break;
    result.tokens.push_back(model.target_vocab().token(token_id));
    prev = token_id;
  }

  model.set_train(was_training);
  return result;
}

Prediction prediction_from_tokens(std::vector<std::string> raw, std::string id,
                                  std::vector<double> step_probabilities) {
  Prediction p;
  p.id = std::move(id);
  p.raw = std::move(raw);
  p.step_probabilities = std::move(step_probabilities);
  p.slots = slot_align(p.raw);
  ParseResult parsed = parse_sequence(p.raw);
  if (const Recipe* r = parse_recipe(parsed)) {
    p.parsed = *r;
  } else {
    p.malformed = *parse_error(parsed);
  }
  return p;
}

Prediction predict_recipe(SeqModel& model, const std::string& text, std::string id) {
  if (whitespace_tokens(text).empty()) {
    throw ValidationError("predict_recipe: text is empty");
  }
  const std::vector<int> source_ids =
      encode_source(ascii_lower(text), model.source_vocab(), model.max_source_len());
  DecodeResult decoded = greedy_decode(model, source_ids);
  return prediction_from_tokens(std::move(decoded.tokens), std::move(id),
                                std::move(decoded.step_probabilities));
}

std::string prediction_to_json_line(const Prediction& p) {
  nlohmann::ordered_json j;
  j["id"] = p.id;
  j["raw"] = join_tokens(p.raw);
  if (p.parsed) {
    j["parsed"] = {
        {"trigger_channel", p.parsed->trigger_channel},
        {"trigger_function", p.parsed->trigger_function},
        {"action_channel", p.parsed->action_channel},
        {"action_function", p.parsed->action_function},
    };
  } else {
    j["malformed"] = p.malformed->detail;
  }
  nlohmann::ordered_json slots = nlohmann::ordered_json::array();
  for (const auto& s : p.slots) {
    slots.push_back(s ? nlohmann::ordered_json(*s) : nlohmann::ordered_json(nullptr));
  }
  j["slots"] = std::move(slots);
  j["step_probabilities"] = p.step_probabilities;
  return j.dump();
}

}  // namespace ifthen

#include "ifthen/recipe.hpp"

#include "ifthen/common.hpp"

namespace ifthen {

std::string normalize_name(const std::string& raw) {
  const std::vector<std::string> parts = whitespace_tokens(raw);
  if (parts.empty()) {
    throw ValidationError("name is empty after trimming whitespace: '" + raw + "'");
  }
  return ascii_lower(join_tokens(parts, "_"));
}

Recipe Recipe::normalized() const {
  return Recipe{
      normalize_name(trigger_channel),
      normalize_name(trigger_function),
      normalize_name(action_channel),
      normalize_name(action_function),
  };
}

std::string RecipeSequence::text() const {
  return tokens[0] + " " + tokens[1] + " " + tokens[2] + " " + tokens[3];
}

std::vector<std::string> RecipeSequence::token_vector() const {
  return {tokens[0], tokens[1], tokens[2], tokens[3]};
}

RecipeSequence serialize_recipe(const Recipe& r) {
  const Recipe n = r.normalized();
  return RecipeSequence{{
      n.trigger_channel,
      n.trigger_channel + "." + n.trigger_function,
      n.action_channel,
      n.action_channel + "." + n.action_function,
  }};
}

std::string recipe_to_text(const Recipe& r) { return serialize_recipe(r).text(); }

namespace {

// token must be channel + "." + function; the channel prefix is matched
// whole, so dots inside the function name survive the round trip.
std::optional<std::string> strip_qualifier(const std::string& token, const std::string& channel) {
  if (token.size() <= channel.size() + 1) return std::nullopt;
  if (token.compare(0, channel.size(), channel) != 0) return std::nullopt;
  if (token[channel.size()] != '.') return std::nullopt;
  return token.substr(channel.size() + 1);
}

}  // namespace

ParseResult parse_sequence(const std::vector<std::string>& tokens) {
  if (tokens.size() != 4) {
    const std::size_t pos = std::min<std::size_t>(tokens.size(), 4);
    return Malformed{MalformedKind::length, pos,
                     "expected 4 tokens, got " + std::to_string(tokens.size())};
  }
  auto trigger_fn = strip_qualifier(tokens[1], tokens[0]);
  if (!trigger_fn) {
    return Malformed{MalformedKind::qualifier, 1,
                     "token '" + tokens[1] + "' is not qualified by channel '" + tokens[0] + "'"};
  }
  auto action_fn = strip_qualifier(tokens[3], tokens[2]);
  if (!action_fn) {
    return Malformed{MalformedKind::qualifier, 3,
                     "token '" + tokens[3] + "' is not qualified by channel '" + tokens[2] + "'"};
  }
  return Recipe{tokens[0], *trigger_fn, tokens[2], *action_fn};
}

bool parse_ok(const ParseResult& r) { return std::holds_alternative<Recipe>(r); }

const Recipe* parse_recipe(const ParseResult& r) { return std::get_if<Recipe>(&r); }

const Malformed* parse_error(const ParseResult& r) { return std::get_if<Malformed>(&r); }

SlotAlignment slot_align(const std::vector<std::string>& tokens) {
  SlotAlignment slots;
  for (std::size_t i = 0; i < tokens.size() && i < 4; ++i) slots[i] = tokens[i];
  return slots;
}

std::array<std::string, 4> reference_slots(const Recipe& r) {
  return serialize_recipe(r).tokens;
}

}  // namespace ifthen

#pragma once

#include <array>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace ifthen {

// A four-part If-Then automation program. Zapier's Event/Action naming maps
// onto the same trigger/action roles.
struct Recipe {
  std::string trigger_channel;
  std::string trigger_function;
  std::string action_channel;
  std::string action_function;

  // Applies normalize_name to all four fields.
  Recipe normalized() const;

  bool operator==(const Recipe&) const = default;
};

enum class SlotRole {
  trigger_channel = 0,
  trigger_function = 1,
  action_channel = 2,
  action_function = 3,
};

inline constexpr std::array<const char*, 4> kSlotNames = {
    "trigger_channel", "trigger_function", "action_channel", "action_function"};

// Lowercases ASCII letters and collapses internal whitespace runs to single
// underscores. Non-ASCII bytes pass through untouched. Idempotent.
// Throws ValidationError when the input is empty after trimming.
std::string normalize_name(const std::string& raw);

// The flat token form the models emit: trigger channel, channel-qualified
// trigger function, action channel, channel-qualified action function.
struct RecipeSequence {
  std::array<std::string, 4> tokens;

  std::string text() const;  // tokens joined by single spaces
  std::vector<std::string> token_vector() const;
};

RecipeSequence serialize_recipe(const Recipe& r);

// Serialized reference string, e.g.
// "ny_times ny_times.new_article_posted twitter twitter.new_post".
std::string recipe_to_text(const Recipe& r);

enum class MalformedKind { length, qualifier };

struct Malformed {
  MalformedKind kind;
  std::size_t position;  // offending token index (length: first missing/extra)
  std::string detail;

  bool operator==(const Malformed&) const = default;
};

using ParseResult = std::variant<Recipe, Malformed>;

// Inverse of serialize_recipe. Qualified tokens must start with their channel
// token plus "."; the remainder (which may itself contain dots) is the
// function name.
ParseResult parse_sequence(const std::vector<std::string>& tokens);

bool parse_ok(const ParseResult& r);
const Recipe* parse_recipe(const ParseResult& r);
const Malformed* parse_error(const ParseResult& r);

// Positional view of an arbitrary token sequence: token i lands in slot i for
// i < 4, everything else is dropped. Total; never fails.
using SlotAlignment = std::array<std::optional<std::string>, 4>;
SlotAlignment slot_align(const std::vector<std::string>& tokens);

// Reference slot tokens for scoring: channel, qualified function, channel,
// qualified function.
std::array<std::string, 4> reference_slots(const Recipe& r);

}  // namespace ifthen

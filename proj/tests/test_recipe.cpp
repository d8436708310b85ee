#include <doctest.h>

#include <string>
#include <vector>

#include "ifthen/common.hpp"
#include "ifthen/recipe.hpp"
#include "ifthen/rng.hpp"

using namespace ifthen;

TEST_SUITE("recipe") {
  TEST_CASE("normalize_name lowercases and collapses whitespace") {
    CHECK(normalize_name("NY Times") == "ny_times");
    CHECK(normalize_name("  Philips   Hue  ") == "philips_hue");
    CHECK(normalize_name("already_normal") == "already_normal");
    CHECK(normalize_name("Tab\tand\nnewline") == "tab_and_newline");
    CHECK(normalize_name("MiXeD") == "mixed");
    CHECK_THROWS_AS(normalize_name("   "), ValidationError);
    CHECK_THROWS_AS(normalize_name(""), ValidationError);
  }

  TEST_CASE("normalize_name is idempotent") {
    for (const char* raw : {"NY Times", "a  b   c", "Do Something", "x"}) {
      std::string once = normalize_name(raw);
      CHECK(normalize_name(once) == once);
    }
  }

  TEST_CASE("serialize_recipe qualifies functions with their channel") {
    Recipe r{"ny_times", "new_article_posted", "twitter", "post_a_tweet"};
    RecipeSequence s = serialize_recipe(r);
    CHECK(s.tokens[0] == "ny_times");
    CHECK(s.tokens[1] == "ny_times.new_article_posted");
    CHECK(s.tokens[2] == "twitter");
    CHECK(s.tokens[3] == "twitter.post_a_tweet");
    CHECK(recipe_to_text(r) == "ny_times ny_times.new_article_posted twitter twitter.post_a_tweet");
  }

  TEST_CASE("parse_sequence inverts serialize_recipe") {
    Recipe r{"weather", "tomorrows_forecast_calls_for", "sms", "send_me_an_sms"};
    ParseResult back = parse_sequence(serialize_recipe(r).token_vector());
    REQUIRE(parse_ok(back));
    CHECK(*parse_recipe(back) == r);
  }

  TEST_CASE("round trip holds for randomized recipes") {
    Rng rng(20240917);
    const std::vector<std::string> pieces = {"alpha", "beta_x", "gamma.dotted", "delta2",
                                             "epsilon_long_name", "z"};
    for (int i = 0; i < 500; ++i) {
      Recipe r{pieces[rng.index(pieces.size())], pieces[rng.index(pieces.size())],
               pieces[rng.index(pieces.size())], pieces[rng.index(pieces.size())]};
      ParseResult back = parse_sequence(serialize_recipe(r).token_vector());
      REQUIRE(parse_ok(back));
      CHECK(*parse_recipe(back) == r);
    }
  }

  TEST_CASE("function names containing dots survive the round trip") {
    Recipe r{"chan", "fn.with.dots", "other", "plain"};
    RecipeSequence s = serialize_recipe(r);
    CHECK(s.tokens[1] == "chan.fn.with.dots");
    ParseResult back = parse_sequence(s.token_vector());
    REQUIRE(parse_ok(back));
    CHECK(parse_recipe(back)->trigger_function == "fn.with.dots");
  }

  TEST_CASE("parse_sequence flags wrong lengths") {
    ParseResult three = parse_sequence({"a", "a.b", "c"});
    REQUIRE(!parse_ok(three));
    CHECK(parse_error(three)->kind == MalformedKind::length);
    CHECK(parse_error(three)->position == 3);

    ParseResult five = parse_sequence({"a", "a.b", "c", "c.d", "extra"});
    REQUIRE(!parse_ok(five));
    CHECK(parse_error(five)->kind == MalformedKind::length);

    ParseResult empty = parse_sequence({});
    REQUIRE(!parse_ok(empty));
    CHECK(parse_error(empty)->kind == MalformedKind::length);
  }

  TEST_CASE("parse_sequence flags unqualified or misqualified functions") {
    ParseResult wrong_prefix = parse_sequence({"a", "b.c", "d", "d.e"});
    REQUIRE(!parse_ok(wrong_prefix));
    CHECK(parse_error(wrong_prefix)->kind == MalformedKind::qualifier);
    CHECK(parse_error(wrong_prefix)->position == 1);

    ParseResult no_dot = parse_sequence({"a", "ab", "d", "d.e"});
    REQUIRE(!parse_ok(no_dot));
    CHECK(parse_error(no_dot)->kind == MalformedKind::qualifier);

    ParseResult action_side = parse_sequence({"a", "a.b", "d", "x.e"});
    REQUIRE(!parse_ok(action_side));
    CHECK(parse_error(action_side)->kind == MalformedKind::qualifier);
    CHECK(parse_error(action_side)->position == 3);

    // "a." has the right prefix but an empty function name.
    ParseResult empty_fn = parse_sequence({"a", "a.", "d", "d.e"});
    REQUIRE(!parse_ok(empty_fn));
    CHECK(parse_error(empty_fn)->kind == MalformedKind::qualifier);
  }

  TEST_CASE("slot_align is total over arbitrary sequences") {
    SlotAlignment a = slot_align({"x", "y"});
    CHECK(a[0] == "x");
    CHECK(a[1] == "y");
    CHECK(!a[2].has_value());
    CHECK(!a[3].has_value());

    SlotAlignment b = slot_align({"1", "2", "3", "4", "5", "6"});
    CHECK(b[3] == "4");

    SlotAlignment c = slot_align({});
    for (const auto& slot : c) CHECK(!slot.has_value());
  }

  TEST_CASE("reference_slots matches the serialized form") {
    Recipe r{"instagram", "any_new_photo_by_you", "dropbox", "add_file_from_url"};
    auto slots = reference_slots(r);
    CHECK(slots[0] == "instagram");
    CHECK(slots[1] == "instagram.any_new_photo_by_you");
    CHECK(slots[2] == "dropbox");
    CHECK(slots[3] == "dropbox.add_file_from_url");
  }
}

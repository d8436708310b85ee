#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ifthen/common.hpp"
#include "ifthen/corpus.hpp"
#include "test_support.hpp"

using namespace ifthen;
using testsupport::TempDir;

namespace {

Example make_example(std::string id, std::string title) {
  Example e;
  e.id = std::move(id);
  e.title = std::move(title);
  e.recipe = Recipe{"gmail", "new_email", "sms", "send_me_an_sms"};
  return e;
}

std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("corpus") {
  TEST_CASE("dataset save/load round trip is byte stable") {
    TempDir dir("corpus");
    std::vector<Example> examples;
    Example a = make_example("1", "Email me when it rains");
    a.description = "A weather alert.";
    Example b = make_example("2", "Text me the news");
    b.annotations = std::vector<Recipe>{Recipe{"gmail", "new_email", "sms", "send_me_an_sms"},
                                        Recipe{"feed", "new_feed_item", "sms", "send_me_an_sms"}};
    examples.push_back(a);
    examples.push_back(b);

    const auto path1 = dir.path() / "a.jsonl";
    const auto path2 = dir.path() / "b.jsonl";
    save_dataset(path1, examples);
    DatasetLoad loaded = load_dataset(path1);
    REQUIRE(loaded.examples.size() == 2);
    CHECK(loaded.examples[0].description == "A weather alert.");
    REQUIRE(loaded.examples[1].annotations.has_value());
    CHECK(loaded.examples[1].annotations->size() == 2);

    save_dataset(path2, loaded.examples);
    CHECK(read_all(path1) == read_all(path2));
  }

  TEST_CASE("strict loading reports the offending line; lenient skips it") {
    TempDir dir("corpus");
    const auto path = dir.path() / "broken.jsonl";
    std::ofstream out(path);
    out << example_to_json_line(make_example("1", "Email me when it rains")) << "\n";
    out << "{not json}\n";
    out << example_to_json_line(make_example("2", "Text me the news")) << "\n";
    out.close();

    CHECK_THROWS_WITH_AS(load_dataset(path, LoadMode::strict),
                         doctest::Contains("line 2"), ValidationError);
    DatasetLoad lenient = load_dataset(path, LoadMode::lenient);
    CHECK(lenient.examples.size() == 2);
    CHECK(lenient.skipped_lines == 1);
  }

  TEST_CASE("loading a missing file is an IO error") {
    CHECK_THROWS_AS(load_dataset("/nonexistent/nope.jsonl"), IoError);
  }

  TEST_CASE("recipes are normalized on load") {
    TempDir dir("corpus");
    const auto path = dir.path() / "raw.jsonl";
    std::ofstream out(path);
    out << R"({"id":"1","title":"Email me when it rains maybe","trigger_channel":"NY Times",)"
        << R"("trigger_function":"New Article","action_channel":"SMS","action_function":"Send SMS"})"
        << "\n";
    out.close();
    DatasetLoad loaded = load_dataset(path);
    REQUIRE(loaded.examples.size() == 1);
    CHECK(loaded.examples[0].recipe.trigger_channel == "ny_times");
    CHECK(loaded.examples[0].recipe.trigger_function == "new_article");
    CHECK(loaded.examples[0].recipe.action_function == "send_sms");
  }

  TEST_CASE("clean_examples removes short titles first, then non-English ones") {
    std::vector<Example> examples = {
        make_example("1", "two words"),
        make_example("2", "Email me when it rains"),
        make_example("3", "если пойдет дождь пришли смс"),
        make_example("4", "guarda le mie foto qui"),
    };
    CleanFilters filters;
    filters.english_only = true;
    CleanResult r = clean_examples(examples, filters);
    REQUIRE(r.kept.size() == 1);
    CHECK(r.kept[0].id == "2");
    CHECK(r.report.original == 4);
    CHECK(r.report.kept == 1);
    CHECK(r.report.removed_by_filter.at("title_too_short") == 1);
    CHECK(r.report.removed_by_filter.at("non_english") == 2);
    CHECK(r.report.removed_total() == 3);
    CHECK(r.report.percent_removed() == doctest::Approx(75.0));
  }

  TEST_CASE("agreement pruning keeps examples with enough matching annotators") {
    Recipe gold{"gmail", "new_email", "sms", "send_me_an_sms"};
    Recipe other{"feed", "new_feed_item", "sms", "send_me_an_sms"};

    Example agree = make_example("1", "Email me when it rains");
    agree.annotations = std::vector<Recipe>{gold, gold, gold, other, other};
    Example disagree = make_example("2", "Text me the news today");
    disagree.annotations = std::vector<Recipe>{gold, other, other, other, other};
    Example unannotated = make_example("3", "Text me the news tomorrow");

    CleanFilters filters;
    filters.min_agreement = 3;
    CleanResult r = clean_examples({agree, disagree, unannotated}, filters);
    REQUIRE(r.kept.size() == 1);
    CHECK(r.kept[0].id == "1");
    CHECK(r.report.removed_by_filter.at("low_agreement") == 1);
    CHECK(r.report.removed_by_filter.at("missing_annotations") == 1);
  }

  TEST_CASE("looks_english requires mostly ASCII plus a stopword") {
    CHECK(looks_english("Email me when it rains"));
    CHECK(!looks_english("если дождь пришли смс"));       // non-ASCII
    CHECK(!looks_english("guarda mie foto qui subito"));  // ASCII but no English stopword
    CHECK(english_stopwords().size() == 200);
  }

  TEST_CASE("build_source_text lowercases and splices the description") {
    Example e = make_example("1", "Email ME Now");
    CHECK(build_source_text(e, false) == "email me now");
    CHECK(build_source_text(e, true) == "email me now");  // no description present
    e.description = "With DETAILS";
    CHECK(build_source_text(e, false) == "email me now");
    CHECK(build_source_text(e, true) == std::string("email me now ") + kSepToken + " with details");
    e.description = "   ";
    CHECK(build_source_text(e, true) == "email me now");  // blank description ignored
  }

  TEST_CASE("vocabulary reserves the special ids") {
    Vocabulary v;
    CHECK(v.size() == Specials::count);
    CHECK(v.id(kPadToken) == Specials::pad);
    CHECK(v.id(kUnkToken) == Specials::unk);
    CHECK(v.id(kBosToken) == Specials::bos);
    CHECK(v.id(kEosToken) == Specials::eos);
    CHECK(v.id(kSepToken) == Specials::sep);
    CHECK(v.id("anything_else") == Specials::unk);
  }

  TEST_CASE("build_vocabulary orders by frequency with first-seen tie break") {
    Vocabulary v = build_vocabulary({"b a", "a c b", "a"});
    // a:3 b:2 c:1
    CHECK(v.id("a") == static_cast<int>(Specials::count));
    CHECK(v.id("b") == static_cast<int>(Specials::count) + 1);
    CHECK(v.id("c") == static_cast<int>(Specials::count) + 2);
    CHECK(v.frequency("a") == 3);

    Vocabulary tie = build_vocabulary({"y x", "x y"});  // equal counts; y seen first
    CHECK(tie.id("y") < tie.id("x"));
  }

  TEST_CASE("vocabulary caps keep the most frequent tokens") {
    Vocabulary v = build_vocabulary({"a a a b b c"}, 2);
    CHECK(v.size() == Specials::count + 2);
    CHECK(v.contains("a"));
    CHECK(v.contains("b"));
    CHECK(!v.contains("c"));
    CHECK(v.id("c") == Specials::unk);

    Vocabulary full = build_vocabulary({"a a a b b c"});
    Vocabulary capped = full.capped(2);
    CHECK(capped.size() == Specials::count + 2);
    CHECK(capped.contains("a"));
    CHECK(!capped.contains("c"));
    // Capping to a size not smaller than the vocabulary changes nothing.
    CHECK(full.capped(10).size() == full.size());
  }

  TEST_CASE("special surface forms in text are not duplicated") {
    Vocabulary v = build_vocabulary({std::string("alpha ") + kSepToken + " beta"});
    CHECK(v.id(kSepToken) == Specials::sep);
    CHECK(v.size() == Specials::count + 2);
  }

  TEST_CASE("vocabulary save/load round trip preserves ids and hash") {
    TempDir dir("vocab");
    Vocabulary v = build_vocabulary({"alpha beta beta gamma"});
    const auto path = dir.path() / "v.tsv";
    v.save(path);
    Vocabulary back = Vocabulary::load(path);
    CHECK(back.size() == v.size());
    CHECK(back.id("beta") == v.id("beta"));
    CHECK(back.hash() == v.hash());
    CHECK(back.to_text() == v.to_text());

    Vocabulary capped = Vocabulary::load(path, 1);
    CHECK(capped.size() == Specials::count + 1);
    CHECK(capped.hash() != v.hash());
  }

  TEST_CASE("from_text rejects tampered specials") {
    Vocabulary v = build_vocabulary({"alpha beta"});
    std::string text = v.to_text();
    std::string bad = text;
    bad.replace(bad.find("<pad>"), 5, "<PAD>");
    CHECK_THROWS_AS(Vocabulary::from_text(bad), ValidationError);
    CHECK_THROWS_AS(Vocabulary::from_text(""), ValidationError);
  }

  TEST_CASE("encode_source pads at the tail and truncates at the head side") {
    Vocabulary v = build_vocabulary({"send me mail now"});
    std::vector<int> ids = encode_source("send unknown mail", v, 5);
    REQUIRE(ids.size() == 5);
    CHECK(ids[0] == v.id("send"));
    CHECK(ids[1] == Specials::unk);
    CHECK(ids[2] == v.id("mail"));
    CHECK(ids[3] == Specials::pad);
    CHECK(ids[4] == Specials::pad);

    std::vector<int> truncated = encode_source("send me mail now send", v, 3);
    REQUIRE(truncated.size() == 3);
    CHECK(truncated[0] == v.id("send"));
    CHECK(truncated[2] == v.id("mail"));
  }

  TEST_CASE("encode_target wraps the four slot tokens in BOS/EOS") {
    Recipe r{"gmail", "new_email", "sms", "send_me_an_sms"};
    Vocabulary tgt = build_vocabulary({recipe_to_text(r)});
    std::vector<int> ids = encode_target(r, tgt);
    REQUIRE(ids.size() == 6);
    CHECK(ids[0] == Specials::bos);
    CHECK(ids[1] == tgt.id("gmail"));
    CHECK(ids[2] == tgt.id("gmail.new_email"));
    CHECK(ids[3] == tgt.id("sms"));
    CHECK(ids[4] == tgt.id("sms.send_me_an_sms"));
    CHECK(ids[5] == Specials::eos);
  }

  TEST_CASE("encode_pair combines source and target encodings") {
    Example e = make_example("1", "Email me when it rains");
    Vocabulary src = build_vocabulary({build_source_text(e, false)});
    Vocabulary tgt = build_vocabulary({recipe_to_text(e.recipe)});
    EncodedPair p = encode_pair(e, src, tgt, 8, false);
    CHECK(p.source_ids.size() == 8);
    CHECK(p.target_ids.size() == 6);
    CHECK(p.source_ids[0] == src.id("email"));
  }

  TEST_CASE("split_validation is deterministic and order preserving") {
    std::vector<Example> examples;
    for (int i = 0; i < 20; ++i) {
      examples.push_back(make_example(std::to_string(i), "title number " + std::to_string(i)));
    }
    Split a = split_validation(examples, SplitSpec::count(5), 42);
    Split b = split_validation(examples, SplitSpec::count(5), 42);
    CHECK(a.train.size() == 15);
    CHECK(a.valid.size() == 5);
    REQUIRE(a.valid.size() == b.valid.size());
    for (std::size_t i = 0; i < a.valid.size(); ++i) CHECK(a.valid[i].id == b.valid[i].id);

    Split c = split_validation(examples, SplitSpec::count(5), 43);
    bool same = true;
    for (std::size_t i = 0; i < a.valid.size(); ++i) same = same && a.valid[i].id == c.valid[i].id;
    CHECK(!same);

    // Both halves keep the original relative order.
    auto ordered = [](const std::vector<Example>& v) {
      for (std::size_t i = 1; i < v.size(); ++i) {
        if (std::stoi(v[i - 1].id) > std::stoi(v[i].id)) return false;
      }
      return true;
    };
    CHECK(ordered(a.train));
    CHECK(ordered(a.valid));

    // No element lost or duplicated.
    std::set<std::string> ids;
    for (const Example& e : a.train) ids.insert(e.id);
    for (const Example& e : a.valid) ids.insert(e.id);
    CHECK(ids.size() == 20);
  }

  TEST_CASE("split_validation by fraction") {
    std::vector<Example> examples;
    for (int i = 0; i < 10; ++i) {
      examples.push_back(make_example(std::to_string(i), "title number " + std::to_string(i)));
    }
    Split s = split_validation(examples, SplitSpec::fraction(0.2), 1);
    CHECK(s.valid.size() == 2);
    CHECK(s.train.size() == 8);
    CHECK_THROWS_AS(split_validation(examples, SplitSpec::fraction(1.5), 1), ValidationError);
    CHECK_THROWS_AS(split_validation(examples, SplitSpec::count(11), 1), ValidationError);
  }
}

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "ifthen/checkpoint.hpp"
#include "ifthen/common.hpp"
#include "ifthen/corpus.hpp"
#include "ifthen/model.hpp"
#include "ifthen/train.hpp"

#include "test_support.hpp"

using namespace ifthen;
using namespace ifthen::testsupport;

namespace {

constexpr std::size_t kSourceLen = 14;

LstmEncDecConfig small_lstm() {
  LstmEncDecConfig cfg;
  cfg.embedding_size = 12;
  cfg.hidden_size = 24;
  cfg.dropout = 0.0;
  cfg.max_source_len = kSourceLen;
  return cfg;
}

struct TrainFixture {
  EncodedCorpus corpus;
  std::vector<EncodedPair> train;
  std::vector<EncodedPair> valid;

  explicit TrainFixture(std::size_t channels = 4, std::size_t functions = 3,
                        std::size_t examples = 36, std::uint64_t seed = 11) {
    SyntheticSpec spec;
    spec.channels = channels;
    spec.functions = functions;
    spec.examples = examples;
    spec.seed = seed;
    std::vector<Example> all = synthetic_corpus(spec);
    corpus = encode_corpus(all, {all}, kSourceLen);
    train = corpus.sets[0];
    valid = std::vector<EncodedPair>(train.begin(), train.begin() + 8);
  }

  std::unique_ptr<SeqModel> model(std::uint64_t seed = 5) const {
    return make_model(small_lstm(), corpus.source, corpus.target, seed);
  }
};

std::string history_fingerprint(const TrainHistory& h) {
  std::string out;
  for (const ValidationRecord& r : h.records) {
    out += validation_record_json(r);
    out += '\n';
  }
  return out;
}

std::vector<char> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_bytes(const std::filesystem::path& p, const std::vector<char>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  REQUIRE(out.good());
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("warmup-then-decay schedule hits its pinned values") {
    CHECK(std::abs(noam_lr(4000, 512, 1.0, 4000) - 6.9877e-4) <= 1e-8);
    CHECK(std::abs(noam_lr(1, 512, 1.0, 4000) - 1.7469e-7) <= 1e-11);

    // Linear rise to the peak at step == warmup, then 1/sqrt decay.
    const double peak = noam_lr(4000, 512, 1.0, 4000);
    CHECK(noam_lr(3999, 512, 1.0, 4000) < peak);
    CHECK(noam_lr(4001, 512, 1.0, 4000) < peak);
    for (std::size_t s = 1; s < 50; ++s) {
      CHECK(noam_lr(s, 512, 1.0, 4000) < noam_lr(s + 1, 512, 1.0, 4000));
    }
    CHECK(noam_lr(2000, 512, 1.0, 4000) ==
          doctest::Approx(2000.0 * noam_lr(1, 512, 1.0, 4000)).epsilon(1e-12));

    CHECK(noam_lr(100, 512, 2.5, 4000) ==
          doctest::Approx(2.5 * noam_lr(100, 512, 1.0, 4000)).epsilon(1e-12));
    CHECK_THROWS_AS(noam_lr(0, 512, 1.0, 4000), ValidationError);
  }

  TEST_CASE("step counting follows epochs, batches, and max_steps") {
    TrainFixture fx(/*channels=*/3, /*functions=*/2, /*examples=*/20);
    auto model = fx.model();

    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 8;  // 20 examples -> 3 batches per epoch
    cfg.validate_every_steps = 1000;
    cfg.seed = 1;

    TrainResult r = train(*model, fx.train, fx.valid, cfg);
    CHECK(r.steps == 6);
    REQUIRE(r.history.records.size() == 2);  // one per epoch end
    CHECK(r.history.records[0].step == 3);
    CHECK(r.history.records[1].step == 6);

    SUBCASE("max_steps cuts an epoch short") {
      auto m2 = fx.model();
      cfg.max_steps = 4;
      TrainResult r2 = train(*m2, fx.train, fx.valid, cfg);
      CHECK(r2.steps == 4);
      CHECK(r2.history.records.back().step == 4);
    }

    SUBCASE("periodic validation interleaves with epoch ends without duplicates") {
      auto m3 = fx.model();
      cfg.max_steps.reset();
      cfg.validate_every_steps = 2;
      TrainResult r3 = train(*m3, fx.train, fx.valid, cfg);
      std::vector<std::size_t> steps;
      for (const auto& rec : r3.history.records) steps.push_back(rec.step);
      CHECK(steps == std::vector<std::size_t>{2, 3, 4, 6});
    }
  }

  TEST_CASE("identical seeds reproduce training bitwise") {
    TrainFixture fx;
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.validate_every_steps = 5;
    cfg.seed = 42;

    auto a = fx.model(7);
    auto b = fx.model(7);
    TrainResult ra = train(*a, fx.train, fx.valid, cfg);
    TrainResult rb = train(*b, fx.train, fx.valid, cfg);

    CHECK(ra.steps == rb.steps);
    CHECK(history_fingerprint(ra.history) == history_fingerprint(rb.history));
    const auto& ea = a->params().entries();
    const auto& eb = b->params().entries();
    REQUIRE(ea.size() == eb.size());
    for (std::size_t i = 0; i < ea.size(); ++i) {
      auto va = ea[i].tensor.value();
      auto vb = eb[i].tensor.value();
      REQUIRE(va.size() == vb.size());
      for (std::size_t j = 0; j < va.size(); ++j) {
        if (va[j] != vb[j]) {
          CAPTURE(ea[i].name);
          REQUIRE(va[j] == vb[j]);
        }
      }
    }

    SUBCASE("a different shuffle seed takes a different path") {
      auto c = fx.model(7);
      cfg.seed = 43;
      TrainResult rc = train(*c, fx.train, fx.valid, cfg);
      CHECK(history_fingerprint(rc.history) != history_fingerprint(ra.history));
    }
  }

  TEST_CASE("loss falls on a memorizable corpus") {
    TrainFixture fx(/*channels=*/4, /*functions=*/3, /*examples=*/48, /*seed=*/3);
    auto model = fx.model();

    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.batch_size = 12;
    cfg.validate_every_steps = 1000;  // epoch ends only
    cfg.base_lr = 0.002;
    cfg.clip_norm = 5.0;
    cfg.seed = 9;

    TrainResult r = train(*model, fx.train, fx.valid, cfg);
    REQUIRE(r.history.records.size() >= 2);
    const ValidationRecord& first = r.history.records.front();
    const ValidationRecord& last = r.history.records.back();
    CHECK(last.train_loss < 0.8 * first.train_loss);
    CHECK(r.best_valid_loss <= first.valid_loss);
    CHECK(last.learning_rate == 0.002);
  }

  TEST_CASE("the best validation snapshot is restored and checkpointed") {
    TempDir dir("train-best");
    TrainFixture fx;
    auto model = fx.model();

    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.batch_size = 8;
    cfg.validate_every_steps = 7;
    cfg.seed = 21;
    cfg.checkpoint_dir = dir.path();

    TrainResult r = train(*model, fx.train, fx.valid, cfg);

    // One record must carry exactly the reported best pair.
    bool found = false;
    for (const auto& rec : r.history.records) {
      if (rec.step == r.best_step) {
        found = true;
        CHECK(rec.valid.sequence_acc == r.best_sequence_acc);
        CHECK(rec.valid_loss == r.best_valid_loss);
      }
    }
    CHECK(found);

    CheckpointData best = load_checkpoint(dir.path() / "best.ckpt");
    CHECK(best.step == r.best_step);
    CHECK(best.use_description == false);

    // The in-memory model was rolled back to the same parameters.
    const auto& em = model->params().entries();
    const auto& eb = best.model->params().entries();
    REQUIRE(em.size() == eb.size());
    for (std::size_t i = 0; i < em.size(); ++i) {
      auto vm = em[i].tensor.value();
      auto vb = eb[i].tensor.value();
      REQUIRE(vm.size() == vb.size());
      for (std::size_t j = 0; j < vm.size(); ++j) REQUIRE(vm[j] == vb[j]);
    }

    // History file holds one JSON line per record.
    std::ifstream hist(dir.path() / "history.jsonl");
    REQUIRE(hist.good());
    std::size_t lines = 0;
    std::string line;
    while (std::getline(hist, line)) {
      if (!line.empty()) {
        CHECK(line.front() == '{');
        ++lines;
      }
    }
    CHECK(lines == r.history.records.size());
  }

  TEST_CASE("training can stop early once validation is good enough") {
    TrainFixture fx(/*channels=*/3, /*functions=*/2, /*examples=*/24, /*seed=*/17);
    auto model = make_model(
        [] {
          LstmEncDecConfig cfg;
          cfg.embedding_size = 16;
          cfg.hidden_size = 48;
          cfg.dropout = 0.0;
          cfg.max_source_len = kSourceLen;
          return cfg;
        }(),
        fx.corpus.source, fx.corpus.target, 5);

    TrainConfig cfg;
    cfg.epochs = 300;
    cfg.batch_size = 8;
    cfg.validate_every_steps = 15;
    cfg.base_lr = 0.002;
    cfg.clip_norm = 5.0;
    cfg.target_sequence_acc = 0.95;
    cfg.seed = 2;

    std::vector<EncodedPair> whole = fx.train;
    TrainResult r = train(*model, whole, whole, cfg);
    CHECK(r.best_sequence_acc >= 0.95);
    CHECK(r.steps < 300 * 3);  // stopped well before the epoch budget
  }

  TEST_CASE("non-finite gradients abort the run with a named parameter") {
    TrainFixture fx(/*channels=*/3, /*functions=*/2, /*examples=*/16);
    auto model = fx.model();
    for (const NamedParam& p : model->params().entries()) {
      p.tensor.value_mut()[0] = std::numeric_limits<double>::quiet_NaN();
    }

    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 8;
    cfg.seed = 1;

    CHECK_THROWS_AS(train(*model, fx.train, fx.valid, cfg), NonFiniteGradient);
  }

  TEST_CASE("validation record serialization carries every field") {
    ValidationRecord rec;
    rec.step = 12;
    rec.train_loss = 1.5;
    rec.valid_loss = 2.25;
    rec.learning_rate = 0.001;
    rec.valid.n = 4;
    rec.valid.sequence_acc = 0.5;
    rec.valid.positional_acc = 0.75;
    std::string j = validation_record_json(rec);
    CHECK(j.find("\"step\":12") != std::string::npos);
    CHECK(j.find("train_loss") != std::string::npos);
    CHECK(j.find("valid_loss") != std::string::npos);
    CHECK(j.find("learning_rate") != std::string::npos);
    CHECK(j.find("sequence_acc") != std::string::npos);
    CHECK(j.find('\n') == std::string::npos);
  }
}

TEST_SUITE("checkpoints") {
  TEST_CASE("a checkpoint round trip is bitwise faithful") {
    TempDir dir("ckpt-rt");
    TrainFixture fx;
    auto model = fx.model(99);
    model->set_train(false);
    const std::filesystem::path path = dir.path() / "model.ckpt";
    save_checkpoint(path, *model, 123, /*use_description=*/true);

    CheckpointData data = load_checkpoint(path);
    CHECK(data.step == 123);
    CHECK(data.use_description == true);
    CHECK(data.model->arch() == Arch::lstm);
    CHECK(data.model->source_vocab().hash() == model->source_vocab().hash());
    CHECK(data.model->target_vocab().hash() == model->target_vocab().hash());

    const auto& ea = model->params().entries();
    const auto& eb = data.model->params().entries();
    REQUIRE(ea.size() == eb.size());
    for (std::size_t i = 0; i < ea.size(); ++i) {
      CHECK(ea[i].name == eb[i].name);
      auto va = ea[i].tensor.value();
      auto vb = eb[i].tensor.value();
      REQUIRE(va.size() == vb.size());
      for (std::size_t j = 0; j < va.size(); ++j) REQUIRE(va[j] == vb[j]);
    }

    // Same parameters, same vocabularies: identical logits on a probe batch.
    data.model->set_train(false);
    std::vector<std::vector<int>> src_rows = {fx.train[0].source_ids, fx.train[1].source_ids};
    std::vector<std::vector<int>> tgt_rows = {fx.train[0].target_ids, fx.train[1].target_ids};
    IdBatch src = make_batch(src_rows);
    IdBatch tgt = make_batch(tgt_rows);
    Tensor la = model->forward_teacher_forced(src, tgt);
    Tensor lb = data.model->forward_teacher_forced(src, tgt);
    REQUIRE(la.size() == lb.size());
    for (std::size_t i = 0; i < la.size(); ++i) CHECK(la.value()[i] == lb.value()[i]);

    SUBCASE("loading with the matching expected architecture succeeds") {
      CHECK_NOTHROW(load_checkpoint(path, Arch::lstm));
    }
    SUBCASE("expecting a different architecture is rejected") {
      CHECK_THROWS_AS(load_checkpoint(path, Arch::transformer), IncompatibleCheckpoint);
    }
  }

  TEST_CASE("tampered checkpoints are refused") {
    TempDir dir("ckpt-tamper");
    TrainFixture fx;
    auto model = fx.model();
    const std::filesystem::path path = dir.path() / "model.ckpt";
    save_checkpoint(path, *model, 1, false);
    const std::vector<char> original = read_bytes(path);

    SUBCASE("a corrupted magic header") {
      std::vector<char> bytes = original;
      bytes[0] = 'X';
      write_bytes(path, bytes);
      CHECK_THROWS_AS(load_checkpoint(path), IncompatibleCheckpoint);
    }

    SUBCASE("a vocabulary hash that no longer matches") {
      std::vector<char> bytes = original;
      const std::string key = "\"source_vocab_hash\":";
      auto it = std::search(bytes.begin(), bytes.end(), key.begin(), key.end());
      REQUIRE(it != bytes.end());
      it += static_cast<std::ptrdiff_t>(key.size());
      REQUIRE(it != bytes.end());
      REQUIRE(*it >= '0');
      REQUIRE(*it <= '9');
      *it = static_cast<char>('0' + (*it - '0' + 1) % 10);
      write_bytes(path, bytes);
      CHECK_THROWS_AS(load_checkpoint(path), IncompatibleCheckpoint);
    }

    SUBCASE("a truncated file") {
      std::vector<char> bytes(original.begin(), original.begin() + original.size() / 2);
      write_bytes(path, bytes);
      CHECK_THROWS_AS(load_checkpoint(path), IoError);
    }

    SUBCASE("a missing file") {
      CHECK_THROWS_AS(load_checkpoint(dir.path() / "absent.ckpt"), IoError);
    }
  }
}

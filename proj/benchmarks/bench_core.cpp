#include <benchmark/benchmark.h>

#include <memory>
#include <string>
#include <vector>

#include "ifthen/corpus.hpp"
#include "ifthen/decode.hpp"
#include "ifthen/metrics.hpp"
#include "ifthen/model.hpp"
#include "ifthen/ops.hpp"
#include "ifthen/recipe.hpp"
#include "ifthen/rng.hpp"
#include "ifthen/tensor.hpp"

using namespace ifthen;

namespace {

Tensor random_tensor(Shape shape, Rng& rng) {
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor::from_data(std::move(shape), std::move(v));
}

void bm_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Tensor a = random_tensor({n, n}, rng);
  Tensor b = random_tensor({n, n}, rng);
  for (auto _ : state) {
    Tensor c = matmul(a, b);
    benchmark::DoNotOptimize(c.value().data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) *
                          static_cast<int64_t>(n * n * n));
}

void bm_softmax(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  Tensor a = random_tensor({rows, 512}, rng);
  for (auto _ : state) {
    Tensor s = softmax(a, 1);
    benchmark::DoNotOptimize(s.value().data());
  }
}

void bm_lstm_cell_step(benchmark::State& state) {
  const auto h = static_cast<std::size_t>(state.range(0));
  const std::size_t batch = 32;
  Rng rng(3);
  Tensor x = random_tensor({batch, h}, rng);
  Tensor h0 = random_tensor({batch, h}, rng);
  Tensor c0 = random_tensor({batch, h}, rng);
  Tensor w_ih = random_tensor({h, 4 * h}, rng);
  Tensor w_hh = random_tensor({h, 4 * h}, rng);
  Tensor bias = random_tensor({4 * h}, rng);
  for (auto _ : state) {
    auto [hn, cn] = lstm_cell_step(x, h0, c0, w_ih, w_hh, bias);
    benchmark::DoNotOptimize(hn.value().data());
    benchmark::DoNotOptimize(cn.value().data());
  }
}

struct DecodeSetup {
  Vocabulary source;
  Vocabulary target;
  std::unique_ptr<SeqModel> model;
  std::vector<int> source_ids;

  DecodeSetup() {
    std::vector<std::string> src_texts;
    std::vector<std::string> tgt_texts;
    for (int c = 0; c < 12; ++c) {
      const std::string chan = "channel" + std::to_string(c);
      for (int f = 0; f < 4; ++f) {
        const std::string fn = "fn" + std::to_string(f);
        Recipe r{chan, fn, chan, fn};
        src_texts.push_back("when " + chan + " fires " + fn + " run it again");
        tgt_texts.push_back(recipe_to_text(r));
      }
    }
    source = build_vocabulary(src_texts);
    target = build_vocabulary(tgt_texts);
    LstmEncDecConfig cfg;
    cfg.max_source_len = 12;
    model = make_model(cfg, source, target, 9);
    model->set_train(false);
    source_ids = encode_source(src_texts[0], source, cfg.max_source_len);
  }
};

void bm_encode_source(benchmark::State& state) {
  static const DecodeSetup setup;
  const std::string text = "when channel3 fires fn1 run it again and again and again";
  for (auto _ : state) {
    std::vector<int> ids = encode_source(text, setup.source, 25);
    benchmark::DoNotOptimize(ids.data());
  }
}

void bm_greedy_decode(benchmark::State& state) {
  static const DecodeSetup setup;
  for (auto _ : state) {
    DecodeResult r = greedy_decode(*setup.model, setup.source_ids);
    benchmark::DoNotOptimize(r.tokens.data());
  }
}

void bm_evaluate(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  std::vector<Prediction> preds;
  std::vector<Recipe> refs;
  for (std::size_t i = 0; i < n; ++i) {
    Recipe r{"chan" + std::to_string(rng.index(20)), "f" + std::to_string(rng.index(5)),
             "chan" + std::to_string(rng.index(20)), "f" + std::to_string(rng.index(5))};
    std::vector<std::string> tokens = serialize_recipe(r).token_vector();
    if (rng.uniform() < 0.5) tokens[rng.index(4)] += "_x";
    preds.push_back(prediction_from_tokens(tokens));
    refs.push_back(r);
  }
  for (auto _ : state) {
    EvalReport report = evaluate(preds, refs);
    benchmark::DoNotOptimize(&report);
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) * static_cast<int64_t>(n));
}

}  // namespace

BENCHMARK(bm_matmul)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(bm_softmax)->Arg(64)->Arg(256);
BENCHMARK(bm_lstm_cell_step)->Arg(64)->Arg(256);
BENCHMARK(bm_encode_source);
BENCHMARK(bm_greedy_decode);
BENCHMARK(bm_evaluate)->Arg(1000)->Arg(10000);

BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include "semb/model_grad.hpp"
#include "semb/optim.hpp"
#include "semb/synth.hpp"

namespace {

semb::SyntheticClick make_click_fixture(std::size_t k) {
  semb::SyntheticConfig cfg;
  cfg.kind = semb::SynthKind::click;
  cfg.records = 128;
  cfg.items_per_slate = 25;
  cfg.item_vocab = 200;
  cfg.action_types = 10;
  cfg.action_item_vocab = 25;
  cfg.max_actions = 15;
  cfg.k = k;
  cfg.planted_scale = 10.0;
  cfg.train_frac = 1.0;
  cfg.validation_frac = 0.0;
  return generate_synthetic_click(cfg);
}

void BM_ClickLogitsSemb2(benchmark::State& state) {
  auto synth = make_click_fixture(state.range(0));
  semb::ClickModel model = synth.planted;
  model.variant = semb::ClickVariant::semb2;
  model.w1 = 0.1;
  model.w2 = 0.1;
  const auto& rec = synth.data.train.front();
  for (auto _ : state) {
    benchmark::DoNotOptimize(semb::click_logits(model, rec.session, rec.items));
  }
}

void BM_ClickMinibatchGradients(benchmark::State& state) {
  auto synth = make_click_fixture(state.range(0));
  semb::ClickModel model = synth.planted;
  model.variant = semb::ClickVariant::semb2;
  const std::span<const semb::SessionRecord> batch(synth.data.train.data(), 32);
  for (auto _ : state) {
    double loss = 0.0;
    benchmark::DoNotOptimize(semb::click_gradients(model, batch, &loss));
  }
}

void BM_AdamSparseStep(benchmark::State& state) {
  auto synth = make_click_fixture(state.range(0));
  semb::ClickModel model = synth.planted;
  const std::span<const semb::SessionRecord> batch(synth.data.train.data(), 32);
  const auto grads = semb::click_gradients(model, batch);
  semb::AdamState adam(model.k(), {});
  const semb::ParamsRef ref = semb::params_ref(model);
  for (auto _ : state) adam.step(ref, grads);
}

}  // namespace

BENCHMARK(BM_ClickLogitsSemb2)->Arg(16)->Arg(100);
BENCHMARK(BM_ClickMinibatchGradients)->Arg(16)->Arg(100);
BENCHMARK(BM_AdamSparseStep)->Arg(16)->Arg(100);
BENCHMARK_MAIN();

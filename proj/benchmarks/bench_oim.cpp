#include <benchmark/benchmark.h>

#include <cstddef>
#include <vector>

#include "oim/buffers.hpp"
#include "oim/loss.hpp"
#include "oim/rng.hpp"
#include "oim/synth.hpp"
#include "oim/trainer.hpp"

namespace {

struct Problem {
  oim::OimConfig cfg;
  oim::LookupTable lut;
  oim::CircularQueue queue;
  oim::Vec x;
};

// full buffers at the requested scale; the reference configuration is
// L = 5000, Q = 5000, D = 256
Problem make_problem(std::size_t num_labeled, std::size_t queue_size,
                     std::size_t dim) {
  oim::Rng rng(42);
  Problem p{
      {},
      oim::LookupTable(dim, num_labeled),
      oim::CircularQueue(dim, queue_size),
      rng.unit_vector(dim),
  };
  p.cfg.tau = 0.1;
  p.cfg.feature_dim = dim;
  p.cfg.num_labeled = num_labeled;
  p.cfg.queue_capacity = queue_size;
  for (std::size_t t = 0; t < num_labeled; ++t) {
    p.lut.update(t, rng.unit_vector(dim), 0.0);
  }
  for (std::size_t k = 0; k < queue_size; ++k) {
    p.queue.push(rng.unit_vector(dim));
  }
  return p;
}

void BM_forward(benchmark::State& state) {
  std::size_t n = static_cast<std::size_t>(state.range(0));
  Problem p = make_problem(n, n, 256);
  for (auto _ : state) {
    benchmark::DoNotOptimize(oim::oim_forward(p.x, p.lut, p.queue, p.cfg));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(2 * n));
}
BENCHMARK(BM_forward)->Arg(100)->Arg(1000)->Arg(5000);

void BM_forward_subsampled(benchmark::State& state) {
  std::size_t n = static_cast<std::size_t>(state.range(0));
  std::size_t keep = n / 10;
  Problem p = make_problem(n, n, 256);
  p.cfg.subsample_labeled = keep;
  p.cfg.subsample_unlabeled = keep;
  oim::Rng rng(7);
  // drawing the subset is part of the cost a sub-sampled step pays
  for (auto _ : state) {
    oim::SubsetSelection subset{
        oim::subsample_indices(rng, n, keep, 0),
        oim::subsample_indices(rng, p.queue.size(), keep),
    };
    benchmark::DoNotOptimize(
        oim::oim_forward(p.x, p.lut, p.queue, p.cfg, &subset));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(2 * keep));
}
BENCHMARK(BM_forward_subsampled)->Arg(1000)->Arg(5000);

void BM_loss_and_grad(benchmark::State& state) {
  std::size_t n = static_cast<std::size_t>(state.range(0));
  Problem p = make_problem(n, n, 256);
  for (auto _ : state) {
    oim::MatchScores scores = oim::oim_forward(p.x, p.lut, p.queue, p.cfg);
    benchmark::DoNotOptimize(oim::oim_loss(scores, 0));
    benchmark::DoNotOptimize(oim::oim_grad_x(scores, 0, p.lut, p.queue, p.cfg));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(2 * n));
}
BENCHMARK(BM_loss_and_grad)->Arg(100)->Arg(1000)->Arg(5000);

void BM_lut_update(benchmark::State& state) {
  Problem p = make_problem(5000, 0, 256);
  oim::Rng rng(7);
  oim::Vec feature = rng.unit_vector(256);
  std::size_t t = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(p.lut.update(t, feature, 0.5));
    t = (t + 1) % p.lut.num_classes();
  }
}
BENCHMARK(BM_lut_update);

void BM_queue_push(benchmark::State& state) {
  oim::CircularQueue queue(256, 5000);
  oim::Rng rng(7);
  oim::Vec feature = rng.unit_vector(256);
  for (auto _ : state) {
    queue.push(feature);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_queue_push);

void BM_trainer_step(benchmark::State& state) {
  oim::SynthConfig synth;
  synth.scenes_train = 40;
  synth.scenes_test = 10;
  oim::SynthWorld world = oim::gen_world(synth);
  oim::TrainConfig config;
  config.total_iters = 1u << 30;  // never reached; the loop decides
  oim::Trainer trainer(world, config);
  for (auto _ : state) {
    trainer.step();
  }
}
BENCHMARK(BM_trainer_step);

}  // namespace

BENCHMARK_MAIN();

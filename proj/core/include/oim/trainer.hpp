#ifndef OIM_TRAINER_HPP_
#define OIM_TRAINER_HPP_

#include <bit>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "oim/buffers.hpp"
#include "oim/embedder.hpp"
#include "oim/loss.hpp"
#include "oim/rng.hpp"
#include "oim/synth.hpp"
#include "oim/vecmath.hpp"

namespace oim {

enum class LossKind { Oim, Softmax, SoftmaxPretrained };

std::string loss_kind_name(LossKind kind);
LossKind loss_kind_from_name(const std::string& name);

struct TrainConfig {
  std::size_t scenes_per_batch = 2;
  std::size_t total_iters = 2000;
  double lr_base = 0.001;
  std::size_t lr_drop_iter = 1600;
  double lr_drop_factor = 0.1;
  double momentum = 0.9;
  std::size_t out_dim = 32;
  LossKind loss_kind = LossKind::Oim;
  OimConfig oim;  // feature_dim and num_labeled are derived, see Trainer
  std::size_t pretrain_iters = 200;
  std::uint64_t seed = 1;

  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// lr_base until lr_drop_iter, then lr_base * lr_drop_factor.
double lr_schedule(const TrainConfig& cfg, std::size_t iteration);

// target is the training class index for labeled samples, -1 otherwise.
struct Sample {
  Vec raw;
  PersonKind kind = PersonKind::Background;
  int target = -1;
};

// Every person of scenes_per_batch uniformly drawn training scenes.
std::vector<Sample> build_minibatch(const SynthWorld& world, Rng& rng,
                                    std::size_t scenes_per_batch);

// loss and train_accuracy are quiet NaN when the iteration was skipped
// (no labeled sample in the batch).
struct MetricRow {
  std::size_t iteration = 0;
  double lr = 0.0;
  double loss = 0.0;
  double train_accuracy = 0.0;
};

// Bit-pattern comparison so NaN rows of skipped iterations compare equal;
// checkpoint round-trips are checked with exactly this.
inline bool operator==(const MetricRow& a, const MetricRow& b) {
  auto bits = [](double x) { return std::bit_cast<std::uint64_t>(x); };
  return a.iteration == b.iteration && bits(a.lr) == bits(b.lr) &&
         bits(a.loss) == bits(b.loss) &&
         bits(a.train_accuracy) == bits(b.train_accuracy);
}

// Everything a run needs to continue: parameters, optimizer velocities, the
// identity buffers (present exactly when the loss is oim), the data-order
// RNG, and the metric history.
struct TrainState {
  TrainConfig config;
  std::size_t iteration = 0;
  EmbedderParams embedder;
  SoftmaxClassifierParams classifier;  // softmax modes only, else 0x0
  OptimizerState opt;
  std::optional<LookupTable> lut;
  std::optional<CircularQueue> queue;
  Rng rng;
  std::vector<MetricRow> history;

  friend bool operator==(const TrainState&, const TrainState&) = default;
};

// Joint training loop over a fixed world. All forward passes and gradients
// of one iteration read the iteration-start parameters and buffers; updates
// apply afterwards: SGD step, then one lookup-table update per labeled
// sample in batch order, then one queue push of the unlabeled features.
class Trainer {
 public:
  // Fresh state. Derives oim.feature_dim from out_dim and oim.num_labeled
  // from the world's training identity count.
  Trainer(const SynthWorld& world, TrainConfig config);

  // Resume from a saved state; validates it against the world.
  Trainer(const SynthWorld& world, TrainState state);

  const TrainState& state() const { return state_; }
  std::size_t iteration() const { return state_.iteration; }

  MetricRow step();
  void run(std::size_t iters);

  // Trains the classifier against the frozen embedder for `iters`
  // iterations; returns the per-iteration mean loss. Only valid for
  // loss_kind softmax_pretrained.
  std::vector<double> pretrain_classifier(std::size_t iters);

  Vec embed(const Vec& raw) const;

 private:
  MetricRow step_oim(const std::vector<const Sample*>& labeled,
                     const std::vector<const Sample*>& unlabeled, double lr);
  MetricRow step_softmax(const std::vector<const Sample*>& labeled, double lr);

  const SynthWorld* world_;
  TrainState state_;
};

// CSV with header iteration,lr,loss,train_accuracy; numbers are written in
// shortest round-trip form, NaN as "nan". Reruns produce identical bytes.
void write_metrics_csv(const std::vector<MetricRow>& history,
                       const std::string& path);

// Versioned binary snapshot; load(save(state)) == state including RNG
// position and buffer contents.
void checkpoint_save(const TrainState& state, const std::string& path);
TrainState checkpoint_load(const std::string& path);

}  // namespace oim

#endif  // OIM_TRAINER_HPP_

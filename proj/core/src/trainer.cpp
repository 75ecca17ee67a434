#include "oim/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <utility>

namespace oim {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::size_t argmax(const std::vector<double>& values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace

std::string loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::Oim:
      return "oim";
    case LossKind::Softmax:
      return "softmax";
    case LossKind::SoftmaxPretrained:
      return "softmax_pretrained";
  }
  throw std::logic_error("unreachable loss kind");
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "oim") return LossKind::Oim;
  if (name == "softmax") return LossKind::Softmax;
  if (name == "softmax_pretrained") return LossKind::SoftmaxPretrained;
  throw std::invalid_argument("unknown loss kind '" + name + "'");
}

void TrainConfig::validate() const {
  if (scenes_per_batch == 0) {
    throw std::invalid_argument("scenes_per_batch must be at least 1");
  }
  if (out_dim == 0) throw std::invalid_argument("out_dim must be positive");
  if (lr_base <= 0.0) throw std::invalid_argument("lr_base must be positive");
  if (lr_drop_factor <= 0.0) {
    throw std::invalid_argument("lr_drop_factor must be positive");
  }
  if (lr_drop_iter > total_iters) {
    throw std::invalid_argument("lr_drop_iter must not exceed total_iters");
  }
  if (momentum < 0.0 || momentum >= 1.0) {
    throw std::invalid_argument("momentum must lie in [0, 1)");
  }
}

double lr_schedule(const TrainConfig& cfg, std::size_t iteration) {
  if (iteration < cfg.lr_drop_iter) return cfg.lr_base;
  return cfg.lr_base * cfg.lr_drop_factor;
}

std::vector<Sample> build_minibatch(const SynthWorld& world, Rng& rng,
                                    std::size_t scenes_per_batch) {
  if (world.train_scenes.empty()) {
    throw std::invalid_argument("world has no training scenes");
  }
  if (scenes_per_batch == 0) {
    throw std::invalid_argument("scenes_per_batch must be at least 1");
  }
  std::vector<Sample> batch;
  for (std::size_t b = 0; b < scenes_per_batch; ++b) {
    int scene_id =
        world.train_scenes[rng.uniform_index(world.train_scenes.size())];
    const SynthScene& scene = world.scenes[static_cast<std::size_t>(scene_id)];
    for (const Person& person : scene.persons) {
      Sample sample;
      sample.raw = person.raw_feature;
      sample.kind = person.kind;
      if (person.kind == PersonKind::Labeled) {
        sample.target = world.train_class_of(person.identity);
        if (sample.target < 0) {
          throw std::invalid_argument(
              "labeled identity outside the training split");
        }
      }
      batch.push_back(std::move(sample));
    }
  }
  return batch;
}

namespace {

void validate_state_against_world(const TrainState& state,
                                  const SynthWorld& world) {
  const TrainConfig& cfg = state.config;
  cfg.validate();
  std::size_t num_classes = world.train_identities.size();
  if (state.embedder.in_dim() != world.config.raw_dim ||
      state.embedder.out_dim() != cfg.out_dim) {
    throw std::invalid_argument("embedder shape does not match the world");
  }
  bool is_oim = cfg.loss_kind == LossKind::Oim;
  if (state.lut.has_value() != is_oim || state.queue.has_value() != is_oim) {
    throw std::invalid_argument(
        "identity buffers must be present exactly for the oim loss");
  }
  if (is_oim) {
    if (cfg.oim.num_labeled != num_classes ||
        cfg.oim.feature_dim != cfg.out_dim) {
      throw std::invalid_argument("oim settings do not match the world");
    }
    if (state.lut->num_classes() != num_classes ||
        state.lut->feature_dim() != cfg.out_dim ||
        state.queue->feature_dim() != cfg.out_dim ||
        state.queue->capacity() != cfg.oim.queue_capacity) {
      throw std::invalid_argument("identity buffers do not match the config");
    }
  } else {
    if (state.classifier.num_classes() != num_classes ||
        state.classifier.weight.cols() != cfg.out_dim) {
      throw std::invalid_argument("classifier shape does not match the world");
    }
  }
}

}  // namespace

Trainer::Trainer(const SynthWorld& world, TrainConfig config) : world_(&world) {
  if (world.train_scenes.empty()) {
    throw std::invalid_argument("world has no training scenes");
  }
  config.oim.feature_dim = config.out_dim;
  config.oim.num_labeled = world.train_identities.size();
  config.validate();

  state_.config = config;
  state_.rng = Rng(derive_seed(config.seed, 0));
  state_.embedder =
      EmbedderParams::init(config.out_dim, world.config.raw_dim, state_.rng);
  state_.opt.momentum = config.momentum;
  state_.opt.vel_embed = Matrix(config.out_dim, world.config.raw_dim);

  if (config.loss_kind == LossKind::Oim) {
    config.oim.validate();
    state_.lut.emplace(config.out_dim, config.oim.num_labeled);
    state_.queue.emplace(config.out_dim, config.oim.queue_capacity);
  } else {
    std::size_t num_classes = world.train_identities.size();
    state_.classifier =
        SoftmaxClassifierParams::init(num_classes, config.out_dim, state_.rng);
    state_.opt.vel_cls_weight = Matrix(num_classes, config.out_dim);
    state_.opt.vel_cls_bias = Vec(num_classes, 0.0);
  }
  validate_state_against_world(state_, world);
}

Trainer::Trainer(const SynthWorld& world, TrainState state)
    : world_(&world), state_(std::move(state)) {
  if (world.train_scenes.empty()) {
    throw std::invalid_argument("world has no training scenes");
  }
  validate_state_against_world(state_, world);
}

MetricRow Trainer::step() {
  const TrainConfig& cfg = state_.config;
  double lr = lr_schedule(cfg, state_.iteration);
  std::vector<Sample> batch =
      build_minibatch(*world_, state_.rng, cfg.scenes_per_batch);

  std::vector<const Sample*> labeled;
  std::vector<const Sample*> unlabeled;
  for (const Sample& sample : batch) {
    if (sample.kind == PersonKind::Labeled) {
      labeled.push_back(&sample);
    } else if (sample.kind == PersonKind::Unlabeled) {
      unlabeled.push_back(&sample);
    }
  }

  MetricRow row{state_.iteration, lr, kNan, kNan};
  if (!labeled.empty()) {
    if (cfg.loss_kind == LossKind::Oim) {
      row = step_oim(labeled, unlabeled, lr);
    } else {
      row = step_softmax(labeled, lr);
    }
  }
  // else: nothing to identify in this batch; parameters and buffers are
  // left untouched and the row records NaN metrics

  state_.history.push_back(row);
  ++state_.iteration;
  return row;
}

MetricRow Trainer::step_oim(const std::vector<const Sample*>& labeled,
                            const std::vector<const Sample*>& unlabeled,
                            double lr) {
  const TrainConfig& cfg = state_.config;
  const OimConfig& oim = cfg.oim;
  // all samples of this iteration score against these copies
  const LookupTable lut_snapshot = *state_.lut;
  const CircularQueue queue_snapshot = *state_.queue;

  Matrix dweight_sum(state_.embedder.out_dim(), state_.embedder.in_dim());
  double loss_sum = 0.0;
  std::size_t correct = 0;
  std::vector<std::pair<std::size_t, Vec>> lut_updates;
  lut_updates.reserve(labeled.size());

  bool subsampled = oim.subsample_labeled.has_value() ||
                    oim.subsample_unlabeled.has_value();
  for (const Sample* sample : labeled) {
    auto target = static_cast<std::size_t>(sample->target);
    EmbedCache cache;
    Vec z = embed_forward(sample->raw, state_.embedder, &cache);

    SubsetSelection selection;
    const SubsetSelection* selection_ptr = nullptr;
    if (subsampled) {
      std::size_t total_l = lut_snapshot.num_classes();
      std::size_t keep_l = oim.subsample_labeled
                               ? std::min(*oim.subsample_labeled, total_l)
                               : total_l;
      selection.labeled =
          subsample_indices(state_.rng, total_l, keep_l, target);
      std::size_t total_q = queue_snapshot.size();
      std::size_t keep_q = oim.subsample_unlabeled
                               ? std::min(*oim.subsample_unlabeled, total_q)
                               : total_q;
      selection.unlabeled = subsample_indices(state_.rng, total_q, keep_q);
      selection_ptr = &selection;
    }

    MatchScores scores =
        oim_forward(z, lut_snapshot, queue_snapshot, oim, selection_ptr);
    loss_sum += oim_loss(scores, target);
    if (argmax(scores.p) == target) ++correct;

    Vec dz = oim_grad_x(scores, target, lut_snapshot, queue_snapshot, oim);
    EmbedGrads grads = embed_backward(cache, dz, state_.embedder);
    for (std::size_t i = 0; i < dweight_sum.data().size(); ++i) {
      dweight_sum.data()[i] += grads.dweight.data()[i];
    }
    lut_updates.emplace_back(target, std::move(z));
  }

  // unlabeled features also come from the iteration-start parameters
  std::vector<Vec> queue_batch;
  queue_batch.reserve(unlabeled.size());
  for (const Sample* sample : unlabeled) {
    queue_batch.push_back(embed_forward(sample->raw, state_.embedder));
  }

  double n = static_cast<double>(labeled.size());
  for (double& g : dweight_sum.data()) g /= n;
  sgd_step(state_.embedder.weight, dweight_sum, state_.opt.vel_embed, lr,
           cfg.momentum);

  for (const auto& [target, z] : lut_updates) {
    state_.lut->update(target, z, oim.gamma);
  }
  state_.queue->push(std::span<const Vec>(queue_batch));

  return {state_.iteration, lr, loss_sum / n,
          static_cast<double>(correct) / n};
}

MetricRow Trainer::step_softmax(const std::vector<const Sample*>& labeled,
                                double lr) {
  const TrainConfig& cfg = state_.config;
  Matrix dweight_sum(state_.embedder.out_dim(), state_.embedder.in_dim());
  Matrix dcls_weight_sum(state_.classifier.weight.rows(),
                         state_.classifier.weight.cols());
  Vec dcls_bias_sum(state_.classifier.bias.size(), 0.0);
  double loss_sum = 0.0;
  std::size_t correct = 0;

  for (const Sample* sample : labeled) {
    auto target = static_cast<std::size_t>(sample->target);
    EmbedCache cache;
    Vec z = embed_forward(sample->raw, state_.embedder, &cache);
    SoftmaxLossResult result = softmax_cls_loss(z, target, state_.classifier);
    loss_sum += result.loss;
    if (argmax(result.probs) == target) ++correct;

    EmbedGrads grads = embed_backward(cache, result.dz, state_.embedder);
    for (std::size_t i = 0; i < dweight_sum.data().size(); ++i) {
      dweight_sum.data()[i] += grads.dweight.data()[i];
    }
    for (std::size_t i = 0; i < dcls_weight_sum.data().size(); ++i) {
      dcls_weight_sum.data()[i] += result.dweight.data()[i];
    }
    axpy(1.0, result.dbias, dcls_bias_sum);
  }

  double n = static_cast<double>(labeled.size());
  for (double& g : dweight_sum.data()) g /= n;
  for (double& g : dcls_weight_sum.data()) g /= n;
  for (double& g : dcls_bias_sum) g /= n;

  sgd_step(state_.embedder.weight, dweight_sum, state_.opt.vel_embed, lr,
           cfg.momentum);
  sgd_step(state_.classifier.weight, dcls_weight_sum,
           state_.opt.vel_cls_weight, lr, cfg.momentum);
  sgd_step(state_.classifier.bias, dcls_bias_sum, state_.opt.vel_cls_bias, lr,
           cfg.momentum);

  return {state_.iteration, lr, loss_sum / n,
          static_cast<double>(correct) / n};
}

void Trainer::run(std::size_t iters) {
  for (std::size_t i = 0; i < iters; ++i) step();
}

std::vector<double> Trainer::pretrain_classifier(std::size_t iters) {
  const TrainConfig& cfg = state_.config;
  if (cfg.loss_kind != LossKind::SoftmaxPretrained) {
    throw std::invalid_argument(
        "classifier pretraining needs loss kind softmax_pretrained");
  }

  std::vector<double> losses;
  losses.reserve(iters);
  double lr = lr_schedule(cfg, 0);
  for (std::size_t it = 0; it < iters; ++it) {
    std::vector<Sample> batch =
        build_minibatch(*world_, state_.rng, cfg.scenes_per_batch);
    Matrix dcls_weight_sum(state_.classifier.weight.rows(),
                           state_.classifier.weight.cols());
    Vec dcls_bias_sum(state_.classifier.bias.size(), 0.0);
    double loss_sum = 0.0;
    std::size_t n = 0;
    for (const Sample& sample : batch) {
      if (sample.kind != PersonKind::Labeled) continue;
      ++n;
      Vec z = embed_forward(sample.raw, state_.embedder);
      SoftmaxLossResult result =
          softmax_cls_loss(z, static_cast<std::size_t>(sample.target),
                           state_.classifier);
      loss_sum += result.loss;
      for (std::size_t i = 0; i < dcls_weight_sum.data().size(); ++i) {
        dcls_weight_sum.data()[i] += result.dweight.data()[i];
      }
      axpy(1.0, result.dbias, dcls_bias_sum);
    }
    if (n == 0) {
      losses.push_back(kNan);
      continue;
    }
    for (double& g : dcls_weight_sum.data()) g /= static_cast<double>(n);
    for (double& g : dcls_bias_sum) g /= static_cast<double>(n);
    sgd_step(state_.classifier.weight, dcls_weight_sum,
             state_.opt.vel_cls_weight, lr, cfg.momentum);
    sgd_step(state_.classifier.bias, dcls_bias_sum, state_.opt.vel_cls_bias,
             lr, cfg.momentum);
    losses.push_back(loss_sum / static_cast<double>(n));
  }
  return losses;
}

Vec Trainer::embed(const Vec& raw) const {
  return embed_forward(raw, state_.embedder);
}

namespace {

void append_double(std::string& out, double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw std::logic_error("to_chars failed");
  out.append(buf, ptr);
}

}  // namespace

void write_metrics_csv(const std::vector<MetricRow>& history,
                       const std::string& path) {
  std::string out = "iteration,lr,loss,train_accuracy\n";
  for (const MetricRow& row : history) {
    out += std::to_string(row.iteration);
    out += ',';
    append_double(out, row.lr);
    out += ',';
    append_double(out, row.loss);
    out += ',';
    append_double(out, row.train_accuracy);
    out += '\n';
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write " + path);
  file << out;
  if (!file) throw std::runtime_error("write failed for " + path);
}

}  // namespace oim

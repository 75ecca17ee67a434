#include "oim/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "oim/buffers.hpp"
#include "oim/embedder.hpp"
#include "oim/loss.hpp"
#include "oim/rng.hpp"
#include "oim/vecmath.hpp"

namespace oim {

namespace {

double rel_error(const Vec& analytic, const Vec& fd) {
  Vec diff(analytic.size());
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff[i] = analytic[i] - fd[i];
  }
  return l2_norm(diff) / std::max(l2_norm(fd), 1e-12);
}

struct OimCase {
  LookupTable lut;
  CircularQueue queue;
  OimConfig cfg;
  SubsetSelection subset;
  bool use_subset = false;
  std::size_t target = 0;
};

OimCase random_oim_case(Rng& rng, bool allow_subset) {
  std::size_t num_labeled = 1 + rng.uniform_index(16);
  std::size_t dim = 2 + rng.uniform_index(31);
  std::size_t queue_size = rng.uniform_index(33);
  static constexpr double kTaus[] = {0.05, 0.1, 1.0};
  double tau = kTaus[rng.uniform_index(3)];

  std::vector<Vec> columns;
  columns.reserve(num_labeled);
  for (std::size_t i = 0; i < num_labeled; ++i) {
    // a never-updated class keeps its all-zero column
    if (rng.uniform() < 0.15) {
      columns.push_back(Vec(dim, 0.0));
    } else {
      columns.push_back(rng.unit_vector(dim));
    }
  }
  std::vector<Vec> entries;
  entries.reserve(queue_size);
  for (std::size_t i = 0; i < queue_size; ++i) {
    entries.push_back(rng.unit_vector(dim));
  }

  OimCase c{LookupTable::from_columns(dim, std::move(columns)),
            CircularQueue::from_entries(dim, queue_size, std::move(entries)),
            {},
            {},
            false,
            rng.uniform_index(num_labeled)};
  c.cfg.tau = tau;
  c.cfg.feature_dim = dim;
  c.cfg.num_labeled = num_labeled;
  c.cfg.queue_capacity = queue_size;

  if (allow_subset) {
    std::size_t keep_l = 1 + rng.uniform_index(num_labeled);
    c.subset.labeled = subsample_indices(rng, num_labeled, keep_l, c.target);
    std::size_t keep_q = rng.uniform_index(queue_size + 1);
    c.subset.unlabeled = subsample_indices(rng, queue_size, keep_q);
    c.use_subset = true;
  }
  return c;
}

GradCheckEntry check_oim_grad(const GradCheckOptions& options) {
  GradCheckEntry entry{"oim gradient wrt feature", options.oim_cases, 0.0,
                       options.oim_tolerance, false};
  Rng rng(derive_seed(options.seed, 1));
  for (std::size_t n = 0; n < options.oim_cases; ++n) {
    OimCase c = random_oim_case(rng, n % 3 == 2);
    const SubsetSelection* subset = c.use_subset ? &c.subset : nullptr;

    Vec x = rng.unit_vector(c.cfg.feature_dim);
    double scale = rng.uniform(0.5, 2.0);
    for (double& v : x) v *= scale;

    MatchScores scores = oim_forward(x, c.lut, c.queue, c.cfg, subset);
    Vec analytic = oim_grad_x(scores, c.target, c.lut, c.queue, c.cfg);
    if (options.corrupt != 0.0) analytic[0] += options.corrupt;

    Vec fd(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      Vec xp = x;
      xp[i] += options.fd_step;
      double lp = oim_loss(oim_forward(xp, c.lut, c.queue, c.cfg, subset),
                           c.target);
      Vec xm = x;
      xm[i] -= options.fd_step;
      double lm = oim_loss(oim_forward(xm, c.lut, c.queue, c.cfg, subset),
                           c.target);
      fd[i] = (lp - lm) / (2.0 * options.fd_step);
    }
    entry.max_rel_error = std::max(entry.max_rel_error, rel_error(analytic, fd));
  }
  entry.passed = entry.max_rel_error <= entry.tolerance;
  return entry;
}

GradCheckEntry check_composite_grad(const GradCheckOptions& options) {
  GradCheckEntry entry{"embedder composite gradient wrt weights",
                       options.composite_cases, 0.0,
                       options.composite_tolerance, false};
  Rng rng(derive_seed(options.seed, 2));
  for (std::size_t n = 0; n < options.composite_cases; ++n) {
    std::size_t raw_dim = 2 + rng.uniform_index(7);
    std::size_t out_dim = 2 + rng.uniform_index(7);
    std::size_t num_labeled = 1 + rng.uniform_index(8);
    std::size_t queue_size = rng.uniform_index(9);

    std::vector<Vec> columns;
    for (std::size_t i = 0; i < num_labeled; ++i) {
      columns.push_back(rng.unit_vector(out_dim));
    }
    std::vector<Vec> entries;
    for (std::size_t i = 0; i < queue_size; ++i) {
      entries.push_back(rng.unit_vector(out_dim));
    }
    LookupTable lut = LookupTable::from_columns(out_dim, std::move(columns));
    CircularQueue queue =
        CircularQueue::from_entries(out_dim, queue_size, std::move(entries));
    OimConfig cfg;
    cfg.tau = 0.1;
    cfg.feature_dim = out_dim;
    cfg.num_labeled = num_labeled;
    cfg.queue_capacity = queue_size;

    EmbedderParams params = EmbedderParams::init(out_dim, raw_dim, rng);
    Vec raw = rng.unit_vector(raw_dim);
    std::size_t target = rng.uniform_index(num_labeled);

    auto loss_of = [&](const EmbedderParams& p) {
      Vec z = embed_forward(raw, p);
      return oim_loss(oim_forward(z, lut, queue, cfg), target);
    };

    EmbedCache cache;
    Vec z = embed_forward(raw, params, &cache);
    Vec dz = oim_grad_x(oim_forward(z, lut, queue, cfg), target, lut, queue,
                        cfg);
    EmbedGrads grads = embed_backward(cache, dz, params);
    if (options.corrupt != 0.0) grads.dweight.data()[0] += options.corrupt;

    Vec fd(params.weight.data().size());
    for (std::size_t i = 0; i < fd.size(); ++i) {
      EmbedderParams p = params;
      p.weight.data()[i] += options.fd_step;
      double lp = loss_of(p);
      p.weight.data()[i] = params.weight.data()[i] - options.fd_step;
      double lm = loss_of(p);
      fd[i] = (lp - lm) / (2.0 * options.fd_step);
    }
    entry.max_rel_error =
        std::max(entry.max_rel_error, rel_error(grads.dweight.data(), fd));
  }
  entry.passed = entry.max_rel_error <= entry.tolerance;
  return entry;
}

GradCheckEntry check_classifier_grad(const GradCheckOptions& options) {
  GradCheckEntry entry{"softmax classifier gradients",
                       options.classifier_cases, 0.0,
                       options.classifier_tolerance, false};
  Rng rng(derive_seed(options.seed, 3));
  for (std::size_t n = 0; n < options.classifier_cases; ++n) {
    std::size_t dim = 2 + rng.uniform_index(15);
    std::size_t classes = 2 + rng.uniform_index(15);
    SoftmaxClassifierParams params =
        SoftmaxClassifierParams::init(classes, dim, rng);
    for (double& b : params.bias) b = rng.uniform(-0.5, 0.5);
    Vec z = rng.unit_vector(dim);
    std::size_t target = rng.uniform_index(classes);

    SoftmaxLossResult result = softmax_cls_loss(z, target, params);
    if (options.corrupt != 0.0) result.dz[0] += options.corrupt;

    Vec fd_z(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      Vec zp = z;
      zp[i] += options.fd_step;
      Vec zm = z;
      zm[i] -= options.fd_step;
      fd_z[i] = (softmax_cls_loss(zp, target, params).loss -
                 softmax_cls_loss(zm, target, params).loss) /
                (2.0 * options.fd_step);
    }
    double err = rel_error(result.dz, fd_z);

    Vec fd_w(params.weight.data().size());
    for (std::size_t i = 0; i < fd_w.size(); ++i) {
      SoftmaxClassifierParams p = params;
      p.weight.data()[i] += options.fd_step;
      double lp = softmax_cls_loss(z, target, p).loss;
      p.weight.data()[i] = params.weight.data()[i] - options.fd_step;
      double lm = softmax_cls_loss(z, target, p).loss;
      fd_w[i] = (lp - lm) / (2.0 * options.fd_step);
    }
    err = std::max(err, rel_error(result.dweight.data(), fd_w));

    Vec fd_b(classes);
    for (std::size_t i = 0; i < classes; ++i) {
      SoftmaxClassifierParams p = params;
      p.bias[i] += options.fd_step;
      double lp = softmax_cls_loss(z, target, p).loss;
      p.bias[i] = params.bias[i] - options.fd_step;
      double lm = softmax_cls_loss(z, target, p).loss;
      fd_b[i] = (lp - lm) / (2.0 * options.fd_step);
    }
    err = std::max(err, rel_error(result.dbias, fd_b));

    entry.max_rel_error = std::max(entry.max_rel_error, err);
  }
  entry.passed = entry.max_rel_error <= entry.tolerance;
  return entry;
}

}  // namespace

bool GradCheckReport::all_passed() const {
  if (entries.empty()) return false;
  return std::all_of(entries.begin(), entries.end(),
                     [](const GradCheckEntry& e) { return e.passed; });
}

GradCheckReport run_gradcheck(const GradCheckOptions& options) {
  GradCheckReport report;
  report.entries.push_back(check_oim_grad(options));
  report.entries.push_back(check_composite_grad(options));
  report.entries.push_back(check_classifier_grad(options));
  return report;
}

}  // namespace oim

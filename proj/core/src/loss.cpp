#include "oim/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "oim/errors.hpp"

namespace oim {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_sorted_unique(const std::vector<std::size_t>& idx, std::size_t bound,
                         const char* what) {
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= bound) throw std::invalid_argument(std::string(what) + ": index out of range");
    if (i > 0 && idx[i] <= idx[i - 1]) {
      throw std::invalid_argument(std::string(what) + ": indices must be sorted and distinct");
    }
  }
}

}  // namespace

void OimConfig::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("OimConfig: tau must be > 0");
  if (gamma < 0.0 || gamma > 1.0) {
    throw std::invalid_argument("OimConfig: gamma must be in [0, 1]");
  }
  if (feature_dim == 0) throw std::invalid_argument("OimConfig: feature_dim must be positive");
  if (num_labeled == 0) throw std::invalid_argument("OimConfig: num_labeled must be positive");
  if (subsample_labeled && (*subsample_labeled == 0 || *subsample_labeled > num_labeled)) {
    throw std::invalid_argument("OimConfig: subsample_labeled must be in [1, num_labeled]");
  }
  if (subsample_unlabeled && (*subsample_unlabeled == 0 || *subsample_unlabeled > queue_capacity)) {
    throw std::invalid_argument("OimConfig: subsample_unlabeled must be in [1, queue_capacity]");
  }
}

MatchScores oim_forward(std::span<const double> x, const LookupTable& lut,
                        const CircularQueue& queue, const OimConfig& cfg,
                        const SubsetSelection* subset) {
  const std::size_t dim = lut.feature_dim();
  const std::size_t num_labeled = lut.num_classes();
  const std::size_t num_unlabeled = queue.size();
  if (x.size() != dim || queue.feature_dim() != dim || cfg.feature_dim != dim) {
    throw std::invalid_argument("oim_forward: feature dimension mismatch");
  }
  if (cfg.num_labeled != num_labeled) {
    throw std::invalid_argument("oim_forward: lookup table size mismatch");
  }
  if (!(cfg.tau > 0.0)) throw std::invalid_argument("oim_forward: tau must be > 0");

  MatchScores scores;
  scores.logits_labeled.assign(num_labeled, kNegInf);
  scores.logits_unlabeled.assign(num_unlabeled, kNegInf);

  const double inv_tau = 1.0 / cfg.tau;
  if (subset != nullptr) {
    check_sorted_unique(subset->labeled, num_labeled, "oim_forward labeled subset");
    check_sorted_unique(subset->unlabeled, num_unlabeled, "oim_forward unlabeled subset");
    if (subset->labeled.empty() && subset->unlabeled.empty()) {
      throw std::invalid_argument("oim_forward: empty subset selection");
    }
    for (std::size_t j : subset->labeled) {
      scores.logits_labeled[j] = dot(lut.column(j), x) * inv_tau;
    }
    for (std::size_t k : subset->unlabeled) {
      scores.logits_unlabeled[k] = dot(queue.entry(k), x) * inv_tau;
    }
  } else {
    for (std::size_t j = 0; j < num_labeled; ++j) {
      scores.logits_labeled[j] = dot(lut.column(j), x) * inv_tau;
    }
    for (std::size_t k = 0; k < num_unlabeled; ++k) {
      scores.logits_unlabeled[k] = dot(queue.entry(k), x) * inv_tau;
    }
  }

  // joint softmax with max-logit subtraction; exp(-inf) contributes exact 0
  double max_logit = kNegInf;
  for (double l : scores.logits_labeled) max_logit = std::max(max_logit, l);
  for (double l : scores.logits_unlabeled) max_logit = std::max(max_logit, l);

  scores.p.assign(num_labeled, 0.0);
  scores.q.assign(num_unlabeled, 0.0);
  double denom = 0.0;
  for (std::size_t j = 0; j < num_labeled; ++j) {
    const double e = std::exp(scores.logits_labeled[j] - max_logit);
    scores.p[j] = e;
    denom += e;
  }
  for (std::size_t k = 0; k < num_unlabeled; ++k) {
    const double e = std::exp(scores.logits_unlabeled[k] - max_logit);
    scores.q[k] = e;
    denom += e;
  }
  for (double& v : scores.p) v /= denom;
  for (double& v : scores.q) v /= denom;
  return scores;
}

double oim_loss(const MatchScores& scores, std::size_t target) {
  if (target >= scores.p.size()) {
    throw std::out_of_range("oim_loss: target class-id out of range");
  }
  const double pt = scores.p[target];
  if (!(pt > 0.0)) {
    throw DegenerateProbabilityError("oim_loss: target probability is zero");
  }
  return -std::log(pt);
}

Vec oim_grad_x(const MatchScores& scores, std::size_t target,
               const LookupTable& lut, const CircularQueue& queue,
               const OimConfig& cfg) {
  const std::size_t dim = lut.feature_dim();
  if (scores.p.size() != lut.num_classes() || scores.q.size() != queue.size()) {
    throw std::invalid_argument("oim_grad_x: score/buffer shape mismatch");
  }
  if (queue.feature_dim() != dim || cfg.feature_dim != dim) {
    throw std::invalid_argument("oim_grad_x: feature dimension mismatch");
  }
  if (target >= scores.p.size()) {
    throw std::out_of_range("oim_grad_x: target class-id out of range");
  }
  if (!(scores.p[target] > 0.0)) {
    throw DegenerateProbabilityError("oim_grad_x: target probability is zero");
  }

  Vec grad(dim, 0.0);
  for (std::size_t j = 0; j < scores.p.size(); ++j) {
    if (scores.p[j] != 0.0) axpy(scores.p[j], lut.column(j), grad);
  }
  for (std::size_t k = 0; k < scores.q.size(); ++k) {
    if (scores.q[k] != 0.0) axpy(scores.q[k], queue.entry(k), grad);
  }
  axpy(-1.0, lut.column(target), grad);
  const double inv_tau = 1.0 / cfg.tau;
  for (double& g : grad) g *= inv_tau;
  return grad;
}

std::vector<std::size_t> subsample_indices(Rng& rng, std::size_t total,
                                           std::size_t keep,
                                           std::optional<std::size_t> must_include) {
  if (keep > total) {
    throw std::invalid_argument("subsample_indices: keep exceeds total");
  }
  if (must_include) {
    if (*must_include >= total) {
      throw std::invalid_argument("subsample_indices: must_include out of range");
    }
    if (keep == 0) {
      throw std::invalid_argument("subsample_indices: keep must be >= 1 with must_include");
    }
  }

  std::vector<std::size_t> pool;
  pool.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    if (must_include && i == *must_include) continue;
    pool.push_back(i);
  }

  const std::size_t draw = must_include ? keep - 1 : keep;
  // partial Fisher-Yates: the first `draw` slots become the sample
  for (std::size_t i = 0; i < draw; ++i) {
    const std::size_t j = i + rng.uniform_index(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  std::vector<std::size_t> result(pool.begin(), pool.begin() + draw);
  if (must_include) result.push_back(*must_include);
  std::sort(result.begin(), result.end());
  return result;
}

}  // namespace oim

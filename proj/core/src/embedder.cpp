#include "oim/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "oim/errors.hpp"

namespace oim {

EmbedderParams EmbedderParams::init(std::size_t out_dim, std::size_t in_dim,
                                    Rng& rng) {
  if (out_dim == 0 || in_dim == 0) {
    throw std::invalid_argument("EmbedderParams::init: dimensions must be positive");
  }
  const double a = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  EmbedderParams params{Matrix(out_dim, in_dim)};
  for (double& w : params.weight.data()) w = rng.uniform(-a, a);
  return params;
}

Vec embed_forward(std::span<const double> raw, const EmbedderParams& params,
                  EmbedCache* cache) {
  if (raw.size() != params.in_dim()) {
    throw std::invalid_argument("embed_forward: raw dimension mismatch");
  }
  Vec y = matvec(params.weight, raw);
  const double norm = l2_norm(y);
  if (norm < kZeroNormEps) {
    throw ZeroNormError("embed_forward: pre-normalization vector has zero norm");
  }
  Vec z(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) z[i] = y[i] / norm;
  if (cache != nullptr) {
    cache->raw.assign(raw.begin(), raw.end());
    cache->pre_norm = std::move(y);
    cache->norm = norm;
    cache->z = z;
  }
  return z;
}

EmbedGrads embed_backward(const EmbedCache& cache, std::span<const double> dz,
                          const EmbedderParams& params) {
  if (dz.size() != cache.z.size() || cache.z.size() != params.out_dim() ||
      cache.raw.size() != params.in_dim()) {
    throw std::invalid_argument("embed_backward: shape mismatch");
  }
  const double radial = dot(cache.z, dz);
  Vec dy(dz.size());
  for (std::size_t i = 0; i < dz.size(); ++i) {
    dy[i] = (dz[i] - radial * cache.z[i]) / cache.norm;
  }
  EmbedGrads grads{Matrix(params.out_dim(), params.in_dim()), Vec()};
  add_outer(grads.dweight, dy, cache.raw);
  grads.draw = matvec_transposed(params.weight, dy);
  return grads;
}

SoftmaxClassifierParams SoftmaxClassifierParams::init(std::size_t num_classes,
                                                      std::size_t dim, Rng& rng) {
  if (num_classes == 0 || dim == 0) {
    throw std::invalid_argument("SoftmaxClassifierParams::init: dimensions must be positive");
  }
  const double a = std::sqrt(6.0 / static_cast<double>(dim + num_classes));
  SoftmaxClassifierParams params{Matrix(num_classes, dim), Vec(num_classes, 0.0)};
  for (double& w : params.weight.data()) w = rng.uniform(-a, a);
  return params;
}

SoftmaxLossResult softmax_cls_loss(std::span<const double> z, std::size_t target,
                                   const SoftmaxClassifierParams& params) {
  const std::size_t num_classes = params.num_classes();
  if (target >= num_classes) {
    throw std::out_of_range("softmax_cls_loss: target class-id out of range");
  }
  if (z.size() != params.weight.cols() || params.bias.size() != num_classes) {
    throw std::invalid_argument("softmax_cls_loss: shape mismatch");
  }
  Vec logits = matvec(params.weight, z);
  for (std::size_t c = 0; c < num_classes; ++c) logits[c] += params.bias[c];

  const double max_logit = *std::max_element(logits.begin(), logits.end());
  Vec probs(num_classes);
  double denom = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    probs[c] = std::exp(logits[c] - max_logit);
    denom += probs[c];
  }
  for (double& p : probs) p /= denom;

  SoftmaxLossResult result;
  result.loss = std::log(denom) - (logits[target] - max_logit);
  result.probs = probs;

  Vec dlogits = probs;
  dlogits[target] -= 1.0;
  result.dz = matvec_transposed(params.weight, dlogits);
  result.dweight = Matrix(num_classes, z.size());
  add_outer(result.dweight, dlogits, z);
  result.dbias = std::move(dlogits);
  return result;
}

void sgd_step(Matrix& param, const Matrix& grad, Matrix& velocity, double lr,
              double momentum) {
  if (!param.same_shape(grad) || !param.same_shape(velocity)) {
    throw std::invalid_argument("sgd_step: shape mismatch");
  }
  if (!all_finite(grad.data())) {
    throw std::invalid_argument("sgd_step: non-finite gradient entries");
  }
  for (std::size_t i = 0; i < param.data().size(); ++i) {
    velocity.data()[i] = momentum * velocity.data()[i] + grad.data()[i];
    param.data()[i] -= lr * velocity.data()[i];
  }
}

void sgd_step(Vec& param, const Vec& grad, Vec& velocity, double lr,
              double momentum) {
  if (param.size() != grad.size() || param.size() != velocity.size()) {
    throw std::invalid_argument("sgd_step: shape mismatch");
  }
  if (!all_finite(grad)) {
    throw std::invalid_argument("sgd_step: non-finite gradient entries");
  }
  for (std::size_t i = 0; i < param.size(); ++i) {
    velocity[i] = momentum * velocity[i] + grad[i];
    param[i] -= lr * velocity[i];
  }
}

}  // namespace oim

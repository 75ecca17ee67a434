#ifndef OIM_EMBEDDER_HPP_
#define OIM_EMBEDDER_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "oim/matrix.hpp"
#include "oim/rng.hpp"
#include "oim/vecmath.hpp"

namespace oim {

// Linear projection into the L2-normalized id-feat subspace. No bias: the
// output direction is scale-invariant, so a bias adds nothing here.
struct EmbedderParams {
  Matrix weight;  // out_dim x in_dim

  std::size_t out_dim() const { return weight.rows(); }
  std::size_t in_dim() const { return weight.cols(); }

  // Entries uniform in [-a, a], a = sqrt(6 / (in_dim + out_dim)).
  static EmbedderParams init(std::size_t out_dim, std::size_t in_dim, Rng& rng);

  friend bool operator==(const EmbedderParams&, const EmbedderParams&) = default;
};

struct EmbedCache {
  Vec raw;       // input
  Vec pre_norm;  // y = W * raw
  double norm;   // ||y||
  Vec z;         // y / ||y||
};

// z = normalize(W * raw). Fills cache for the backward pass when given.
Vec embed_forward(std::span<const double> raw, const EmbedderParams& params,
                  EmbedCache* cache = nullptr);

struct EmbedGrads {
  Matrix dweight;
  Vec draw;
};

// Backprop through normalization and projection:
//   dy = (dz - (z . dz) z) / ||y||,  dW = dy raw^T,  draw = W^T dy.
EmbedGrads embed_backward(const EmbedCache& cache, std::span<const double> dz,
                          const EmbedderParams& params);

// Parametric baseline: a conventional classifier over the embedded features.
struct SoftmaxClassifierParams {
  Matrix weight;  // num_classes x dim
  Vec bias;       // num_classes

  std::size_t num_classes() const { return weight.rows(); }

  static SoftmaxClassifierParams init(std::size_t num_classes, std::size_t dim,
                                      Rng& rng);

  friend bool operator==(const SoftmaxClassifierParams&,
                         const SoftmaxClassifierParams&) = default;
};

struct SoftmaxLossResult {
  double loss;
  Vec probs;       // softmax over logits
  Vec dz;          // gradient w.r.t. the input feature
  Matrix dweight;
  Vec dbias;
};

// Cross-entropy over logits W z + b, with gradients for z and (W, b).
SoftmaxLossResult softmax_cls_loss(std::span<const double> z, std::size_t target,
                                   const SoftmaxClassifierParams& params);

// v <- momentum * v + g;  p <- p - lr * v. Throws on non-finite gradients.
void sgd_step(Matrix& param, const Matrix& grad, Matrix& velocity, double lr,
              double momentum);
void sgd_step(Vec& param, const Vec& grad, Vec& velocity, double lr,
              double momentum);

// Velocity buffers mirroring the trainable tensors, plus the step settings.
struct OptimizerState {
  double learning_rate = 0.0;
  double momentum = 0.9;
  Matrix vel_embed;       // mirrors EmbedderParams::weight
  Matrix vel_cls_weight;  // mirrors classifier weight (softmax modes only)
  Vec vel_cls_bias;

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

}  // namespace oim

#endif  // OIM_EMBEDDER_HPP_

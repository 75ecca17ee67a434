#ifndef OIM_LOSS_HPP_
#define OIM_LOSS_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "oim/buffers.hpp"
#include "oim/rng.hpp"
#include "oim/vecmath.hpp"

namespace oim {

struct OimConfig {
  double tau = 0.1;                  // temperature
  double gamma = 0.5;                // lookup-table momentum
  std::size_t queue_capacity = 5000; // Q
  std::size_t feature_dim = 256;     // D
  std::size_t num_labeled = 0;       // L
  std::optional<std::size_t> subsample_labeled;
  std::optional<std::size_t> subsample_unlabeled;

  void validate() const;  // throws std::invalid_argument

  friend bool operator==(const OimConfig&, const OimConfig&) = default;
};

// Denominator subset for the sub-sampled approximation. Index lists must be
// sorted and duplicate-free (subsample_indices returns them that way).
struct SubsetSelection {
  std::vector<std::size_t> labeled;
  std::vector<std::size_t> unlabeled;
};

// Output of a forward pass. p and q are a joint softmax over the selected
// logits; excluded entries carry -inf logits and exactly zero probability.
struct MatchScores {
  std::vector<double> p;                 // length L
  std::vector<double> q;                 // length = active queue size
  std::vector<double> logits_labeled;    // inner products / tau, -inf if excluded
  std::vector<double> logits_unlabeled;
};

// Matching probabilities of x against every lookup-table column and queue
// entry (or the selected subset). x must have dimension D; it does not have
// to be unit norm, so the loss is differentiable in the ambient space.
MatchScores oim_forward(std::span<const double> x, const LookupTable& lut,
                        const CircularQueue& queue, const OimConfig& cfg,
                        const SubsetSelection* subset = nullptr);

// Minimized negative log-likelihood -log p_t.
double oim_loss(const MatchScores& scores, std::size_t target);

// Gradient of -log p_t with respect to x:
//   (1/tau) * (sum_j p_j v_j + sum_k q_k u_k - v_t).
// The buffers are constants; no gradient flows into them.
Vec oim_grad_x(const MatchScores& scores, std::size_t target,
               const LookupTable& lut, const CircularQueue& queue,
               const OimConfig& cfg);

// keep distinct indices drawn uniformly from [0, total); must_include, when
// given, is always part of the result. Sorted ascending.
std::vector<std::size_t> subsample_indices(
    Rng& rng, std::size_t total, std::size_t keep,
    std::optional<std::size_t> must_include = std::nullopt);

}  // namespace oim

#endif  // OIM_LOSS_HPP_

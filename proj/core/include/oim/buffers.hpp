#ifndef OIM_BUFFERS_HPP_
#define OIM_BUFFERS_HPP_

#include <cstddef>
#include <deque>
#include <span>
#include <vector>

#include "oim/vecmath.hpp"

namespace oim {

// External buffer of one running feature per labeled identity. Columns start
// all-zeros (never yet updated) and are unit L2 norm once touched. The
// column count is fixed at construction. Not a learned parameter: gradients
// never flow into it.
class LookupTable {
 public:
  LookupTable(std::size_t feature_dim, std::size_t num_classes);

  // Restores saved contents. Every column must be all-zero or unit norm.
  static LookupTable from_columns(std::size_t feature_dim,
                                  std::vector<Vec> columns);

  std::size_t feature_dim() const { return dim_; }
  std::size_t num_classes() const { return columns_.size(); }

  const std::vector<Vec>& columns() const { return columns_; }
  const Vec& column(std::size_t t) const;
  bool column_initialized(std::size_t t) const;

  // column t <- normalize(gamma * v_t + (1 - gamma) * x).
  // Returns false (and leaves the column untouched) when the blend cancels
  // to norm below 1e-12. x must be unit norm, gamma in [0, 1].
  bool update(std::size_t t, std::span<const double> x, double gamma);

  friend bool operator==(const LookupTable&, const LookupTable&) = default;

 private:
  std::size_t dim_;
  std::vector<Vec> columns_;
};

// Fixed-capacity FIFO of recent unlabeled-identity features. Pushing past
// capacity evicts the oldest entries; every stored entry is unit norm.
class CircularQueue {
 public:
  CircularQueue(std::size_t feature_dim, std::size_t capacity);

  // Restores saved contents, oldest first. Entries must be unit norm.
  static CircularQueue from_entries(std::size_t feature_dim,
                                    std::size_t capacity,
                                    std::vector<Vec> entries);

  std::size_t feature_dim() const { return dim_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  // i = 0 is the oldest surviving entry.
  const Vec& entry(std::size_t i) const;

  void push(Vec feature);
  void push(std::span<const Vec> features);

  friend bool operator==(const CircularQueue&, const CircularQueue&) = default;

 private:
  std::size_t dim_;
  std::size_t capacity_;
  std::deque<Vec> entries_;
};

}  // namespace oim

#endif  // OIM_BUFFERS_HPP_

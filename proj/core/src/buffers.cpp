#include "oim/buffers.hpp"

#include <stdexcept>

namespace oim {

LookupTable::LookupTable(std::size_t feature_dim, std::size_t num_classes)
    : dim_(feature_dim), columns_(num_classes, Vec(feature_dim, 0.0)) {
  if (feature_dim == 0) {
    throw std::invalid_argument("LookupTable: feature_dim must be positive");
  }
  if (num_classes == 0) {
    throw std::invalid_argument("LookupTable: num_classes must be positive");
  }
}

LookupTable LookupTable::from_columns(std::size_t feature_dim,
                                      std::vector<Vec> columns) {
  LookupTable lut(feature_dim, columns.size());
  for (const Vec& column : columns) {
    if (column.size() != feature_dim) {
      throw std::invalid_argument(
          "LookupTable::from_columns: column dimension mismatch");
    }
    bool all_zero = true;
    for (double x : column) {
      if (x != 0.0) {
        all_zero = false;
        break;
      }
    }
    if (!all_zero && !is_unit(column)) {
      throw std::invalid_argument(
          "LookupTable::from_columns: column must be zero or unit norm");
    }
  }
  lut.columns_ = std::move(columns);
  return lut;
}

const Vec& LookupTable::column(std::size_t t) const {
  if (t >= columns_.size()) {
    throw std::out_of_range("LookupTable::column: class-id out of range");
  }
  return columns_[t];
}

bool LookupTable::column_initialized(std::size_t t) const {
  for (double x : column(t)) {
    if (x != 0.0) return true;
  }
  return false;
}

bool LookupTable::update(std::size_t t, std::span<const double> x, double gamma) {
  if (t >= columns_.size()) {
    throw std::out_of_range("LookupTable::update: class-id out of range");
  }
  if (x.size() != dim_) {
    throw std::invalid_argument("LookupTable::update: feature dimension mismatch");
  }
  if (!is_unit(x)) {
    throw std::invalid_argument("LookupTable::update: feature must be unit norm");
  }
  if (gamma < 0.0 || gamma > 1.0) {
    throw std::invalid_argument("LookupTable::update: gamma must be in [0, 1]");
  }
  Vec blended(dim_);
  const Vec& v = columns_[t];
  for (std::size_t i = 0; i < dim_; ++i) {
    blended[i] = gamma * v[i] + (1.0 - gamma) * x[i];
  }
  if (l2_norm(blended) < kZeroNormEps) {
    return false;  // exact cancellation: reported, column left unchanged
  }
  normalize(blended);
  columns_[t] = std::move(blended);
  return true;
}

CircularQueue::CircularQueue(std::size_t feature_dim, std::size_t capacity)
    : dim_(feature_dim), capacity_(capacity) {
  if (feature_dim == 0) {
    throw std::invalid_argument("CircularQueue: feature_dim must be positive");
  }
}

CircularQueue CircularQueue::from_entries(std::size_t feature_dim,
                                          std::size_t capacity,
                                          std::vector<Vec> entries) {
  if (entries.size() > capacity) {
    throw std::invalid_argument(
        "CircularQueue::from_entries: more entries than capacity");
  }
  CircularQueue queue(feature_dim, capacity);
  for (Vec& entry : entries) {
    if (entry.size() != feature_dim) {
      throw std::invalid_argument(
          "CircularQueue::from_entries: entry dimension mismatch");
    }
    if (!is_unit(entry)) {
      throw std::invalid_argument(
          "CircularQueue::from_entries: entry must be unit norm");
    }
    queue.entries_.push_back(std::move(entry));
  }
  return queue;
}

const Vec& CircularQueue::entry(std::size_t i) const {
  if (i >= entries_.size()) {
    throw std::out_of_range("CircularQueue::entry: index out of range");
  }
  return entries_[i];
}

void CircularQueue::push(Vec feature) {
  if (feature.size() != dim_) {
    throw std::invalid_argument("CircularQueue::push: feature dimension mismatch");
  }
  if (!is_unit(feature)) {
    throw std::invalid_argument("CircularQueue::push: feature must be unit norm");
  }
  entries_.push_back(std::move(feature));
  while (entries_.size() > capacity_) entries_.pop_front();
}

void CircularQueue::push(std::span<const Vec> features) {
  // validate everything up front so a bad feature leaves the queue untouched
  for (const Vec& f : features) {
    if (f.size() != dim_) {
      throw std::invalid_argument("CircularQueue::push: feature dimension mismatch");
    }
    if (!is_unit(f)) {
      throw std::invalid_argument("CircularQueue::push: feature must be unit norm");
    }
  }
  for (const Vec& f : features) {
    entries_.push_back(f);
    while (entries_.size() > capacity_) entries_.pop_front();
  }
}

}  // namespace oim

#pragma once

#include <cstddef>
#include <vector>

namespace dimorph {

/// Binary indexed tree over non-negative weights with point updates, prefix sums and
/// inverse-CDF search, all O(log n).
class FenwickTree {
 public:
  FenwickTree() = default;
  explicit FenwickTree(std::size_t capacity) { reset(capacity); }

  void reset(std::size_t capacity) {
    values_.assign(capacity, 0.0);
    tree_.assign(capacity + 1, 0.0);
    total_ = 0.0;
  }

  std::size_t capacity() const { return values_.size(); }
  double value(std::size_t i) const { return values_[i]; }
  double total() const { return total_; }

  void set(std::size_t i, double v) {
    const double delta = v - values_[i];
    values_[i] = v;
    total_ += delta;
    for (std::size_t k = i + 1; k < tree_.size(); k += k & (~k + 1)) tree_[k] += delta;
  }

  /// Writes a value without touching the tree; call rebuild() afterwards.
  void assign_raw(std::size_t i, double v) { values_[i] = v; }

  /// Sum of values[0..i).
  double prefix(std::size_t i) const {
    double s = 0.0;
    for (std::size_t k = i; k > 0; k -= k & (~k + 1)) s += tree_[k];
    return s;
  }

  /// Smallest index i with prefix(i + 1) > u; u is expected in [0, total()).
  std::size_t find(double u) const {
    std::size_t pos = 0;
    std::size_t step = 1;
    while (step * 2 < tree_.size()) step *= 2;
    for (; step > 0; step /= 2) {
      const std::size_t next = pos + step;
      if (next < tree_.size() && tree_[next] <= u) {
        pos = next;
        u -= tree_[next];
      }
    }
    return pos < values_.size() ? pos : values_.size() - 1;
  }

  /// Rebuilds the tree from values in O(n), grown to at least `capacity`.
  void rebuild(std::size_t capacity) {
    if (capacity > values_.size()) values_.resize(capacity, 0.0);
    tree_.assign(values_.size() + 1, 0.0);
    total_ = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) {
      total_ += values_[i];
      std::size_t k = i + 1;
      tree_[k] += values_[i];
      const std::size_t parent = k + (k & (~k + 1));
      if (parent < tree_.size()) tree_[parent] += tree_[k];
    }
  }

 private:
  std::vector<double> values_;
  std::vector<double> tree_;
  double total_ = 0.0;
};

}  // namespace dimorph

#pragma once

#include <bit>
#include <cstddef>
#include <span>
#include <vector>

#include "siggame/error.hpp"

namespace siggame {

// A nonnegative weight vector supporting O(1) uniform discounting, O(log n)
// single-entry reinforcement, and O(log n) proportional sampling.
//
// Stored as weight[i] = scale * raw[i]. Discounting only touches the scale;
// a reinforcement of `amount` adds amount / scale to raw[i]. A Fenwick tree
// over raw gives prefix sums for sampling. When the scale underflows past
// kRescaleBelow the raw values are folded back and the tree rebuilt.
class DiscountedWeights {
 public:
  static constexpr double kRescaleBelow = 1e-150;

  DiscountedWeights() = default;
  explicit DiscountedWeights(std::span<const double> weights) { assign(weights); }

  void assign(std::span<const double> weights) {
    raw_.assign(weights.begin(), weights.end());
    for (double w : raw_)
      if (!(w >= 0.0)) throw InvalidArgument("weights must be nonnegative");
    scale_ = 1.0;
    rebuild();
  }

  std::size_t size() const { return raw_.size(); }
  double weight(std::size_t i) const { return scale_ * raw_[i]; }
  double total() const { return scale_ * raw_total(); }

  void discount(double factor) {
    if (factor == 1.0) return;
    scale_ *= factor;
    if (scale_ < kRescaleBelow) {
      for (double& r : raw_) r *= scale_;
      scale_ = 1.0;
      rebuild();
    }
  }

  void add(std::size_t i, double amount) {
    if (amount == 0.0) return;
    const double delta = amount / scale_;
    raw_[i] += delta;
    for (std::size_t k = i + 1; k <= raw_.size(); k += k & (~k + 1)) tree_[k] += delta;
  }

  // Index drawn with probability weight[i] / total, for u uniform in [0, 1).
  // Never returns a zero-weight index.
  std::size_t sample(double u) const {
    const std::size_t n = raw_.size();
    double target = u * raw_total();
    std::size_t pos = 0;
    for (std::size_t step = std::bit_floor(n); step > 0; step >>= 1) {
      const std::size_t next = pos + step;
      if (next <= n && tree_[next] <= target) {
        pos = next;
        target -= tree_[next];
      }
    }
    // Accumulated rounding in the tree can land on an empty slot or past the end.
    if (pos >= n) pos = n - 1;
    if (raw_[pos] == 0.0) {
      std::size_t fwd = pos;
      while (fwd < n && raw_[fwd] == 0.0) ++fwd;
      if (fwd < n) return fwd;
      while (pos > 0 && raw_[pos] == 0.0) --pos;
    }
    return pos;
  }

  void export_to(std::span<double> out) const {
    for (std::size_t i = 0; i < raw_.size(); ++i) out[i] = scale_ * raw_[i];
  }
  std::vector<double> values() const {
    std::vector<double> out(raw_.size());
    export_to(out);
    return out;
  }

 private:
  double raw_total() const {
    double s = 0.0;
    for (std::size_t k = raw_.size(); k > 0; k -= k & (~k + 1)) s += tree_[k];
    return s;
  }

  void rebuild() {
    const std::size_t n = raw_.size();
    tree_.assign(n + 1, 0.0);
    for (std::size_t i = 1; i <= n; ++i) {
      tree_[i] += raw_[i - 1];
      const std::size_t parent = i + (i & (~i + 1));
      if (parent <= n) tree_[parent] += tree_[i];
    }
  }

  std::vector<double> raw_;
  std::vector<double> tree_;
  double scale_ = 1.0;
};

}  // namespace siggame

#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "meanfield/numerics.hpp"

namespace meanfield {

/// Uniform axis with `size` nodes from `lo` to `hi` inclusive.
struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  int size = 16;

  double step() const { return (hi - lo) / (size - 1); }
  double node(int i) const { return lo + step() * i; }
  /// Trapezoidal quadrature weight of node i.
  double weight(int i) const { return (i == 0 || i == size - 1) ? 0.5 * step() : step(); }

  bool operator==(const Axis&) const = default;
};

inline constexpr int kMinAxisNodes = 16;

/// Tensor-product grid over a box, row-major with the last axis fastest.
/// Immutable; cell weights and node coordinates are precomputed.
class Grid {
 public:
  explicit Grid(std::vector<Axis> axes);

  static std::shared_ptr<const Grid> make(std::vector<Axis> axes);

  int dim() const { return static_cast<int>(axes_.size()); }
  std::size_t cells() const { return cells_; }
  const std::vector<Axis>& axes() const { return axes_; }
  const Axis& axis(int k) const { return axes_[k]; }
  std::size_t stride(int k) const { return strides_[k]; }

  /// Product of trapezoid weights, one per cell.
  std::span<const double> weights() const { return weights_; }
  /// |x|^2 at every cell.
  std::span<const double> norm2() const { return norm2_; }
  /// Coordinate of cell `index` along axis `k`.
  double coord(std::size_t index, int k) const {
    return axes_[k].node(static_cast<int>((index / strides_[k]) % axes_[k].size));
  }
  int axis_index(std::size_t index, int k) const {
    return static_cast<int>((index / strides_[k]) % axes_[k].size);
  }
  Vector point(std::size_t index) const;

  /// Grid made of axes [first, first + count).
  Grid sub_grid(int first, int count) const;

  Vector lo() const;
  Vector hi() const;

  bool operator==(const Grid& other) const { return axes_ == other.axes_; }

 private:
  std::vector<Axis> axes_;
  std::vector<std::size_t> strides_;
  std::size_t cells_ = 0;
  std::vector<double> weights_;
  std::vector<double> norm2_;
};

/// Box [lo, hi] with `nodes` points per axis.
std::shared_ptr<const Grid> make_box_grid(const Vector& lo, const Vector& hi, int nodes);
std::shared_ptr<const Grid> make_box_grid(const Vector& lo, const Vector& hi, std::span<const int> nodes);

/// Default nodes per axis for a grid of dimension n: 1024, 192, 96.
int default_resolution(int n);

}  // namespace meanfield

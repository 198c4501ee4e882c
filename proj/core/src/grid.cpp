#include "meanfield/grid.hpp"

#include <string>

#include "meanfield/error.hpp"

namespace meanfield {

Grid::Grid(std::vector<Axis> axes) : axes_(std::move(axes)) {
  if (axes_.empty()) throw Error(ErrorCode::kInvalidArgument, "grid needs at least one axis");
  for (const Axis& a : axes_) {
    if (a.size < kMinAxisNodes) {
      throw Error(ErrorCode::kInvalidArgument,
                  "grid axes need at least " + std::to_string(kMinAxisNodes) + " nodes");
    }
    if (!(a.lo < a.hi)) throw Error(ErrorCode::kInvalidArgument, "grid box needs lo < hi on every axis");
  }
  strides_.assign(axes_.size(), 1);
  cells_ = 1;
  for (int k = dim() - 1; k >= 0; --k) {
    strides_[k] = cells_;
    cells_ *= static_cast<std::size_t>(axes_[k].size);
  }
  weights_.assign(cells_, 1.0);
  norm2_.assign(cells_, 0.0);
  for (std::size_t i = 0; i < cells_; ++i) {
    double w = 1.0;
    double r2 = 0.0;
    for (int k = 0; k < dim(); ++k) {
      const int j = axis_index(i, k);
      w *= axes_[k].weight(j);
      const double x = axes_[k].node(j);
      r2 += x * x;
    }
    weights_[i] = w;
    norm2_[i] = r2;
  }
}

std::shared_ptr<const Grid> Grid::make(std::vector<Axis> axes) {
  return std::make_shared<const Grid>(std::move(axes));
}

Vector Grid::point(std::size_t index) const {
  Vector p(dim());
  for (int k = 0; k < dim(); ++k) p[k] = coord(index, k);
  return p;
}

Grid Grid::sub_grid(int first, int count) const {
  if (first < 0 || count < 1 || first + count > dim()) {
    throw Error(ErrorCode::kInvalidArgument, "sub-grid axis range out of bounds");
  }
  return Grid(std::vector<Axis>(axes_.begin() + first, axes_.begin() + first + count));
}

Vector Grid::lo() const {
  Vector v(dim());
  for (int k = 0; k < dim(); ++k) v[k] = axes_[k].lo;
  return v;
}

Vector Grid::hi() const {
  Vector v(dim());
  for (int k = 0; k < dim(); ++k) v[k] = axes_[k].hi;
  return v;
}

std::shared_ptr<const Grid> make_box_grid(const Vector& lo, const Vector& hi, int nodes) {
  std::vector<int> n(static_cast<std::size_t>(lo.size()), nodes);
  return make_box_grid(lo, hi, n);
}

std::shared_ptr<const Grid> make_box_grid(const Vector& lo, const Vector& hi, std::span<const int> nodes) {
  if (lo.size() != hi.size() || static_cast<std::size_t>(lo.size()) != nodes.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "box corners and node counts disagree in dimension");
  }
  std::vector<Axis> axes;
  for (Eigen::Index k = 0; k < lo.size(); ++k) axes.push_back({lo[k], hi[k], nodes[k]});
  return Grid::make(std::move(axes));
}

int default_resolution(int n) {
  switch (n) {
    case 1: return 1024;
    case 2: return 192;
    case 3: return 96;
    default:
      throw Error(ErrorCode::kInvalidArgument, "grid path supports dimensions 1 to 3 only");
  }
}

}  // namespace meanfield

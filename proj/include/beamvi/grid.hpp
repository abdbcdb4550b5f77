#pragma once

// Dense storage of the discrete field g_a^j on a uniform (t, s) mesh. Row j
// is the time slice g^j, column a the space slice g_a.

#include <algorithm>
#include <cstddef>
#include <ranges>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "beamvi/liegroup.hpp"

namespace beamvi {

using TimeSlice = std::span<const GroupElement>;

/// Column a of a row-major field: a strided, read-only view.
class SpaceSlice {
 public:
  SpaceSlice(const GroupElement* base, int size, int stride) : base_(base), size_(size), stride_(stride) {}

  int size() const noexcept { return size_; }
  const GroupElement& operator[](int j) const { return base_[static_cast<std::ptrdiff_t>(j) * stride_]; }

  auto elements() const {
    return std::views::iota(0, size_) | std::views::transform([s = *this](int j) -> const GroupElement& { return s[j]; });
  }
  std::vector<GroupElement> to_vector() const {
    std::vector<GroupElement> out;
    out.reserve(size_);
    for (int j = 0; j < size_; ++j) out.push_back((*this)[j]);
    return out;
  }

 private:
  const GroupElement* base_;
  int size_;
  int stride_;
};

class DiscreteField {
 public:
  DiscreteField() = default;
  DiscreteField(int rows, int cols, double dt, double ds)
      : rows_(rows), cols_(cols), dt_(dt), ds_(ds), nodes_(static_cast<std::size_t>(rows) * cols) {
    if (rows < 1 || cols < 1) throw IndexOutOfRange("field must have at least one row and one column");
  }

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  double dt() const noexcept { return dt_; }
  double ds() const noexcept { return ds_; }

  GroupElement& operator()(int j, int a) { return nodes_[index(j, a)]; }
  const GroupElement& operator()(int j, int a) const { return nodes_[index(j, a)]; }

  const GroupElement& at(int j, int a) const {
    check(j, a);
    return (*this)(j, a);
  }
  GroupElement& at(int j, int a) {
    check(j, a);
    return (*this)(j, a);
  }

  TimeSlice row(int j) const {
    check(j, 0);
    return {nodes_.data() + index(j, 0), static_cast<std::size_t>(cols_)};
  }
  std::span<GroupElement> row(int j) {
    check(j, 0);
    return {nodes_.data() + index(j, 0), static_cast<std::size_t>(cols_)};
  }
  SpaceSlice column(int a) const {
    check(0, a);
    return {nodes_.data() + a, rows_, cols_};
  }

  void set_row(int j, std::span<const GroupElement> values) {
    if (static_cast<int>(values.size()) != cols_) throw IndexOutOfRange("row length mismatch");
    std::ranges::copy(values, row(j).begin());
  }
  void set_column(int a, std::span<const GroupElement> values) {
    if (static_cast<int>(values.size()) != rows_) throw IndexOutOfRange("column length mismatch");
    for (int j = 0; j < rows_; ++j) at(j, a) = values[j];
  }

  /// max over nodes of |R^T R - I|.
  double max_orthogonality_error() const {
    double e = 0.0;
    for (const auto& g : nodes_) e = std::max(e, g.rot.orthogonality_error());
    return e;
  }

  const std::vector<GroupElement>& nodes() const noexcept { return nodes_; }

 private:
  std::size_t index(int j, int a) const { return static_cast<std::size_t>(j) * cols_ + a; }
  void check(int j, int a) const {
    if (j < 0 || j >= rows_ || a < 0 || a >= cols_)
      throw IndexOutOfRange("node (" + std::to_string(j) + ", " + std::to_string(a) + ") outside " +
                            std::to_string(rows_) + " x " + std::to_string(cols_) + " field");
  }

  int rows_ = 0;
  int cols_ = 0;
  double dt_ = 0;
  double ds_ = 0;
  std::vector<GroupElement> nodes_;
};

/// The same field seen with time and space exchanged: (i, k) -> (k, i),
/// dt <-> ds. No data is copied.
class TransposedView {
 public:
  explicit TransposedView(const DiscreteField& f) : f_(&f) {}

  int rows() const noexcept { return f_->cols(); }
  int cols() const noexcept { return f_->rows(); }
  double dt() const noexcept { return f_->ds(); }
  double ds() const noexcept { return f_->dt(); }
  const GroupElement& operator()(int i, int k) const { return (*f_)(k, i); }
  const GroupElement& at(int i, int k) const { return f_->at(k, i); }
  SpaceSlice column(int k) const {
    const TimeSlice r = f_->row(k);
    return {r.data(), static_cast<int>(r.size()), 1};
  }
  const DiscreteField& base() const noexcept { return *f_; }

 private:
  const DiscreteField* f_;
};

inline TransposedView repackage(const DiscreteField& f) { return TransposedView(f); }
inline const DiscreteField& repackage(const TransposedView& v) { return v.base(); }

template <class F>
concept FieldLike = requires(const F& f, int i) {
  { f.rows() } -> std::convertible_to<int>;
  { f.cols() } -> std::convertible_to<int>;
  { f.dt() } -> std::convertible_to<double>;
  { f.ds() } -> std::convertible_to<double>;
  { f(i, i) } -> std::convertible_to<const GroupElement&>;
};

/// Range of all time slices (rows) of a field.
inline auto time_slices(const DiscreteField& f) {
  return std::views::iota(0, f.rows()) | std::views::transform([&f](int j) { return f.row(j); });
}
/// Range of all space slices (columns) of a field.
inline auto space_slices(const DiscreteField& f) {
  return std::views::iota(0, f.cols()) | std::views::transform([&f](int a) { return f.column(a); });
}

/// xi_a^j = tau^{-1}((g_a^j)^{-1} g_a^{j+1}) / dt.
template <FieldLike F>
AlgebraVector xi_at(const F& f, int j, int a) {
  if (j < 0 || j + 1 >= f.rows() || a < 0 || a >= f.cols())
    throw IndexOutOfRange("xi_at(" + std::to_string(j) + ", " + std::to_string(a) + ") needs j + 1 < rows");
  return tau_inv_se3(relative(f(j, a), f(j + 1, a))) / f.dt();
}

/// eta_a^j = tau^{-1}((g_a^j)^{-1} g_{a+1}^j) / ds.
template <FieldLike F>
AlgebraVector eta_at(const F& f, int j, int a) {
  if (a < 0 || a + 1 >= f.cols() || j < 0 || j >= f.rows())
    throw IndexOutOfRange("eta_at(" + std::to_string(j) + ", " + std::to_string(a) + ") needs a + 1 < cols");
  return tau_inv_se3(relative(f(j, a), f(j, a + 1))) / f.ds();
}

/// Nodes g_0 = start, g_{k+1} = g_k tau(h x_k) for each x_k in `profile`.
inline std::vector<GroupElement> grow(const GroupElement& start, std::span<const AlgebraVector> profile, double h) {
  std::vector<GroupElement> out;
  out.reserve(profile.size() + 1);
  out.push_back(start);
  for (const auto& x : profile) out.push_back(compose(out.back(), tau_se3(h * x)));
  return out;
}

/// First two time slices: g^0 grown from g_0^0 by eta^0, g^1 grown from g_0^1 by eta^1.
inline std::pair<std::vector<GroupElement>, std::vector<GroupElement>> build_from_boundary_time(
    const GroupElement& g00, const GroupElement& g01, std::span<const AlgebraVector> eta0,
    std::span<const AlgebraVector> eta1, double ds) {
  if (eta0.size() != eta1.size()) throw IndexOutOfRange("initial strain profiles differ in length");
  return {grow(g00, eta0, ds), grow(g01, eta1, ds)};
}

/// First two space slices: g_0 grown from g_0^0 by xi_0, g_1 grown from g_1^0 by xi_1.
inline std::pair<std::vector<GroupElement>, std::vector<GroupElement>> build_from_boundary_space(
    const GroupElement& g00, const GroupElement& g10, std::span<const AlgebraVector> xi0,
    std::span<const AlgebraVector> xi1, double dt) {
  if (xi0.size() != xi1.size()) throw IndexOutOfRange("initial velocity profiles differ in length");
  return {grow(g00, xi0, dt), grow(g10, xi1, dt)};
}

}  // namespace beamvi

#pragma once

// SO(3)/SE(3) kernel: hat/vee, the Cayley retraction and its inverse, the
// right-trivialized derivative of tau and its dual, and the adjoint /
// coadjoint actions. Elements of se(3) and se(3)* are stored as R^6 with
// the angular triple first, i.e. (omega, gamma) and (mu, nu).

#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "beamvi/errors.hpp"

namespace beamvi {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// |1 + Tr(R)| below this is treated as the edge of the Cayley chart.
inline constexpr double kCayleyChartTolerance = 1e-10;

/// A 3x3 rotation matrix. Construction does not re-orthonormalize; use
/// orthogonality_error() to measure drift.
class Rotation {
 public:
  Rotation() : m_(Mat3::Identity()) {}
  explicit Rotation(const Mat3& m) : m_(m) {}

  static Rotation identity() { return Rotation(); }

  const Mat3& matrix() const noexcept { return m_; }
  Rotation transpose() const { return Rotation(m_.transpose()); }

  Rotation operator*(const Rotation& other) const { return Rotation(m_ * other.m_); }
  Vec3 operator*(const Vec3& v) const { return m_ * v; }

  /// max |(R^T R - I)_ij|
  double orthogonality_error() const {
    return (m_.transpose() * m_ - Mat3::Identity()).cwiseAbs().maxCoeff();
  }
  double determinant() const { return m_.determinant(); }

 private:
  Mat3 m_;
};

/// (Lambda, r) in SE(3).
struct GroupElement {
  Rotation rot;
  Vec3 pos = Vec3::Zero();

  static GroupElement identity() { return {}; }

  /// 4x4 homogeneous embedding.
  Mat4 matrix() const {
    Mat4 h = Mat4::Identity();
    h.topLeftCorner<3, 3>() = rot.matrix();
    h.topRightCorner<3, 1>() = pos;
    return h;
  }
  static GroupElement from_matrix(const Mat4& h) {
    return {Rotation(h.topLeftCorner<3, 3>()), h.topRightCorner<3, 1>()};
  }
};

/// Element of se(3): (angular; linear).
struct AlgebraVector {
  Vec6 v = Vec6::Zero();

  AlgebraVector() = default;
  explicit AlgebraVector(const Vec6& x) : v(x) {}
  AlgebraVector(const Vec3& ang, const Vec3& lin) { v << ang, lin; }

  static AlgebraVector zero() { return {}; }

  Vec3 ang() const { return v.head<3>(); }
  Vec3 lin() const { return v.tail<3>(); }

  AlgebraVector operator+(const AlgebraVector& o) const { return AlgebraVector(Vec6(v + o.v)); }
  AlgebraVector operator-(const AlgebraVector& o) const { return AlgebraVector(Vec6(v - o.v)); }
  AlgebraVector operator*(double s) const { return AlgebraVector(Vec6(v * s)); }
  AlgebraVector operator/(double s) const { return AlgebraVector(Vec6(v / s)); }
  friend AlgebraVector operator*(double s, const AlgebraVector& a) { return a * s; }

  bool is_finite() const { return v.allFinite(); }
};

/// Element of se(3)*: (angular momentum; linear momentum) or the matching
/// (moment; force) pair for spatial stresses.
struct CoAlgebraVector {
  Vec6 v = Vec6::Zero();

  CoAlgebraVector() = default;
  explicit CoAlgebraVector(const Vec6& x) : v(x) {}
  CoAlgebraVector(const Vec3& ang_mom, const Vec3& lin_mom) { v << ang_mom, lin_mom; }

  static CoAlgebraVector zero() { return {}; }

  Vec3 ang_mom() const { return v.head<3>(); }
  Vec3 lin_mom() const { return v.tail<3>(); }

  CoAlgebraVector operator+(const CoAlgebraVector& o) const { return CoAlgebraVector(Vec6(v + o.v)); }
  CoAlgebraVector operator-(const CoAlgebraVector& o) const { return CoAlgebraVector(Vec6(v - o.v)); }
  CoAlgebraVector operator-() const { return CoAlgebraVector(Vec6(-v)); }
  CoAlgebraVector operator*(double s) const { return CoAlgebraVector(Vec6(v * s)); }
  CoAlgebraVector operator/(double s) const { return CoAlgebraVector(Vec6(v / s)); }
  friend CoAlgebraVector operator*(double s, const CoAlgebraVector& a) { return a * s; }
  CoAlgebraVector& operator+=(const CoAlgebraVector& o) {
    v += o.v;
    return *this;
  }
  CoAlgebraVector& operator-=(const CoAlgebraVector& o) {
    v -= o.v;
    return *this;
  }

  bool is_finite() const { return v.allFinite(); }
};

/// Dot-product pairing <p, v>.
inline double pairing(const CoAlgebraVector& p, const AlgebraVector& x) { return p.v.dot(x.v); }

inline Mat3 hat(const Vec3& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return m;
}

inline Vec3 vee(const Mat3& m) { return {m(2, 1), m(0, 2), m(1, 0)}; }

/// 4x4 embedding of (omega, gamma) in se(3).
inline Mat4 hat(const AlgebraVector& x) {
  Mat4 m = Mat4::Zero();
  m.topLeftCorner<3, 3>() = hat(x.ang());
  m.topRightCorner<3, 1>() = x.lin();
  return m;
}

/// cay(w) = I + 4/(4+|w|^2) (w^ + w^2/2).
inline Rotation cay_so3(const Vec3& w) {
  const Mat3 wh = hat(w);
  const double c = 4.0 / (4.0 + w.squaredNorm());
  return Rotation(Mat3::Identity() + c * (wh + 0.5 * wh * wh));
}

/// cay^{-1}(R) = vee(2/(1+Tr R) (R - R^T)).
inline Vec3 cay_inv_so3(const Rotation& r) {
  const Mat3& m = r.matrix();
  const double denom = 1.0 + m.trace();
  if (!(std::abs(denom) >= kCayleyChartTolerance)) {
    std::ostringstream os;
    os << "cay^-1 undefined: 1 + Tr(R) = " << denom << " (rotation by +-pi)";
    throw NearPiRotation(os.str());
  }
  return vee((2.0 / denom) * (m - m.transpose()));
}

/// Cayley map of SE(3): (I4 - x^/2)^{-1} (I4 + x^/2) in closed form.
inline GroupElement tau_se3(const AlgebraVector& x) {
  const Vec3 w = x.ang();
  const double c = 4.0 / (4.0 + w.squaredNorm());
  const Mat3 pos_map = Mat3::Identity() + 0.5 * hat(w) + 0.25 * w * w.transpose();
  return {cay_so3(w), c * (pos_map * x.lin())};
}

/// tau^{-1}(Lambda, r) = (cay^{-1} Lambda, 2 (Lambda + I)^{-1} r). The linear
/// part is evaluated as (I - w^/2) r, which equals 2 (Lambda + I)^{-1} r for
/// Lambda = cay(w) and needs no matrix inverse.
inline AlgebraVector tau_inv_se3(const GroupElement& g) {
  const Vec3 w = cay_inv_so3(g.rot);
  return {w, Vec3(g.pos - 0.5 * w.cross(g.pos))};
}

/// Matrix of (d tau_x)^{-1} : R^6 -> R^6, the inverse right-trivialized
/// derivative of tau at x = (w, gamma):
///   [ I - w^/2 + w w^T/4        0     ]
///   [ -(I - w^/2) gamma^/2   I - w^/2 ]
inline Mat6 dtau_inv_se3(const AlgebraVector& x) {
  const Vec3 w = x.ang();
  const Mat3 a = Mat3::Identity() - 0.5 * hat(w);
  Mat6 d = Mat6::Zero();
  d.topLeftCorner<3, 3>() = a + 0.25 * w * w.transpose();
  d.bottomLeftCorner<3, 3>() = -0.5 * a * hat(x.lin());
  d.bottomRightCorner<3, 3>() = a;
  return d;
}

/// ((d tau_x)^{-1})^* p, i.e. dtau_inv_se3(x)^T p.
inline CoAlgebraVector dtau_inv_star(const AlgebraVector& x, const CoAlgebraVector& p) {
  return CoAlgebraVector(Vec6(dtau_inv_se3(x).transpose() * p.v));
}

inline GroupElement compose(const GroupElement& a, const GroupElement& b) {
  return {a.rot * b.rot, a.pos + a.rot * b.pos};
}

inline GroupElement inverse(const GroupElement& g) {
  const Rotation rt = g.rot.transpose();
  return {rt, Vec3(-(rt * g.pos))};
}

/// g1^{-1} g2 without forming the inverse explicitly.
inline GroupElement relative(const GroupElement& g1, const GroupElement& g2) {
  const Mat3 rt = g1.rot.matrix().transpose();
  return {Rotation(rt * g2.rot.matrix()), rt * (g2.pos - g1.pos)};
}

/// Ad_g x = (Lambda w, Lambda gamma + r x Lambda w).
inline AlgebraVector Ad(const GroupElement& g, const AlgebraVector& x) {
  const Vec3 lw = g.rot * x.ang();
  return {lw, Vec3(g.rot * x.lin() + g.pos.cross(lw))};
}

/// Ad*_{g^{-1}} p = (Lambda mu + r x Lambda nu, Lambda nu). Maps a body-frame
/// momentum at g to the spatial frame.
inline CoAlgebraVector Ad_star_inv(const GroupElement& g, const CoAlgebraVector& p) {
  const Vec3 ln = g.rot * p.lin_mom();
  return {Vec3(g.rot * p.ang_mom() + g.pos.cross(ln)), ln};
}

/// Ad*_g p, the dual of Ad_g under the pairing: (Lambda^T (mu - r x nu), Lambda^T nu).
inline CoAlgebraVector Ad_star(const GroupElement& g, const CoAlgebraVector& p) {
  const Mat3 rt = g.rot.matrix().transpose();
  return {Vec3(rt * (p.ang_mom() - g.pos.cross(p.lin_mom()))), Vec3(rt * p.lin_mom())};
}

}  // namespace beamvi

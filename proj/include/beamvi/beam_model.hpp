#pragma once

#include <cmath>
#include <string>

#include "beamvi/liegroup.hpp"

namespace beamvi {

/// Unstrained reference strain: unit stretch along the third director.
inline const AlgebraVector kE6{Vec3::Zero(), Vec3::UnitZ()};

/// Material, geometric and grid constants for a homogeneous beam with a
/// square a x a cross-section.
struct BeamParams {
  double rho = 0;
  double side_a = 0;
  double length_L = 0;
  double M = 0;
  Mat3 J_inertia = Mat3::Zero();
  double E_young = 0;
  double nu_poisson = 0;
  double G_shear = 0;
  Mat3 C1 = Mat3::Zero();
  Mat3 C2 = Mat3::Zero();
  Vec3 gravity_q = Vec3::Zero();
  double dt = 0;
  double ds = 0;
  /// N: time index of the last stored row.
  int N_steps = 0;
  /// Number of stored columns, i.e. A + 1 where A = round(L / ds).
  int A_nodes = 0;

  /// Diagonal of the 6x6 inertia blockdiag(J, M I3).
  Vec6 inertia_diag() const {
    Vec6 d;
    d << J_inertia.diagonal(), M, M, M;
    return d;
  }
  /// Diagonal of the 6x6 stiffness blockdiag(C2, C1).
  Vec6 stiffness_diag() const {
    Vec6 d;
    d << C2.diagonal(), C1.diagonal();
    return d;
  }
  /// Index of the last column, A.
  int last_node() const { return A_nodes - 1; }
  bool has_gravity() const { return gravity_q.squaredNorm() > 0.0; }
};

namespace detail {
inline void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw NonPositiveParam(std::string(name) + " must be positive, got " + std::to_string(v));
}
}  // namespace detail

inline BeamParams build_params(double rho, double side_a, double length_L, double E_young, double nu_poisson,
                               const Vec3& gravity_q, double dt, double ds, double T_total) {
  detail::require_positive(rho, "rho");
  detail::require_positive(side_a, "side_a");
  detail::require_positive(length_L, "length_L");
  detail::require_positive(E_young, "E_young");
  detail::require_positive(nu_poisson, "nu_poisson");
  if (!(nu_poisson < 0.5)) throw NonPositiveParam("nu_poisson must lie in (0, 0.5), got " + std::to_string(nu_poisson));
  detail::require_positive(dt, "dt");
  detail::require_positive(ds, "ds");
  detail::require_positive(T_total, "T_total");
  if (!gravity_q.allFinite()) throw NonPositiveParam("gravity_q must be finite");

  BeamParams p;
  p.rho = rho;
  p.side_a = side_a;
  p.length_L = length_L;
  p.E_young = E_young;
  p.nu_poisson = nu_poisson;
  p.gravity_q = gravity_q;
  p.dt = dt;
  p.ds = ds;

  const double area = side_a * side_a;
  const double i1 = side_a * side_a * side_a * side_a / 12.0;
  const double i_polar = 2.0 * i1;
  p.G_shear = E_young / (2.0 * (1.0 + nu_poisson));
  p.C1 = Vec3(p.G_shear * area, p.G_shear * area, E_young * area).asDiagonal();
  p.C2 = Vec3(E_young * i1, E_young * i1, p.G_shear * i_polar).asDiagonal();
  p.M = rho * area;
  p.J_inertia = Vec3(rho * i1, rho * i1, rho * i_polar).asDiagonal();
  p.N_steps = static_cast<int>(std::lround(T_total / dt));
  p.A_nodes = static_cast<int>(std::lround(length_L / ds)) + 1;
  return p;
}

/// dK = J xi.
inline CoAlgebraVector dK(const AlgebraVector& xi, const BeamParams& p) {
  return CoAlgebraVector(Vec6(p.inertia_diag().cwiseProduct(xi.v)));
}

/// dPhi = C (eta - E6).
inline CoAlgebraVector dPhi(const AlgebraVector& eta, const BeamParams& p) {
  return CoAlgebraVector(Vec6(p.stiffness_diag().cwiseProduct(eta.v - kE6.v)));
}

inline double kinetic_K(const AlgebraVector& xi, const BeamParams& p) { return 0.5 * pairing(dK(xi, p), xi); }

inline double elastic_Phi(const AlgebraVector& eta, const BeamParams& p) {
  return 0.5 * pairing(dPhi(eta, p), eta - kE6);
}

/// Pi = <q, r>.
inline double potential_Pi(const GroupElement& g, const BeamParams& p) { return p.gravity_q.dot(g.pos); }

/// Left-trivialized gradient of Pi: (0, Lambda^T q).
inline CoAlgebraVector dPi_triv(const GroupElement& g, const BeamParams& p) {
  return {Vec3::Zero(), Vec3(g.rot.matrix().transpose() * p.gravity_q)};
}

}  // namespace beamvi

#pragma once

// Conserved and monitored quantities, recomputed from a stored field. Nothing
// here reads integrator state: mu and lambda come from the forward Legendre
// maps applied to xi and eta extracted off the nodes.
//
// Index conventions follow the field layout: the last row and the last column
// are the ghost slices, so triangles run over j <= rows-2, a <= cols-2.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "beamvi/beam_model.hpp"
#include "beamvi/grid.hpp"
#include "beamvi/integrators.hpp"

namespace beamvi {

struct CovariantMomenta {
  CoAlgebraVector J1, J2, J3;
};

namespace detail {

inline void check_triangle(const DiscreteField& f, int j, int a, const char* who) {
  if (j < 0 || j + 2 > f.rows() || a < 0 || a + 2 > f.cols())
    throw IndexOutOfRange(std::string(who) + ": triangle (" + std::to_string(j) + ", " + std::to_string(a) +
                          ") needs j <= rows-2 and a <= cols-2");
}

inline double inf_norm(const CoAlgebraVector& v) { return v.v.lpNorm<Eigen::Infinity>(); }

}  // namespace detail

/// J1, J2, J3 of the triangle (j, a), H = SE(3).
inline CovariantMomenta covariant_momenta(const DiscreteField& f, const BeamParams& p, int j, int a) {
  detail::check_triangle(f, j, a, "covariant_momenta");
  const double dt = f.dt(), ds = f.ds();
  const AlgebraVector xi = xi_at(f, j, a), eta = eta_at(f, j, a);
  const CoAlgebraVector mu = legendre_forward_time(xi, p), lambda = legendre_forward_space(eta, p);
  const GroupElement& g = f(j, a);
  CovariantMomenta out;
  out.J1 = Ad_star_inv(g, -ds * mu + dt * lambda - dt * ds * dPi_triv(g, p));
  out.J2 = Ad_star_inv(f(j + 1, a), ds * transport(xi, dt, mu));
  out.J3 = Ad_star_inv(f(j, a + 1), -dt * transport(eta, ds, lambda));
  return out;
}

/// Sum over a = 0..cols-2 of ds Ad*_{(g_a^j)^{-1}} mu_a^j.
inline CoAlgebraVector momentum_Ld(const DiscreteField& f, const BeamParams& p, int j) {
  if (j < 0 || j + 2 > f.rows()) throw IndexOutOfRange("momentum_Ld: row " + std::to_string(j));
  CoAlgebraVector sum = CoAlgebraVector::zero();
  for (int a = 0; a + 1 < f.cols(); ++a)
    sum += f.ds() * Ad_star_inv(f(j, a), legendre_forward_time(xi_at(f, j, a), p));
  return sum;
}

/// Sum over j = 0..rows-2 of dt Ad*_{(g_a^j)^{-1}} lambda_a^j.
inline CoAlgebraVector momentum_Nd(const DiscreteField& f, const BeamParams& p, int a) {
  if (a < 0 || a + 2 > f.cols()) throw IndexOutOfRange("momentum_Nd: column " + std::to_string(a));
  CoAlgebraVector sum = CoAlgebraVector::zero();
  for (int j = 0; j + 1 < f.rows(); ++j)
    sum += f.dt() * Ad_star_inv(f(j, a), legendre_forward_space(eta_at(f, j, a), p));
  return sum;
}

/// Time-evolution energy of slice j, in joules (the sum is weighted by ds).
inline double energy_Ld(const DiscreteField& f, const BeamParams& p, int j) {
  if (j < 0 || j + 2 > f.rows()) throw IndexOutOfRange("energy_Ld: row " + std::to_string(j));
  const int last = f.cols() - 2;  // last dynamic node
  double e = 0.0;
  for (int a = 0; a <= last; ++a) e += kinetic_K(xi_at(f, j, a), p);
  for (int a = 0; a < last; ++a) e += elastic_Phi(eta_at(f, j, a), p) + potential_Pi(f(j, a), p);
  e += potential_Pi(f(j, last), p);
  return f.ds() * e;
}

/// Space-evolution "energy" of column a, weighted by dt. The endpoint rows
/// carry half of the <C(eta - E6), E6> term.
inline double energy_Nd(const DiscreteField& f, const BeamParams& p, int a) {
  if (a < 0 || a + 2 > f.cols()) throw IndexOutOfRange("energy_Nd: column " + std::to_string(a));
  const int last = f.rows() - 2;
  auto axial = [&](const AlgebraVector& eta) { return pairing(dPhi(eta, p), kE6); };
  double e = 0.0;
  for (int j = 0; j < last; ++j) e -= kinetic_K(xi_at(f, j, a), p);
  for (int j = 1; j < last; ++j) {
    const AlgebraVector eta = eta_at(f, j, a);
    e += -axial(eta) - elastic_Phi(eta, p) + potential_Pi(f(j, a), p);
  }
  const AlgebraVector eta0 = eta_at(f, 0, a), etaN = eta_at(f, last, a);
  e += -0.5 * axial(eta0) - elastic_Phi(eta0, p) + potential_Pi(f(0, a), p);
  e += -0.5 * axial(etaN) - elastic_Phi(etaN, p);
  return f.dt() * e;
}

/// Global covariant Noether sum over the rectangle [B, C] x [K, L] of
/// triangles. Zero on any converged Pi = 0 field.
inline CoAlgebraVector noether_rect(const DiscreteField& f, const BeamParams& p, int B, int C, int K, int L) {
  if (B < 0 || B >= C || C + 2 > f.cols() || K < 0 || K >= L || L + 2 > f.rows())
    throw IndexOutOfRange("noether_rect: need 0 <= B < C <= cols-2 and 0 <= K < L <= rows-2, got B=" +
                          std::to_string(B) + " C=" + std::to_string(C) + " K=" + std::to_string(K) +
                          " L=" + std::to_string(L));
  auto J = [&](int j, int a) { return covariant_momenta(f, p, j, a); };
  CoAlgebraVector sum = CoAlgebraVector::zero();
  for (int j = K + 1; j <= L; ++j) sum += J(j, B).J1 + J(j - 1, B).J2 + J(j, C).J3;
  for (int a = B + 1; a <= C; ++a) sum += J(K, a).J1 + J(L, a).J2 + J(K, a - 1).J3;
  sum += J(K, B).J1 + J(L, B).J2 + J(K, C).J3;
  return sum;
}

/// Boundary momenta of the slice Lagrangians: J^+ and J^- over a full row
/// (L) or a full column (N).
inline CoAlgebraVector J_plus_Ld(const DiscreteField& f, const BeamParams& p, int j) {
  CoAlgebraVector s = CoAlgebraVector::zero();
  for (int a = 0; a + 2 <= f.cols(); ++a) s += covariant_momenta(f, p, j, a).J2;
  return s;
}
inline CoAlgebraVector J_minus_Ld(const DiscreteField& f, const BeamParams& p, int j) {
  CoAlgebraVector s = CoAlgebraVector::zero();
  for (int a = 0; a + 2 <= f.cols(); ++a) {
    const auto m = covariant_momenta(f, p, j, a);
    s -= m.J1 + m.J3;
  }
  return s;
}
inline CoAlgebraVector J_plus_Nd(const DiscreteField& f, const BeamParams& p, int a) {
  CoAlgebraVector s = CoAlgebraVector::zero();
  for (int j = 0; j + 2 <= f.rows(); ++j) s += covariant_momenta(f, p, j, a).J3;
  return s;
}
inline CoAlgebraVector J_minus_Nd(const DiscreteField& f, const BeamParams& p, int a) {
  CoAlgebraVector s = CoAlgebraVector::zero();
  for (int j = 0; j + 2 <= f.rows(); ++j) {
    const auto m = covariant_momenta(f, p, j, a);
    s -= m.J1 + m.J2;
  }
  return s;
}

/// Both sides of the full-width decomposition of the Noether sum over rows
/// [K, L], and of the full-height one over columns [B, C]; returns the larger
/// componentwise discrepancy.
inline double lemma_decomposition_check(const DiscreteField& f, const BeamParams& p, int K, int L, int B, int C) {
  const int Cmax = f.cols() - 2, Lmax = f.rows() - 2;
  auto J = [&](int j, int a) { return covariant_momenta(f, p, j, a); };

  CoAlgebraVector rhs_time = J_plus_Ld(f, p, L) - J_minus_Ld(f, p, K);
  for (int j = K + 1; j <= L; ++j) rhs_time += J(j, 0).J1 + J(j - 1, 0).J2 + J(j, Cmax).J3;
  const double time_gap = detail::inf_norm(noether_rect(f, p, 0, Cmax, K, L) - rhs_time);

  CoAlgebraVector rhs_space = J_plus_Nd(f, p, C) - J_minus_Nd(f, p, B);
  for (int a = B + 1; a <= C; ++a) rhs_space += J(0, a).J1 + J(Lmax, a).J2 + J(0, a - 1).J3;
  const double space_gap = detail::inf_norm(noether_rect(f, p, B, C, 0, Lmax) - rhs_space);

  return std::max(time_gap, space_gap);
}

/// Restriction of a momentum to a subgroup H: columns of `basis` span h
/// inside se(3), and the result is i^* m = basis^T m.
inline Eigen::VectorXd restrict_to_subgroup(const CoAlgebraVector& m, const Eigen::Matrix<double, 6, Eigen::Dynamic>& basis) {
  return basis.transpose() * m.v;
}

struct ConservationReport {
  std::vector<double> energy;
  std::vector<CoAlgebraVector> momentum;
  std::vector<double> momentum_drift;  // |J(k) - J(0)|_inf / max(|J(0)|_inf, eps)
  std::vector<double> energy_drift;    // |E(k) - E(0)| / max(|E(0)|, eps)
  CoAlgebraVector noether_residual;    // full-domain rectangle
  double orthogonality_drift = 0.0;

  double max_momentum_drift() const {
    return momentum_drift.empty() ? 0.0 : *std::max_element(momentum_drift.begin(), momentum_drift.end());
  }
  double max_energy_drift() const {
    return energy_drift.empty() ? 0.0 : *std::max_element(energy_drift.begin(), energy_drift.end());
  }
  /// Mean of the first and second halves of the energy series.
  std::pair<double, double> energy_half_means() const {
    const std::size_t n = energy.size(), h = n / 2;
    double first = 0, second = 0;
    for (std::size_t k = 0; k < h; ++k) first += energy[k];
    for (std::size_t k = h; k < n; ++k) second += energy[k];
    return {h ? first / h : 0.0, n > h ? second / (n - h) : 0.0};
  }
};

namespace detail {

inline void fill_drifts(ConservationReport& r) {
  const double m0 = inf_norm(r.momentum.front());
  double mscale = m0;
  for (const auto& m : r.momentum) mscale = std::max(mscale, inf_norm(m));
  const double meps = 1e-14 * std::max(mscale, 1e-300);
  const double e0 = std::abs(r.energy.front());
  double escale = e0;
  for (double e : r.energy) escale = std::max(escale, std::abs(e));
  const double eeps = 1e-14 * std::max(escale, 1e-300);
  for (std::size_t k = 0; k < r.momentum.size(); ++k) {
    r.momentum_drift.push_back(inf_norm(r.momentum[k] - r.momentum.front()) / std::max(m0, meps));
    r.energy_drift.push_back(std::abs(r.energy[k] - r.energy.front()) / std::max(e0, eeps));
  }
}

}  // namespace detail

/// Per-row series for a time-integrated field.
inline ConservationReport time_report(const DiscreteField& f, const BeamParams& p) {
  ConservationReport r;
  const int rows = f.rows() - 1;
  r.energy.resize(rows);
  r.momentum.resize(rows);
  detail::for_each_node(0, rows - 1, [&](int j) {
    r.energy[j] = energy_Ld(f, p, j);
    r.momentum[j] = momentum_Ld(f, p, j);
  });
  detail::fill_drifts(r);
  r.noether_residual = noether_rect(f, p, 0, f.cols() - 2, 0, f.rows() - 2);
  r.orthogonality_drift = f.max_orthogonality_error();
  return r;
}

/// Per-column series for a space-integrated field.
inline ConservationReport space_report(const DiscreteField& f, const BeamParams& p) {
  ConservationReport r;
  const int cols = f.cols() - 1;
  r.energy.resize(cols);
  r.momentum.resize(cols);
  detail::for_each_node(0, cols - 1, [&](int a) {
    r.energy[a] = energy_Nd(f, p, a);
    r.momentum[a] = momentum_Nd(f, p, a);
  });
  detail::fill_drifts(r);
  r.noether_residual = noether_rect(f, p, 0, f.cols() - 2, 0, f.rows() - 2);
  r.orthogonality_drift = f.max_orthogonality_error();
  return r;
}

}  // namespace beamvi

#pragma once

// Discrete Legendre solves and the two marching schemes: time stepping with
// free spatial ends and space stepping with zero momentum at the temporal
// ends. Both march the same DCEL stencil
//
//   (-mu_a^j + Ad*_{tau(dt xi_a^{j-1})} mu_a^{j-1}) / dt
//     + (lambda_a^j - Ad*_{tau(ds eta_{a-1}^j)} lambda_{a-1}^j) / ds - dPi(g_a^j) + f_a^j = 0
//
// solved for mu_a^j (time) or lambda_a^j (space).

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "beamvi/beam_model.hpp"
#include "beamvi/grid.hpp"

namespace beamvi {

struct NewtonOptions {
  double tol = 1e-12;
  int max_iter = 50;
  bool fd_jacobian = false;
};

/// Aggregate Newton statistics over many solves.
struct NewtonStats {
  long solves = 0;
  int max_iterations = 0;
  double max_residual = 0.0;

  void record(int iterations, double residual) {
    ++solves;
    max_iterations = std::max(max_iterations, iterations);
    max_residual = std::max(max_residual, residual);
  }
  void merge(const NewtonStats& o) {
    solves += o.solves;
    max_iterations = std::max(max_iterations, o.max_iterations);
    max_residual = std::max(max_residual, o.max_residual);
  }
};

/// What an external force may depend on at node (j, a). The same values are
/// handed out by both marchers and by the residual oracle.
struct ForceContext {
  int j;
  int a;
  const GroupElement& g;
  std::optional<AlgebraVector> xi_prev;   // xi_a^{j-1}
  std::optional<AlgebraVector> eta_prev;  // eta_{a-1}^j
};

/// Total trivialized external force per node; empty means none.
using ForceField = std::function<CoAlgebraVector(const ForceContext&)>;

inline CoAlgebraVector eval_force(const ForceField& f, const ForceContext& ctx) {
  if (!f) return CoAlgebraVector::zero();
  CoAlgebraVector v = f(ctx);
  if (!v.is_finite())
    throw NewtonDivergence("non-finite external force at node (" + std::to_string(ctx.j) + ", " +
                           std::to_string(ctx.a) + ")");
  return v;
}

// ---------------------------------------------------------------------------
// Discrete Legendre transforms

/// mu = (dtau^{-1}_{dt xi})^* J xi.
inline CoAlgebraVector legendre_forward_time(const AlgebraVector& xi, const BeamParams& p) {
  return dtau_inv_star(p.dt * xi, dK(xi, p));
}

/// lambda = (dtau^{-1}_{ds eta})^* C (eta - E6).
inline CoAlgebraVector legendre_forward_space(const AlgebraVector& eta, const BeamParams& p) {
  return dtau_inv_star(p.ds * eta, dPhi(eta, p));
}

namespace detail {

/// Column k is (d/dy_k dtau_inv_se3(y))^T v.
inline Mat6 dtau_inv_star_derivative(const AlgebraVector& y, const CoAlgebraVector& v) {
  const Vec3 w = y.ang(), gam = y.lin();
  const Vec3 v1 = v.ang_mom(), v2 = v.lin_mom();
  const Vec3 half_turned = v2 + 0.5 * w.cross(v2);  // (I + w^/2) v2
  Mat6 out = Mat6::Zero();
  for (int k = 0; k < 3; ++k) {
    const Vec3 e = Vec3::Unit(k);
    out.block<3, 1>(0, k) = 0.5 * e.cross(v1) + 0.25 * (w * v1[k] + e * w.dot(v1)) + 0.25 * gam.cross(e.cross(v2));
    out.block<3, 1>(3, k) = 0.5 * e.cross(v2);
    out.block<3, 1>(0, k + 3) = 0.5 * e.cross(half_turned);
  }
  return out;
}

/// Linearized solution of dtau_inv_se3(h x)^T (diag(w) (x - ref)) = p that
/// keeps the h-coupling between the angular equation and the linear stress:
///   [W_ang - h^2/4 p^ W_lin^{-1} p^] omega = p_ang + W_ang ref_ang - h/2 (ref_lin + W_lin^{-1} p_lin) x p_lin
/// followed by the exact linear block for gamma.
inline AlgebraVector legendre_predictor(const CoAlgebraVector& target, const Vec6& weights, const AlgebraVector& ref,
                                        double h) {
  const Vec3 pa = target.ang_mom(), pl = target.lin_mom();
  const Vec3 wa = weights.head<3>(), wl = weights.tail<3>();
  const Mat3 ph = hat(pl);
  const Mat3 lhs = Mat3(wa.asDiagonal()) - 0.25 * h * h * ph * wl.cwiseInverse().asDiagonal() * ph;
  const Vec3 rhs = pa + wa.cwiseProduct(ref.ang()) - 0.5 * h * (ref.lin() + pl.cwiseQuotient(wl)).cross(pl);
  const Vec3 omega = lhs.partialPivLu().solve(rhs);
  const Mat3 turn = Mat3::Identity() + 0.5 * h * hat(omega);
  const Vec3 gamma = ref.lin() + Vec3(turn.partialPivLu().solve(pl)).cwiseQuotient(wl);
  return {omega, gamma};
}

// The linear block of the Legendre map, (I + h omega^/2) W_lin (gamma - ref_lin)
// = p_lin, is linear in gamma once omega is fixed. Newton therefore runs on
// omega alone with gamma eliminated exactly; far out in the large-rotation
// regime this converges where the coupled 6x6 iteration stalls.
struct ReducedLegendre {
  const CoAlgebraVector& target;
  const Vec6& weights;
  const AlgebraVector& ref;
  double h;

  Vec3 gamma(const Vec3& omega) const {
    const Mat3 turn = Mat3::Identity() + 0.5 * h * hat(omega);
    return ref.lin() + Vec3(turn.partialPivLu().solve(target.lin_mom())).cwiseQuotient(weights.tail<3>());
  }
  AlgebraVector lift(const Vec3& omega) const { return {omega, gamma(omega)}; }
  CoAlgebraVector residual(const AlgebraVector& x) const {
    return dtau_inv_star(h * x, CoAlgebraVector(Vec6(weights.cwiseProduct(x.v - ref.v)))) - target;
  }
  Vec3 reduced(const Vec3& omega) const { return residual(lift(omega)).v.head<3>(); }
  double merit(const Vec3& r) const { return r.cwiseQuotient(weights.head<3>()).norm(); }

  Mat3 jacobian(const Vec3& omega, bool fd) const {
    Mat3 jac;
    if (fd) {
      for (int k = 0; k < 3; ++k) {
        const double step = 1e-7 * std::max(1.0, std::abs(omega[k]));
        Vec3 up = omega, dn = omega;
        up[k] += step;
        dn[k] -= step;
        jac.col(k) = (reduced(up) - reduced(dn)) / (2.0 * step);
      }
      return jac;
    }
    const AlgebraVector x = lift(omega);
    const CoAlgebraVector stress(Vec6(weights.cwiseProduct(x.v - ref.v)));
    const Mat6 full = h * dtau_inv_star_derivative(h * x, stress) + dtau_inv_se3(h * x).transpose() * weights.asDiagonal();
    // d gamma / d omega from differentiating the linear block.
    const Mat3 turn = Mat3::Identity() + 0.5 * h * hat(omega);
    const Vec3 u = turn.partialPivLu().solve(target.lin_mom());
    const Mat3 dgamma = weights.tail<3>().cwiseInverse().asDiagonal() * Mat3(turn.partialPivLu().solve(0.5 * h * hat(u)));
    return full.topLeftCorner<3, 3>() + full.topRightCorner<3, 3>() * dgamma;
  }
};

struct NewtonOutcome {
  Vec3 omega;
  Vec3 r;
  int iterations = 0;
  bool converged = false;
};

// Damped Newton on the reduced angular equation, started at omega.
inline NewtonOutcome newton_core(const ReducedLegendre& eq, Vec3 omega, const NewtonOptions& opt) {
  NewtonOutcome out{omega, eq.reduced(omega)};
  for (; out.iterations < opt.max_iter; ++out.iterations) {
    Vec3 delta = eq.jacobian(out.omega, opt.fd_jacobian).partialPivLu().solve(-out.r);
    // Backtrack on the residual measured in units of omega.
    const double m0 = eq.merit(out.r);
    Vec3 trial = out.omega + delta;
    Vec3 r_trial = eq.reduced(trial);
    for (int halvings = 0; halvings < 40; ++halvings) {
      if (r_trial.allFinite() && eq.merit(r_trial) <= m0) break;
      delta *= 0.5;
      trial = out.omega + delta;
      r_trial = eq.reduced(trial);
    }
    out.omega = trial;
    out.r = r_trial;
    if (!out.omega.allFinite() || !out.r.allFinite()) break;
    if (delta.lpNorm<Eigen::Infinity>() <= opt.tol * std::max(1.0, out.omega.lpNorm<Eigen::Infinity>())) {
      ++out.iterations;
      out.converged = true;
      break;
    }
  }
  return out;
}

inline Mat6 full_jacobian(const ReducedLegendre& eq, const AlgebraVector& x, bool fd) {
  Mat6 jac;
  if (fd) {
    for (int k = 0; k < 6; ++k) {
      const double step = 1e-7 * std::max(1.0, std::abs(x.v[k]));
      AlgebraVector up = x, dn = x;
      up.v[k] += step;
      dn.v[k] -= step;
      jac.col(k) = (eq.residual(up).v - eq.residual(dn).v) / (2.0 * step);
    }
  } else {
    const CoAlgebraVector stress(Vec6(eq.weights.cwiseProduct(x.v - eq.ref.v)));
    jac = eq.h * dtau_inv_star_derivative(eq.h * x, stress) +
          dtau_inv_se3(eq.h * x).transpose() * eq.weights.asDiagonal();
  }
  return jac;
}

// Length of the first Newton step from x; infinite where it is undefined.
inline double newton_step_length(const ReducedLegendre& eq, const AlgebraVector& x, bool fd) {
  const CoAlgebraVector r = eq.residual(x);
  if (!x.is_finite() || !r.is_finite()) return std::numeric_limits<double>::infinity();
  const Vec6 d = full_jacobian(eq, x, fd).partialPivLu().solve(r.v);
  return d.allFinite() ? d.norm() : std::numeric_limits<double>::infinity();
}

// Damped Newton on the full 6x6 system, started at x. Stays on the branch
// nearest the start, so it is tried first.
inline std::optional<std::pair<AlgebraVector, int>> newton_full(const ReducedLegendre& eq, AlgebraVector x,
                                                                 const NewtonOptions& opt) {
  // Euclidean norm of the scaled residual: the Newton step is a descent
  // direction for it, which the max norm does not guarantee.
  auto merit = [&](const CoAlgebraVector& r) { return r.v.cwiseQuotient(eq.weights).norm(); };
  CoAlgebraVector r = eq.residual(x);
  for (int it = 0; it < opt.max_iter; ++it) {
    Vec6 delta = full_jacobian(eq, x, opt.fd_jacobian).partialPivLu().solve(-r.v);
    const double m0 = merit(r);
    AlgebraVector trial(Vec6(x.v + delta));
    CoAlgebraVector r_trial = eq.residual(trial);
    for (int halvings = 0; halvings < 40; ++halvings) {
      if (r_trial.is_finite() && merit(r_trial) <= m0) break;
      delta *= 0.5;
      trial.v = x.v + delta;
      r_trial = eq.residual(trial);
    }
    x = trial;
    r = r_trial;
    if (!x.is_finite() || !r.is_finite()) return std::nullopt;
    if (delta.lpNorm<Eigen::Infinity>() <= opt.tol * std::max(1.0, x.v.lpNorm<Eigen::Infinity>()))
      return std::pair{x, it + 1};
  }
  return std::nullopt;
}

inline AlgebraVector legendre_newton(const CoAlgebraVector& target, const Vec6& weights, const AlgebraVector& ref,
                                     double h, const AlgebraVector& guess, const NewtonOptions& opt, NewtonStats* stats,
                                     const char* what) {
  const ReducedLegendre eq{target, weights, ref, h};
  auto accept = [&](const Vec3& omega, int iterations) {
    const AlgebraVector x = eq.lift(omega);
    if (stats) stats->record(iterations, eq.residual(x).v.lpNorm<Eigen::Infinity>());
    return x;
  };

  AlgebraVector start = guess;
  {
    // Start where Newton has the least distance to cover. A small residual
    // alone can sit in the wrong basin.
    const AlgebraVector pred = legendre_predictor(target, weights, ref, h);
    if (newton_step_length(eq, pred, opt.fd_jacobian) < newton_step_length(eq, guess, opt.fd_jacobian)) start = pred;
  }
  if (const auto full = newton_full(eq, start, opt)) {
    if (stats) stats->record(full->second, eq.residual(full->first).v.lpNorm<Eigen::Infinity>());
    return full->first;
  }
  int total = opt.max_iter;

  const NewtonOutcome first = newton_core(eq, start.ang(), opt);
  total += first.iterations;
  if (first.converged) return accept(first.omega, total);

  // Fallback: follow target(s) = (1 - s) image(guess) + s target from s = 0,
  // where the guess is an exact root, with adaptive steps in s.
  const CoAlgebraVector origin = eq.residual(guess) + target;
  if (guess.is_finite() && origin.is_finite()) {
    Vec3 omega = guess.ang();
    double s = 0.0, step = 0.25;
    while (step > 1e-6) {
      const double next = std::min(1.0, s + step);
      const CoAlgebraVector sub(Vec6((1.0 - next) * origin.v + next * target.v));
      const NewtonOutcome o = newton_core({sub, weights, ref, h}, omega, opt);
      total += o.iterations;
      if (o.converged) {
        omega = o.omega;
        s = next;
        if (s == 1.0) return accept(omega, total);
        step = std::min(2.0 * step, 0.5);
      } else {
        step *= 0.5;
      }
    }
  }

  // Last resort: fixed-seed starts spread over several magnitudes.
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> normal;
  for (int attempt = 0; attempt < 600; ++attempt) {
    const double scale = std::pow(10.0, attempt % 6);
    const Vec3 omega = ref.ang() + scale * Vec3(normal(rng), normal(rng), normal(rng));
    const NewtonOutcome o = newton_core(eq, omega, opt);
    total += o.iterations;
    if (o.converged) return accept(o.omega, total);
  }
  throw NewtonDivergence(std::string(what) + " Legendre solve did not converge in " + std::to_string(opt.max_iter) +
                         " iterations (residual " + std::to_string(first.r.lpNorm<Eigen::Infinity>()) + ")");
}

}  // namespace detail

/// xi with (dtau^{-1}_{dt xi})^* J xi = mu.
inline AlgebraVector legendre_solve_time(const CoAlgebraVector& mu, const BeamParams& p, const AlgebraVector& guess,
                                         const NewtonOptions& opt = {}, NewtonStats* stats = nullptr) {
  return detail::legendre_newton(mu, p.inertia_diag(), AlgebraVector::zero(), p.dt, guess, opt, stats, "time");
}

/// eta with (dtau^{-1}_{ds eta})^* C (eta - E6) = lambda.
inline AlgebraVector legendre_solve_space(const CoAlgebraVector& lambda, const BeamParams& p,
                                          const AlgebraVector& guess, const NewtonOptions& opt = {},
                                          NewtonStats* stats = nullptr) {
  return detail::legendre_newton(lambda, p.stiffness_diag(), kE6, p.ds, guess, opt, stats, "space");
}

// ---------------------------------------------------------------------------
// Boundary handling

/// ZeroTraction: columns 0..A-1 are dynamic and the ghost column A is the
/// unstrained extension g_A = g_{A-1} tau(ds E6), so lambda_{A-1} = 0.
/// Prescribed: columns 0 and A are given for every row; columns 1..A-1 are
/// dynamic and use the full interior stencil.
enum class TimeBoundary { ZeroTraction, Prescribed };

/// ZeroMomentum: rows 0..N-1 are dynamic and the ghost row N repeats row
/// N-1, so mu^{N-1} = 0. Prescribed: rows 0 and N are given for every
/// column; rows 1..N-1 are dynamic.
enum class SpaceBoundary { ZeroMomentum, Prescribed };

/// The two fixed edges of a prescribed march: columns 0 and A (time) or
/// rows 0 and N (space).
struct PrescribedEdges {
  std::vector<GroupElement> first;
  std::vector<GroupElement> last;
};

/// Marching front state. For the time marcher, mu[a] / xi_prev[a] hold
/// mu_a^{j-1}, xi_a^{j-1}; for the space marcher, lambda[j] / eta_prev[j]
/// hold lambda_{a-1}^j, eta_{a-1}^j.
struct StepWorkspace {
  std::vector<CoAlgebraVector> mu;
  std::vector<CoAlgebraVector> lambda;
  std::vector<AlgebraVector> xi_prev;
  std::vector<AlgebraVector> eta_prev;
  NewtonOptions newton;
  NewtonStats stats;
};

namespace detail {

inline GroupElement unstrained_extension(const GroupElement& g, double ds) { return compose(g, tau_se3(ds * kE6)); }

/// Run body(i) for i in [lo, hi]; per-index work is independent. Rethrows
/// the exception of the lowest failing index.
template <class Body>
void for_each_node(int lo, int hi, Body&& body) {
  const int n = hi - lo + 1;
  if (n <= 0) return;
  std::vector<std::exception_ptr> errors(n);
#if defined(_OPENMP)
#pragma omp parallel for schedule(static) if (n >= 32)
#endif
  for (int i = 0; i < n; ++i) {
    try {
      body(lo + i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::string node_tag(int j, int a) { return " at node (j=" + std::to_string(j) + ", a=" + std::to_string(a) + ")"; }

}  // namespace detail

/// Ad*_{tau(h x)} p.
inline CoAlgebraVector transport(const AlgebraVector& x, double h, const CoAlgebraVector& p) {
  return Ad_star(tau_se3(h * x), p);
}

/// Fill row j+1 of `field` from rows j-1, j and the front in `ws`.
/// Requires 1 <= j <= rows-2.
inline void step_time(DiscreteField& field, int j, const BeamParams& p, StepWorkspace& ws,
                      const ForceField& forces = {}, TimeBoundary bc = TimeBoundary::ZeroTraction) {
  const int last = field.cols() - 1;
  if (j < 1 || j + 1 >= field.rows()) throw IndexOutOfRange("step_time: row " + std::to_string(j) + " has no successor");
  const int lo = bc == TimeBoundary::ZeroTraction ? 0 : 1;
  const int hi = last - 1;

  // lambda_a^j and eta_a^j for a = 0..A-1 from row j.
  std::vector<CoAlgebraVector> lambda(last);
  std::vector<AlgebraVector> eta(last);
  detail::for_each_node(0, last - 1, [&](int a) {
    try {
      eta[a] = eta_at(field, j, a);
    } catch (const NearPiRotation& e) {
      throw NearPiRotation(e.what() + detail::node_tag(j, a));
    }
    lambda[a] = legendre_forward_space(eta[a], p);
  });
  if (bc == TimeBoundary::ZeroTraction) lambda[last - 1] = CoAlgebraVector::zero();

  std::vector<NewtonStats> local(last + 1);
  detail::for_each_node(lo, hi, [&](int a) {
    const GroupElement& g = field(j, a);
    CoAlgebraVector flux = lambda[a];
    std::optional<AlgebraVector> eta_prev;
    if (a > 0) {
      flux -= transport(eta[a - 1], p.ds, lambda[a - 1]);
      eta_prev = eta[a - 1];
    }
    const CoAlgebraVector f = eval_force(forces, {j, a, g, ws.xi_prev[a], eta_prev});
    const CoAlgebraVector mu =
        transport(ws.xi_prev[a], p.dt, ws.mu[a]) + p.dt * (flux / p.ds - dPi_triv(g, p) + f);
    AlgebraVector xi;
    try {
      xi = legendre_solve_time(mu, p, ws.xi_prev[a], ws.newton, &local[a]);
    } catch (const NewtonDivergence& e) {
      throw NewtonDivergence(e.what() + detail::node_tag(j, a));
    }
    field(j + 1, a) = compose(g, tau_se3(p.dt * xi));
    ws.mu[a] = mu;
    ws.xi_prev[a] = xi;
  });
  for (const auto& s : local) ws.stats.merge(s);

  if (bc == TimeBoundary::ZeroTraction) field(j + 1, last) = detail::unstrained_extension(field(j + 1, last - 1), p.ds);
}

/// Fill column a+1 of `field` from columns a-1, a and the front in `ws`.
/// Requires 1 <= a <= cols-2.
inline void step_space(DiscreteField& field, int a, const BeamParams& p, StepWorkspace& ws,
                       const ForceField& forces = {}, SpaceBoundary bc = SpaceBoundary::ZeroMomentum) {
  const int last = field.rows() - 1;
  if (a < 1 || a + 1 >= field.cols()) throw IndexOutOfRange("step_space: column " + std::to_string(a) + " has no successor");
  const int lo = bc == SpaceBoundary::ZeroMomentum ? 0 : 1;
  const int hi = last - 1;

  std::vector<CoAlgebraVector> mu(last);
  std::vector<AlgebraVector> xi(last);
  detail::for_each_node(0, last - 1, [&](int j) {
    try {
      xi[j] = xi_at(field, j, a);
    } catch (const NearPiRotation& e) {
      throw NearPiRotation(e.what() + detail::node_tag(j, a));
    }
    mu[j] = legendre_forward_time(xi[j], p);
  });
  if (bc == SpaceBoundary::ZeroMomentum) mu[last - 1] = CoAlgebraVector::zero();

  std::vector<NewtonStats> local(last + 1);
  detail::for_each_node(lo, hi, [&](int j) {
    const GroupElement& g = field(j, a);
    CoAlgebraVector rate = mu[j];
    std::optional<AlgebraVector> xi_prev;
    if (j > 0) {
      rate -= transport(xi[j - 1], p.dt, mu[j - 1]);
      xi_prev = xi[j - 1];
    }
    const CoAlgebraVector f = eval_force(forces, {j, a, g, xi_prev, ws.eta_prev[j]});
    const CoAlgebraVector lambda =
        transport(ws.eta_prev[j], p.ds, ws.lambda[j]) + p.ds * (rate / p.dt + dPi_triv(g, p) - f);
    AlgebraVector eta;
    try {
      eta = legendre_solve_space(lambda, p, ws.eta_prev[j], ws.newton, &local[j]);
    } catch (const NewtonDivergence& e) {
      throw NewtonDivergence(e.what() + detail::node_tag(j, a));
    }
    field(j, a + 1) = compose(g, tau_se3(p.ds * eta));
    ws.lambda[j] = lambda;
    ws.eta_prev[j] = eta;
  });
  for (const auto& s : local) ws.stats.merge(s);

  if (bc == SpaceBoundary::ZeroMomentum) field(last, a + 1) = field(last - 1, a + 1);
}

struct RunResult {
  DiscreteField field;
  NewtonStats newton;
};

/// Time march from the first two rows (length A+1 each) to row N.
/// Under ZeroTraction the ghost entries of the two given rows are replaced
/// by the unstrained extension; under Prescribed, `edges` supplies columns
/// 0 and A for all N+1 rows.
inline RunResult run_time(std::span<const GroupElement> row0, std::span<const GroupElement> row1, const BeamParams& p,
                          int N, const ForceField& forces = {}, const NewtonOptions& newton = {},
                          TimeBoundary bc = TimeBoundary::ZeroTraction, const PrescribedEdges* edges = nullptr) {
  if (row0.size() != row1.size() || row0.size() < 2) throw IndexOutOfRange("run_time: initial rows need equal length >= 2");
  if (N < 1) throw IndexOutOfRange("run_time: N must be at least 1");
  const int cols = static_cast<int>(row0.size());
  const int last = cols - 1;
  DiscreteField field(N + 1, cols, p.dt, p.ds);
  field.set_row(0, row0);
  field.set_row(1, row1);
  if (bc == TimeBoundary::ZeroTraction) {
    for (int j : {0, 1}) field(j, last) = detail::unstrained_extension(field(j, last - 1), p.ds);
  } else {
    if (!edges || static_cast<int>(edges->first.size()) != N + 1 || static_cast<int>(edges->last.size()) != N + 1)
      throw IndexOutOfRange("run_time: prescribed edges must cover all N+1 rows");
    if (cols < 3) throw IndexOutOfRange("run_time: prescribed march needs at least three columns");
    field.set_column(0, edges->first);
    field.set_column(last, edges->last);
  }

  StepWorkspace ws;
  ws.newton = newton;
  ws.mu.resize(cols);
  ws.xi_prev.resize(cols);
  for (int a = 0; a < cols; ++a) {
    ws.xi_prev[a] = xi_at(field, 0, a);
    ws.mu[a] = legendre_forward_time(ws.xi_prev[a], p);
  }
  for (int j = 1; j < N; ++j) step_time(field, j, p, ws, forces, bc);
  return {std::move(field), ws.stats};
}

/// Space march from the first two columns (length N+1 each) to column A.
/// Under ZeroMomentum the ghost entries of the two given columns are
/// replaced by a copy of row N-1; under Prescribed, `edges` supplies rows 0
/// and N for all A+1 columns.
inline RunResult run_space(std::span<const GroupElement> col0, std::span<const GroupElement> col1, const BeamParams& p,
                           int A, const ForceField& forces = {}, const NewtonOptions& newton = {},
                           SpaceBoundary bc = SpaceBoundary::ZeroMomentum, const PrescribedEdges* edges = nullptr) {
  if (col0.size() != col1.size() || col0.size() < 2) throw IndexOutOfRange("run_space: initial columns need equal length >= 2");
  if (A < 1) throw IndexOutOfRange("run_space: A must be at least 1");
  const int rows = static_cast<int>(col0.size());
  const int last = rows - 1;
  DiscreteField field(rows, A + 1, p.dt, p.ds);
  field.set_column(0, col0);
  field.set_column(1, col1);
  if (bc == SpaceBoundary::ZeroMomentum) {
    for (int a : {0, 1}) field(last, a) = field(last - 1, a);
  } else {
    if (!edges || static_cast<int>(edges->first.size()) != A + 1 || static_cast<int>(edges->last.size()) != A + 1)
      throw IndexOutOfRange("run_space: prescribed edges must cover all A+1 columns");
    if (rows < 3) throw IndexOutOfRange("run_space: prescribed march needs at least three rows");
    field.set_row(0, edges->first);
    field.set_row(last, edges->last);
  }

  StepWorkspace ws;
  ws.newton = newton;
  ws.lambda.resize(rows);
  ws.eta_prev.resize(rows);
  for (int j = 0; j < rows; ++j) {
    ws.eta_prev[j] = eta_at(field, j, 0);
    ws.lambda[j] = legendre_forward_space(ws.eta_prev[j], p);
  }
  for (int a = 1; a < A; ++a) step_space(field, a, p, ws, forces, bc);
  return {std::move(field), ws.stats};
}

// ---------------------------------------------------------------------------
// Residual oracles, recomputed from the stored field alone

/// Residual of the stencil at (j, a) together with a magnitude it is
/// compared against.
struct StencilEvaluation {
  CoAlgebraVector residual;
  double scale = 0.0;

  double scaled() const { return residual.v.lpNorm<Eigen::Infinity>() / std::max(scale, 1e-300); }
};

namespace detail {

inline StencilEvaluation stencil(const DiscreteField& f, const BeamParams& p, const ForceField& forces, int j, int a,
                                 bool with_past_momentum, bool with_prev_stress) {
  const GroupElement& g = f(j, a);
  const double dt = f.dt(), ds = f.ds();
  const AlgebraVector xi = xi_at(f, j, a), eta = eta_at(f, j, a);
  const CoAlgebraVector mu = legendre_forward_time(xi, p);
  const CoAlgebraVector lambda = legendre_forward_space(eta, p);
  CoAlgebraVector past = CoAlgebraVector::zero(), prev = CoAlgebraVector::zero();
  std::optional<AlgebraVector> xi_prev, eta_prev;
  if (j > 0) xi_prev = xi_at(f, j - 1, a);
  if (a > 0) eta_prev = eta_at(f, j, a - 1);
  if (with_past_momentum) past = transport(*xi_prev, dt, legendre_forward_time(*xi_prev, p));
  if (with_prev_stress) prev = transport(*eta_prev, ds, legendre_forward_space(*eta_prev, p));
  const CoAlgebraVector grad = dPi_triv(g, p);
  const CoAlgebraVector force = eval_force(forces, {j, a, g, xi_prev, eta_prev});

  StencilEvaluation out;
  out.residual = (past - mu) / dt + (lambda - prev) / ds - grad + force;
  auto norm = [](const CoAlgebraVector& v) { return v.v.lpNorm<Eigen::Infinity>(); };
  // Sum of term sizes, plus what rounding the stored positions alone
  // contributes once the finite differences over dt and ds amplify it.
  // Rotation entries are stored to the same absolute precision as unit numbers.
  double reach = std::max(1.0, g.pos.norm());
  for (const auto& [dj, da] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
    const int jj = j + dj, aa = a + da;
    if (jj >= 0 && jj < f.rows() && aa >= 0 && aa < f.cols()) reach = std::max(reach, f(jj, aa).pos.norm());
  }
  const double storage = std::numeric_limits<double>::epsilon() * reach *
                         (p.inertia_diag().maxCoeff() / (dt * dt) + p.stiffness_diag().maxCoeff() / (ds * ds));
  out.scale = norm(mu) / dt + norm(past) / dt + norm(lambda) / ds + norm(prev) / ds + norm(grad) + norm(force) + storage;
  return out;
}

}  // namespace detail

/// Full interior stencil at (j, a), 1 <= j <= rows-2, 1 <= a <= cols-2.
inline StencilEvaluation dcel_stencil(const DiscreteField& f, const BeamParams& p, const ForceField& forces, int j,
                                      int a) {
  if (j < 1 || j + 2 > f.rows() || a < 1 || a + 2 > f.cols())
    throw IndexOutOfRange("dcel_residual: (" + std::to_string(j) + ", " + std::to_string(a) + ") is not interior");
  return detail::stencil(f, p, forces, j, a, true, true);
}

inline CoAlgebraVector dcel_residual(const DiscreteField& f, const BeamParams& p, const ForceField& forces, int j,
                                     int a) {
  return dcel_stencil(f, p, forces, j, a).residual;
}

/// Free-end equation at a = 0 (no incoming stress), 1 <= j <= rows-2.
inline StencilEvaluation boundary_stencil_first_column(const DiscreteField& f, const BeamParams& p,
                                                       const ForceField& forces, int j) {
  if (j < 1 || j + 2 > f.rows() || f.cols() < 2) throw IndexOutOfRange("boundary residual at a = 0 needs 1 <= j <= rows-2");
  return detail::stencil(f, p, forces, j, 0, true, false);
}

/// Zero-momentum equation at j = 0 (no incoming momentum), 1 <= a <= cols-2.
inline StencilEvaluation boundary_stencil_first_row(const DiscreteField& f, const BeamParams& p,
                                                    const ForceField& forces, int a) {
  if (a < 1 || a + 2 > f.cols() || f.rows() < 2) throw IndexOutOfRange("boundary residual at j = 0 needs 1 <= a <= cols-2");
  return detail::stencil(f, p, forces, 0, a, false, true);
}

// ---------------------------------------------------------------------------
// Step-size guidance

/// Dilational wave speed sqrt((lambda + 2 mu) / rho) from the Lame constants.
inline double dilational_wave_speed(const BeamParams& p) {
  const double nu = p.nu_poisson;
  const double lame_lambda = p.E_young * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
  return std::sqrt((lame_lambda + 2.0 * p.G_shear) / p.rho);
}

/// ds / (10 c).
inline double cfl_suggested_dt(const BeamParams& p) { return p.ds / (10.0 * dilational_wave_speed(p)); }

}  // namespace beamvi

#pragma once

// CSV trajectories and diagnostics. Every number is printed with 17
// significant digits so that reading a trajectory back gives the same doubles.

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "beamvi/scenario.hpp"

namespace beamvi {

inline const char* kTrajectoryHeader =
    "j,t,a,s,R00,R01,R02,R10,R11,R12,R20,R21,R22,x,y,z,xi1,xi2,xi3,xi4,xi5,xi6,eta1,eta2,eta3,eta4,eta5,eta6";

namespace detail {

inline void put(std::ostream& os, double v) {
  if (std::isnan(v)) os << "nan";
  else os << std::setprecision(17) << v;
}

// xi on the last row and eta on the last column have no forward neighbour;
// a node whose relative rotation sits on the chart boundary has none either.
template <class F>
Vec6 or_nan(F&& f) {
  try {
    return f().v;
  } catch (const Error&) {
    return Vec6::Constant(std::numeric_limits<double>::quiet_NaN());
  }
}

}  // namespace detail

inline void write_trajectory(std::ostream& os, const DiscreteField& f) {
  os << kTrajectoryHeader << '\n';
  for (int j = 0; j < f.rows(); ++j)
    for (int a = 0; a < f.cols(); ++a) {
      const GroupElement& g = f(j, a);
      os << j << ',';
      detail::put(os, j * f.dt());
      os << ',' << a << ',';
      detail::put(os, a * f.ds());
      const Mat3& R = g.rot.matrix();
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) os << ',', detail::put(os, R(r, c));
      for (int k = 0; k < 3; ++k) os << ',', detail::put(os, g.pos(k));
      const Vec6 xi = detail::or_nan([&] { return xi_at(f, j, a); });
      const Vec6 eta = detail::or_nan([&] { return eta_at(f, j, a); });
      for (int k = 0; k < 6; ++k) os << ',', detail::put(os, xi(k));
      for (int k = 0; k < 6; ++k) os << ',', detail::put(os, eta(k));
      os << '\n';
    }
}

inline void write_trajectory(const std::string& path, const DiscreteField& f) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  write_trajectory(out, f);
}

/// Rebuild a field from a trajectory CSV. Steps are taken from the t and s
/// columns.
inline DiscreteField read_trajectory(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTrajectoryHeader) throw ParseError("trajectory: unexpected header", 1);
  struct Row {
    int j, a;
    double t, s;
    Mat3 R;
    Vec3 x;
  };
  std::vector<Row> rows;
  int rmax = -1, cmax = -1;
  for (int n = 2; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    std::vector<double> v;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      char* end = nullptr;
      const double d = std::strtod(cell.c_str(), &end);
      if (cell.empty() || *end != '\0') throw ParseError("trajectory: bad number '" + cell + "'", n);
      v.push_back(d);
    }
    if (v.size() != 28) throw ParseError("trajectory: expected 28 columns, got " + std::to_string(v.size()), n);
    Row r;
    r.j = static_cast<int>(v[0]);
    r.t = v[1];
    r.a = static_cast<int>(v[2]);
    r.s = v[3];
    if (r.j < 0 || r.a < 0 || r.j != v[0] || r.a != v[2]) throw ParseError("trajectory: bad node index", n);
    for (int k = 0; k < 9; ++k) r.R(k / 3, k % 3) = v[4 + k];
    r.x = Vec3(v[13], v[14], v[15]);
    rmax = std::max(rmax, r.j);
    cmax = std::max(cmax, r.a);
    rows.push_back(r);
  }
  if (rmax < 1 || cmax < 1) throw ParseError("trajectory: need at least two rows and two columns");
  if (static_cast<long>(rows.size()) != static_cast<long>(rmax + 1) * (cmax + 1))
    throw ParseError("trajectory: node count does not fill a " + std::to_string(rmax + 1) + " x " +
                     std::to_string(cmax + 1) + " grid");
  double dt = 0, ds = 0;
  for (const Row& r : rows) {
    if (r.j == 1 && r.a == 0) dt = r.t;
    if (r.j == 0 && r.a == 1) ds = r.s;
  }
  DiscreteField f(rmax + 1, cmax + 1, dt, ds);
  std::vector<char> seen(static_cast<std::size_t>(rmax + 1) * (cmax + 1), 0);
  for (const Row& r : rows) {
    char& mark = seen[static_cast<std::size_t>(r.j) * (cmax + 1) + r.a];
    if (mark) throw ParseError("trajectory: node (" + std::to_string(r.j) + ", " + std::to_string(r.a) + ") repeated");
    mark = 1;
    f(r.j, r.a) = {Rotation(r.R), r.x};
  }
  return f;
}

inline DiscreteField read_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return read_trajectory(in);
}

/// One row per slice, then a summary row for the full-domain Noether sum
/// (index "noether", energy column holding its infinity norm).
inline void write_diagnostics(std::ostream& os, const ConservationReport& r) {
  os << "index,energy,J1,J2,J3,J4,J5,J6,momentum_drift,energy_drift\n";
  for (std::size_t k = 0; k < r.energy.size(); ++k) {
    os << k << ',';
    detail::put(os, r.energy[k]);
    for (int i = 0; i < 6; ++i) os << ',', detail::put(os, r.momentum[k].v(i));
    os << ',';
    detail::put(os, r.momentum_drift[k]);
    os << ',';
    detail::put(os, r.energy_drift[k]);
    os << '\n';
  }
  os << "noether,";
  detail::put(os, r.noether_residual.v.lpNorm<Eigen::Infinity>());
  for (int i = 0; i < 6; ++i) os << ',', detail::put(os, r.noether_residual.v(i));
  os << ",,\n";
}

inline void write_diagnostics(const std::string& path, const ConservationReport& r) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  write_diagnostics(out, r);
}

/// One row per re-marched slice; the header comment names the excluded edges.
inline void write_cross_consistency(std::ostream& os, const CrossConsistency& c) {
  os << "# direction=" << c.direction << " boundary=" << (c.prescribed ? "prescribed" : "natural")
     << " window=" << c.window << " completed=" << (c.completed ? "yes" : "no") << " interior_excludes=";
  for (std::size_t k = 0; k < c.excluded.size(); ++k) os << (k ? ";" : "") << c.excluded[k];
  if (!c.completed) os << " failure=\"" << c.failure << '"';
  os << "\nslice,gap_all,gap_interior\n";
  for (std::size_t k = 0; k < c.gap_all.size(); ++k) {
    os << k << ',';
    detail::put(os, c.gap_all[k]);
    os << ',';
    detail::put(os, c.gap_interior[k]);
    os << '\n';
  }
}

inline void write_cross_consistency(const std::string& path, const CrossConsistency& c) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  write_cross_consistency(out, c);
}

}  // namespace beamvi

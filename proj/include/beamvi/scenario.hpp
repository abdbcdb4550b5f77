#pragma once

// Scenario configuration (flat INI), built-in presets, initial data, and
// the re-march comparisons used for reconstruction.

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "beamvi/diagnostics.hpp"

namespace beamvi {

enum class Mode { TimeIntegrate, SpaceIntegrate, TimeThenSpace, SpaceThenTime };
/// Constant strain profiles eta^0, eta^1 (time runs) or constant velocity
/// profiles xi_0, xi_1 (space runs).
enum class InitialKind { Strain, Velocity };

struct ScenarioConfig {
  std::string name = "custom";
  Mode mode = Mode::TimeIntegrate;

  double rho = 1e3;
  double side = 0.01;
  double length = 1.0;
  double young = 5e3;
  double poisson = 0.35;

  double dt = 5e-4;
  double ds = 0.1;
  double T = 3.0;
  /// Rows (or columns) handed to the reconstruction re-march span this much
  /// time; defaults to T.
  double reconstruct_T = 3.0;

  InitialKind kind = InitialKind::Strain;
  Vec6 profile0 = kE6.v;
  Vec6 profile1 = kE6.v;
  Vec3 seed_rotation = Vec3::Zero();  // Cayley vector of g_0^0
  Vec3 seed_position = Vec3::Zero();
  /// Spatial offset of the second seed (g_0^1 for time runs, g_1^0 for space
  /// runs) from the first; same rotation.
  Vec3 second_offset = Vec3::Zero();

  Vec3 gravity = Vec3::Zero();

  double newton_tol = 1e-12;
  int newton_max_iter = 50;

  std::string trajectory_csv = "trajectory.csv";
  std::string diagnostics_csv = "diagnostics.csv";
  std::string manifest_json = "manifest.json";
  std::string report_csv = "cross_consistency.csv";

  bool operator==(const ScenarioConfig&) const = default;
};

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::TimeIntegrate: return "time_integrate";
    case Mode::SpaceIntegrate: return "space_integrate";
    case Mode::TimeThenSpace: return "time_then_space_reconstruct";
    case Mode::SpaceThenTime: return "space_then_time_reconstruct";
  }
  return "?";
}
inline std::string to_string(InitialKind k) { return k == InitialKind::Strain ? "strain" : "velocity"; }
inline bool time_first(Mode m) { return m == Mode::TimeIntegrate || m == Mode::TimeThenSpace; }

inline BeamParams beam_params(const ScenarioConfig& c) {
  return build_params(c.rho, c.side, c.length, c.young, c.poisson, c.gravity, c.dt, c.ds, c.T);
}

inline NewtonOptions newton_options(const ScenarioConfig& c) {
  NewtonOptions o;
  o.tol = c.newton_tol;
  o.max_iter = c.newton_max_iter;
  return o;
}

inline void validate(const ScenarioConfig& c) {
  auto positive = [](double v, const char* field) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(field, "must be positive and finite");
  };
  positive(c.rho, "material.rho");
  positive(c.side, "material.side");
  positive(c.length, "material.length");
  positive(c.young, "material.young");
  if (!(c.poisson > -1.0 && c.poisson < 0.5)) throw ValidationError("material.poisson", "must lie in (-1, 0.5)");
  positive(c.dt, "grid.dt");
  positive(c.ds, "grid.ds");
  positive(c.T, "grid.T");
  if (std::lround(c.T / c.dt) < 2) throw ValidationError("grid.T", "fewer than two time steps");
  positive(c.reconstruct_T, "grid.reconstruct_T");
  if (c.reconstruct_T > c.T * (1 + 1e-12)) throw ValidationError("grid.reconstruct_T", "exceeds grid.T");
  if (std::lround(c.length / c.ds) < 2) throw ValidationError("material.length", "fewer than two space steps");
  if (std::lround(c.reconstruct_T / c.dt) < 2) throw ValidationError("grid.reconstruct_T", "fewer than two time steps");
  const InitialKind want = time_first(c.mode) ? InitialKind::Strain : InitialKind::Velocity;
  if (c.kind != want)
    throw ValidationError("initial.kind", "mode " + to_string(c.mode) + " needs " + to_string(want) + " profiles");
  for (const auto* v : {&c.profile0, &c.profile1})
    if (!v->allFinite()) throw ValidationError("initial.profile", "non-finite entry");
  if (!(c.newton_tol > 0.0)) throw ValidationError("newton.tol", "must be positive");
  if (c.newton_max_iter < 1) throw ValidationError("newton.max_iter", "must be at least 1");
  if (c.name.empty()) throw ValidationError("scenario.name", "must not be empty");
}

// ---------------------------------------------------------------------------
// INI text

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}
template <class V>
std::string fmt_vec(const V& v) {
  std::string s;
  for (int i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v(i));
  return s;
}

inline const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"scenario", {"name", "mode"}},
      {"material", {"rho", "side", "length", "young", "poisson"}},
      {"grid", {"dt", "ds", "T", "reconstruct_T"}},
      {"initial", {"kind", "profile0", "profile1", "seed_rotation", "seed_position", "second_offset"}},
      {"gravity", {"q"}},
      {"newton", {"tol", "max_iter"}},
      {"output", {"trajectory", "diagnostics", "manifest", "report"}},
  };
  return keys;
}

inline double parse_double(const std::string& text, const std::string& field) {
  std::istringstream is(text);
  double v;
  std::string rest;
  if (!(is >> v) || (is >> rest)) throw ValidationError(field, "expected a number, got '" + text + "'");
  return v;
}

template <int n>
Eigen::Matrix<double, n, 1> parse_vec(const std::string& text, const std::string& field) {
  std::istringstream is(text);
  std::vector<double> vals;
  std::string tok;
  while (is >> tok) vals.push_back(parse_double(tok, field));
  if (static_cast<int>(vals.size()) != n)
    throw ValidationError(field, "expected " + std::to_string(n) + " numbers, got " + std::to_string(vals.size()));
  Eigen::Matrix<double, n, 1> out;
  for (int i = 0; i < n; ++i) out(i) = vals[i];
  return out;
}

}  // namespace detail

inline std::string emit_config(const ScenarioConfig& c) {
  using detail::fmt;
  using detail::fmt_vec;
  std::ostringstream os;
  os << "[scenario]\nname = " << c.name << "\nmode = " << to_string(c.mode) << "\n\n";
  os << "[material]\nrho = " << fmt(c.rho) << "\nside = " << fmt(c.side) << "\nlength = " << fmt(c.length)
     << "\nyoung = " << fmt(c.young) << "\npoisson = " << fmt(c.poisson) << "\n\n";
  os << "[grid]\ndt = " << fmt(c.dt) << "\nds = " << fmt(c.ds) << "\nT = " << fmt(c.T)
     << "\nreconstruct_T = " << fmt(c.reconstruct_T) << "\n\n";
  os << "[initial]\nkind = " << to_string(c.kind) << "\nprofile0 = " << fmt_vec(c.profile0)
     << "\nprofile1 = " << fmt_vec(c.profile1) << "\nseed_rotation = " << fmt_vec(c.seed_rotation)
     << "\nseed_position = " << fmt_vec(c.seed_position) << "\nsecond_offset = " << fmt_vec(c.second_offset) << "\n\n";
  os << "[gravity]\nq = " << fmt_vec(c.gravity) << "\n\n";
  os << "[newton]\ntol = " << fmt(c.newton_tol) << "\nmax_iter = " << c.newton_max_iter << "\n\n";
  os << "[output]\ntrajectory = " << c.trajectory_csv << "\ndiagnostics = " << c.diagnostics_csv
     << "\nmanifest = " << c.manifest_json << "\nreport = " << c.report_csv << "\n";
  return os.str();
}

/// Keys left out of the text keep their defaults, except that
/// reconstruct_T follows T unless given.
inline ScenarioConfig parse_config_text(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::ini_parser::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(e.message(), static_cast<int>(e.line()));
  }
  if (tree.empty()) throw ParseError("configuration is empty");

  // Line numbers are not kept by the tree, so look them up in the text.
  auto line_of = [&](const std::string& needle) {
    std::istringstream lines(text);
    std::string l;
    for (int n = 1; std::getline(lines, l); ++n)
      if (l.find(needle) != std::string::npos) return n;
    return 0;
  };
  const auto& known = detail::known_keys();
  for (const auto& [section, body] : tree) {
    auto it = known.find(section);
    if (it == known.end()) {
      if (body.empty()) throw ParseError("key '" + section + "' outside any section", line_of(section));
      throw ParseError("unknown section [" + section + "]", line_of("[" + section + "]"));
    }
    for (const auto& [key, value] : body)
      if (!it->second.count(key)) throw ParseError("unknown key '" + section + "." + key + "'", line_of(key));
  }

  ScenarioConfig c;
  bool have_window = false;
  for (const auto& [section, body] : tree)
    for (const auto& [key, node] : body) {
      const std::string field = section + "." + key;
      const std::string v = node.get_value<std::string>();
      auto num = [&] { return detail::parse_double(v, field); };
      if (field == "scenario.name") c.name = v;
      else if (field == "scenario.mode") {
        if (v == "time_integrate") c.mode = Mode::TimeIntegrate;
        else if (v == "space_integrate") c.mode = Mode::SpaceIntegrate;
        else if (v == "time_then_space_reconstruct") c.mode = Mode::TimeThenSpace;
        else if (v == "space_then_time_reconstruct") c.mode = Mode::SpaceThenTime;
        else throw ValidationError(field, "unknown mode '" + v + "'");
      } else if (field == "material.rho") c.rho = num();
      else if (field == "material.side") c.side = num();
      else if (field == "material.length") c.length = num();
      else if (field == "material.young") c.young = num();
      else if (field == "material.poisson") c.poisson = num();
      else if (field == "grid.dt") c.dt = num();
      else if (field == "grid.ds") c.ds = num();
      else if (field == "grid.T") c.T = num();
      else if (field == "grid.reconstruct_T") c.reconstruct_T = num(), have_window = true;
      else if (field == "initial.kind") {
        if (v == "strain") c.kind = InitialKind::Strain;
        else if (v == "velocity") c.kind = InitialKind::Velocity;
        else throw ValidationError(field, "expected 'strain' or 'velocity'");
      } else if (field == "initial.profile0") c.profile0 = detail::parse_vec<6>(v, field);
      else if (field == "initial.profile1") c.profile1 = detail::parse_vec<6>(v, field);
      else if (field == "initial.seed_rotation") c.seed_rotation = detail::parse_vec<3>(v, field);
      else if (field == "initial.seed_position") c.seed_position = detail::parse_vec<3>(v, field);
      else if (field == "initial.second_offset") c.second_offset = detail::parse_vec<3>(v, field);
      else if (field == "gravity.q") c.gravity = detail::parse_vec<3>(v, field);
      else if (field == "newton.tol") c.newton_tol = num();
      else if (field == "newton.max_iter") {
        const double n = num();
        if (n != std::floor(n)) throw ValidationError(field, "must be an integer");
        c.newton_max_iter = static_cast<int>(n);
      } else if (field == "output.trajectory") c.trajectory_csv = v;
      else if (field == "output.diagnostics") c.diagnostics_csv = v;
      else if (field == "output.manifest") c.manifest_json = v;
      else if (field == "output.report") c.report_csv = v;
    }
  if (!have_window) c.reconstruct_T = c.T;
  validate(c);
  return c;
}

inline ScenarioConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

// ---------------------------------------------------------------------------
// Presets

inline std::vector<std::string> preset_names() { return {"free-beam", "scenario-A", "scenario-B", "equilibrium"}; }

inline ScenarioConfig preset(const std::string& name) {
  ScenarioConfig c;
  c.name = name;
  if (name == "free-beam") {
    c.mode = Mode::TimeThenSpace;
    c.length = 1.0;
    c.young = 5e3;
    c.dt = 0.0005;
    c.ds = 0.1;
    c.T = 3.0;
    c.reconstruct_T = 1.0;
    c.kind = InitialKind::Strain;
    c.profile0 << 1, 1.5, 1, 0, 0, 1;
    c.profile1 << 1.004, 1.52, 1.005, -0.01, 0, 1;
    c.second_offset = Vec3(0, 0, c.dt);
  } else if (name == "scenario-A" || name == "scenario-B") {
    const bool a = name == "scenario-A";
    c.mode = Mode::SpaceThenTime;
    c.length = 0.8;
    c.young = 5e4;
    c.ds = a ? 0.05 : 0.02;
    c.dt = a ? 0.05 : 0.04;
    c.T = a ? 10.0 : 1.0;
    c.reconstruct_T = c.T;
    c.kind = InitialKind::Velocity;
    if (a) {
      c.profile0 << 0, -2, 0, 0, -0.1, 0;
      c.profile1 << 0.007, -1.998, -0.007, -0.08, -0.1, 0;
    } else {
      c.profile0 << 0, -0.5, 0, 0, -0.1, 0;
      c.profile1 << 0.06, -0.499, -0.04, -0.03, -0.1, 0;
    }
    c.second_offset = Vec3(0, 0, c.ds);
  } else if (name == "equilibrium") {
    c.mode = Mode::TimeIntegrate;
    c.length = 1.0;
    c.dt = 0.0005;
    c.ds = 0.125;
    c.T = 5.0;  // 10^4 steps
    c.reconstruct_T = c.T;
    c.kind = InitialKind::Strain;
  } else {
    throw ValidationError("preset", "unknown preset '" + name + "'");
  }
  c.trajectory_csv = name + "_trajectory.csv";
  c.diagnostics_csv = name + "_diagnostics.csv";
  c.manifest_json = name + "_manifest.json";
  c.report_csv = name + "_cross_consistency.csv";
  validate(c);
  return c;
}

// ---------------------------------------------------------------------------
// Initial data and runs

/// The two opening slices: rows 0, 1 (length A+1) for time runs, columns
/// 0, 1 (length N+1) for space runs.
inline std::pair<std::vector<GroupElement>, std::vector<GroupElement>> initial_slices(const ScenarioConfig& c,
                                                                                     const BeamParams& p) {
  const GroupElement g0{cay_so3(c.seed_rotation), c.seed_position};
  const GroupElement g1{g0.rot, Vec3(c.seed_position + c.second_offset)};
  const AlgebraVector x0(c.profile0), x1(c.profile1);
  if (c.kind == InitialKind::Strain) {
    const std::vector<AlgebraVector> e0(p.last_node(), x0), e1(p.last_node(), x1);
    return build_from_boundary_time(g0, g1, e0, e1, p.ds);
  }
  const std::vector<AlgebraVector> v0(p.N_steps, x0), v1(p.N_steps, x1);
  return build_from_boundary_space(g0, g1, v0, v1, p.dt);
}

/// The primary march of a scenario: time or space according to the mode.
inline RunResult simulate(const ScenarioConfig& c) {
  validate(c);
  const BeamParams p = beam_params(c);
  const auto [s0, s1] = initial_slices(c, p);
  if (time_first(c.mode)) return run_time(s0, s1, p, p.N_steps, {}, newton_options(c));
  return run_space(s0, s1, p, p.last_node(), {}, newton_options(c));
}

// ---------------------------------------------------------------------------
// Reconstruction by re-marching in the other direction

struct CrossConsistency {
  std::string direction;  // "space" (re-march columns) or "time" (re-march rows)
  bool prescribed = false;
  int window = 0;  // rows (space) or columns (time) of the source used
  /// Per re-marched slice: largest position gap over all nodes, and over
  /// nodes away from the edge slices.
  std::vector<double> gap_all;
  std::vector<double> gap_interior;
  /// Which edge indices `gap_interior` leaves out.
  std::vector<int> excluded;
  bool completed = true;
  std::string failure;

  double max_all() const { return gap_all.empty() ? 0.0 : *std::max_element(gap_all.begin(), gap_all.end()); }
  double max_interior() const {
    return gap_interior.empty() ? 0.0 : *std::max_element(gap_interior.begin(), gap_interior.end());
  }
};

/// Space-march again from columns 0 and 1 of a time-integrated field,
/// restricted to rows 0..rows-1, and compare every column. With
/// `prescribed` the first and last rows are taken from the source;
/// otherwise the zero-momentum ghost convention applies.
inline CrossConsistency reconstruct_space(const DiscreteField& f, const BeamParams& p, int rows, bool prescribed,
                                          const NewtonOptions& newton = {}) {
  if (rows < 3 || rows > f.rows()) throw IndexOutOfRange("reconstruct_space: window of " + std::to_string(rows) + " rows");
  CrossConsistency r;
  r.direction = "space";
  r.prescribed = prescribed;
  r.window = rows;
  r.excluded = {0, rows - 2, rows - 1};
  const int A = f.cols() - 1;
  auto column = [&](int a) {
    std::vector<GroupElement> c(rows);
    for (int j = 0; j < rows; ++j) c[j] = f(j, a);
    return c;
  };
  PrescribedEdges edges;
  if (prescribed) {
    edges.first.assign(f.row(0).begin(), f.row(0).end());
    edges.last.assign(f.row(rows - 1).begin(), f.row(rows - 1).end());
  }
  try {
    const RunResult s = run_space(column(0), column(1), p, A, {}, newton,
                                  prescribed ? SpaceBoundary::Prescribed : SpaceBoundary::ZeroMomentum,
                                  prescribed ? &edges : nullptr);
    for (int a = 0; a <= A; ++a) {
      double all = 0, inner = 0;
      for (int j = 0; j < rows; ++j) {
        const double gap = (s.field(j, a).pos - f(j, a).pos).lpNorm<Eigen::Infinity>();
        all = std::max(all, gap);
        if (j > 0 && j < rows - 2) inner = std::max(inner, gap);
      }
      r.gap_all.push_back(all);
      r.gap_interior.push_back(inner);
    }
  } catch (const Error& e) {
    r.completed = false;
    r.failure = e.what();
  }
  return r;
}

/// Time-march again from rows 0 and 1 of a space-integrated field,
/// restricted to columns 0..cols-1, and compare every row.
inline CrossConsistency reconstruct_time(const DiscreteField& f, const BeamParams& p, int cols, bool prescribed,
                                         const NewtonOptions& newton = {}) {
  if (cols < 3 || cols > f.cols()) throw IndexOutOfRange("reconstruct_time: window of " + std::to_string(cols) + " columns");
  CrossConsistency r;
  r.direction = "time";
  r.prescribed = prescribed;
  r.window = cols;
  r.excluded = {0, cols - 2, cols - 1};
  const int N = f.rows() - 1;
  auto row = [&](int j) { return std::vector<GroupElement>(f.row(j).begin(), f.row(j).begin() + cols); };
  PrescribedEdges edges;
  if (prescribed) {
    edges.first = f.column(0).to_vector();
    edges.last = f.column(cols - 1).to_vector();
  }
  try {
    const RunResult t = run_time(row(0), row(1), p, N, {}, newton,
                                 prescribed ? TimeBoundary::Prescribed : TimeBoundary::ZeroTraction,
                                 prescribed ? &edges : nullptr);
    for (int j = 0; j <= N; ++j) {
      double all = 0, inner = 0;
      for (int a = 0; a < cols; ++a) {
        const double gap = (t.field(j, a).pos - f(j, a).pos).lpNorm<Eigen::Infinity>();
        all = std::max(all, gap);
        if (a > 0 && a < cols - 2) inner = std::max(inner, gap);
      }
      r.gap_all.push_back(all);
      r.gap_interior.push_back(inner);
    }
  } catch (const Error& e) {
    r.completed = false;
    r.failure = e.what();
  }
  return r;
}

}  // namespace beamvi

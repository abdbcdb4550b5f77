// beamvi_cli: run scenarios, check step sizes, re-march stored trajectories.
//
// Exit codes: 0 ok, 1 configuration or usage error, 2 solver failure.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <boost/version.hpp>

#if __has_include("CLI11.hpp")
#include "CLI11.hpp"
#else
#include <CLI/CLI.hpp>
#endif
#include <nlohmann/json.hpp>

#include "beamvi/io.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace beamvi;

namespace {

constexpr int kOk = 0, kConfigError = 1, kSolverFailure = 2;

json vec_json(const auto& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json config_json(const ScenarioConfig& c) {
  return {
      {"name", c.name},
      {"mode", to_string(c.mode)},
      {"material", {{"rho", c.rho}, {"side", c.side}, {"length", c.length}, {"young", c.young}, {"poisson", c.poisson}}},
      {"grid", {{"dt", c.dt}, {"ds", c.ds}, {"T", c.T}, {"reconstruct_T", c.reconstruct_T}}},
      {"initial",
       {{"kind", to_string(c.kind)},
        {"profile0", vec_json(c.profile0)},
        {"profile1", vec_json(c.profile1)},
        {"seed_rotation", vec_json(c.seed_rotation)},
        {"seed_position", vec_json(c.seed_position)},
        {"second_offset", vec_json(c.second_offset)}}},
      {"gravity", vec_json(c.gravity)},
      {"newton", {{"tol", c.newton_tol}, {"max_iter", c.newton_max_iter}}},
      {"output",
       {{"trajectory", c.trajectory_csv},
        {"diagnostics", c.diagnostics_csv},
        {"manifest", c.manifest_json},
        {"report", c.report_csv}}},
  };
}

json versions() {
  return {{"beamvi", BEAMVI_VERSION},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"boost", BOOST_LIB_VERSION},
          {"cli11", CLI11_VERSION},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"compiler", __VERSION__}};
}

json cross_json(const CrossConsistency& r) {
  json j = {{"direction", r.direction},
            {"boundary", r.prescribed ? "prescribed" : "natural"},
            {"window", r.window},
            {"completed", r.completed},
            {"interior_excludes", r.excluded}};
  if (r.completed) {
    j["max_gap_all"] = r.max_all();
    j["max_gap_interior"] = r.max_interior();
  } else {
    j["failure"] = r.failure;
  }
  return j;
}

void configure_threads() {
  const char* env = std::getenv("BEAMVI_THREADS");
  int n = 1;
  if (env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*env == '\0' || *end != '\0' || v < 1) throw ValidationError("BEAMVI_THREADS", "expected a positive integer");
    n = static_cast<int>(v);
  }
#if defined(_OPENMP)
  omp_set_num_threads(n);
#else
  if (n > 1) std::cerr << "warning: built without OpenMP, BEAMVI_THREADS=" << n << " ignored\n";
#endif
}

ScenarioConfig load(const std::string& path, const std::string& preset_name) {
  if (path.empty() == preset_name.empty()) throw ValidationError("config", "give exactly one of <config> or --preset");
  return preset_name.empty() ? parse_config(path) : preset(preset_name);
}

void cfl_report(const BeamParams& p, std::ostream& os) {
  const double sugg = cfl_suggested_dt(p);
  os << std::setprecision(17) << "wave_speed = " << dilational_wave_speed(p) << "\nsuggested_dt = " << sugg
     << "\nconfigured_dt = " << p.dt << '\n';
  if (p.dt > sugg) std::cerr << "warning: dt = " << p.dt << " exceeds the suggested " << sugg << '\n';
}

int run_scenario(const ScenarioConfig& c, const fs::path& out, bool prescribed) {
  const auto start = std::chrono::steady_clock::now();
  fs::create_directories(out);
  const BeamParams p = beam_params(c);
  json manifest = {{"config", config_json(c)}, {"config_ini", emit_config(c)}, {"versions", versions()}};
  manifest["cfl"] = {{"suggested_dt", cfl_suggested_dt(p)}, {"exceeded", p.dt > cfl_suggested_dt(p)}};
  if (p.dt > cfl_suggested_dt(p))
    std::cerr << "warning: dt = " << p.dt << " exceeds the suggested " << cfl_suggested_dt(p) << '\n';

  int status = kOk;
  auto finish = [&] {
    manifest["status"] = status == kOk ? "ok" : "solver_failure";
    manifest["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ofstream(out / c.manifest_json) << manifest.dump(2) << '\n';
    return status;
  };

  RunResult run;
  try {
    run = simulate(c);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    manifest["error"] = e.what();
    status = kSolverFailure;
    return finish();
  }
  manifest["newton"] = {{"solves", run.newton.solves},
                        {"max_iterations", run.newton.max_iterations},
                        {"max_residual", run.newton.max_residual}};
  write_trajectory((out / c.trajectory_csv).string(), run.field);
  manifest["rows"] = run.field.rows();
  manifest["cols"] = run.field.cols();

  try {
    const ConservationReport rep = time_first(c.mode) ? time_report(run.field, p) : space_report(run.field, p);
    write_diagnostics((out / c.diagnostics_csv).string(), rep);
    manifest["diagnostics"] = {{"max_momentum_drift", rep.max_momentum_drift()},
                               {"max_energy_drift", rep.max_energy_drift()},
                               {"noether_inf_norm", rep.noether_residual.v.lpNorm<Eigen::Infinity>()},
                               {"orthogonality_drift", rep.orthogonality_drift}};
  } catch (const Error& e) {
    std::cerr << "error: diagnostics: " << e.what() << '\n';
    manifest["diagnostics_error"] = e.what();
    status = kSolverFailure;
  }

  if (c.mode == Mode::TimeThenSpace || c.mode == Mode::SpaceThenTime) {
    const NewtonOptions opt = newton_options(c);
    const CrossConsistency cc =
        c.mode == Mode::TimeThenSpace
            ? reconstruct_space(run.field, p, static_cast<int>(std::lround(c.reconstruct_T / c.dt)) + 1, prescribed, opt)
            : reconstruct_time(run.field, p, run.field.cols(), prescribed, opt);
    write_cross_consistency((out / c.report_csv).string(), cc);
    manifest["cross_consistency"] = cross_json(cc);
    if (!cc.completed) std::cerr << "warning: re-march stopped: " << cc.failure << '\n';
  }
  std::cout << "wrote " << (out / c.trajectory_csv).string() << '\n';
  return finish();
}

int reconstruct(const std::string& csv, const ScenarioConfig& c, const std::string& direction, bool prescribed,
                int window, const std::string& report) {
  const DiscreteField f = read_trajectory(csv);
  const BeamParams p = beam_params(c);
  if (std::abs(f.dt() - p.dt) > 1e-12 * p.dt) throw ValidationError("grid.dt", "does not match the trajectory");
  if (std::abs(f.ds() - p.ds) > 1e-12 * p.ds) throw ValidationError("grid.ds", "does not match the trajectory");
  const CrossConsistency cc = direction == "space"
                                  ? reconstruct_space(f, p, window > 0 ? window : f.rows(), prescribed, newton_options(c))
                                  : reconstruct_time(f, p, window > 0 ? window : f.cols(), prescribed, newton_options(c));
  write_cross_consistency(report, cc);
  std::cout << cross_json(cc).dump(2) << '\n';
  return cc.completed ? kOk : kSolverFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multisymplectic Lie group integrator for geometrically exact beams"};
  app.require_subcommand(1);

  std::string config, preset_name, out_dir = ".", boundary = "prescribed";
  auto* run = app.add_subcommand("run", "Integrate a scenario and write trajectory, diagnostics and manifest");
  run->add_option("config", config, "INI configuration file");
  run->add_option("--preset", preset_name, "Built-in scenario")->check(CLI::IsMember(preset_names()));
  run->add_option("--out-dir", out_dir, "Directory for the outputs");
  run->add_option("--boundary", boundary, "Edges of the reconstruction re-march")
      ->check(CLI::IsMember({"prescribed", "natural"}));

  auto* cfl = app.add_subcommand("check-cfl", "Print the suggested time step for a configuration");
  cfl->add_option("config", config, "INI configuration file");
  cfl->add_option("--preset", preset_name, "Built-in scenario")->check(CLI::IsMember(preset_names()));

  std::string trajectory, direction, report = "cross_consistency.csv";
  int window = 0;
  auto* rec = app.add_subcommand("reconstruct", "Re-march a stored trajectory in the other direction");
  rec->add_option("trajectory", trajectory, "Trajectory CSV")->required();
  rec->add_option("--direction", direction, "Direction of the re-march")
      ->required()
      ->check(CLI::IsMember({"space", "time"}));
  rec->add_option("--boundary", boundary, "Edges of the re-march")->check(CLI::IsMember({"prescribed", "natural"}));
  rec->add_option("--config", config, "INI configuration with the material");
  rec->add_option("--preset", preset_name, "Built-in scenario with the material")->check(CLI::IsMember(preset_names()));
  rec->add_option("--window", window, "Rows (space) or columns (time) of the source to use");
  rec->add_option("--out", report, "Report CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    configure_threads();
    const ScenarioConfig c = load(config, preset_name);
    if (*run) return run_scenario(c, out_dir, boundary == "prescribed");
    if (*cfl) {
      cfl_report(beam_params(c), std::cout);
      return kOk;
    }
    return reconstruct(trajectory, c, direction, boundary == "prescribed", window, report);
  } catch (const ParseError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ValidationError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSolverFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSolverFailure;
  }
}

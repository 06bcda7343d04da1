#include "delayopt/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace delayopt {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v))
    throw ConfigError("key '" + key + "': expected a number, got '" + t + "'");
  return v;
}

std::size_t parse_count(const std::string& key, const std::string& text) {
  const double v = parse_double(key, text);
  if (v < 0.0 || v != std::floor(v) || v > 1e9)
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + trim(text) + "'");
  return static_cast<std::size_t>(v);
}

double parse_positive(const std::string& key, const std::string& text) {
  const double v = parse_double(key, text);
  if (!(v > 0.0)) throw ConfigError("key '" + key + "': expected a positive number, got '" + trim(text) + "'");
  return v;
}

int parse_int(const std::string& key, const std::string& text) {
  return static_cast<int>(parse_count(key, text));
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, item));
  if (out.empty()) throw ConfigError("key '" + key + "': expected a comma separated list");
  return out;
}

using Field = std::function<double(double, double)>;

Field make_field(const std::string& what, const std::string& family, const std::vector<double>& a) {
  auto need = [&](std::size_t n) {
    if (a.size() != n)
      throw ConfigError(what + " family '" + family + "' takes " + std::to_string(n) + " parameters, got " +
                        std::to_string(a.size()));
  };
  if (family == "zero") return [](double, double) { return 0.0; };
  if (family == "constant") {
    need(1);
    return Prehistory::constant(a[0]);
  }
  if (family == "front") {
    need(3);
    return Prehistory::traveling_front(a[0], a[1], a[2]);
  }
  if (family == "cosine_squared") {
    need(2);
    return Prehistory::cosine_squared(a[0], a[1]);
  }
  if (family == "affine_sin2") {
    need(4);
    return Prehistory::affine_sin2(a[0], a[1], a[2], a[3]);
  }
  throw ConfigError("unknown " + what + " family '" + family + "'");
}

Prehistory make_prehistory(const std::string& family, const std::vector<double>& a) {
  if (family == "zero") throw ConfigError("unknown prehistory family 'zero'; use 'constant' with 0");
  return Prehistory(family, make_field("prehistory", family, a));
}

std::vector<double> cubic_coefficients(double rho, double y1, double y2, double y3) {
  return ReactionModel::cubic(rho, y1, y2, y3).coefficients();
}

/// sqrt of the time-trapezoid of ||a_i - b_i||^2_M over [0, T].
double l2q_distance(const Problem& p, const Trajectory& a, const Trajectory& b) {
  const std::size_t n = p.mesh().size();
  std::vector<double> e(n);
  double sum = 0.0;
  for (std::size_t i = 0; i <= p.steps(); ++i) {
    for (std::size_t j = 0; j < n; ++j) e[j] = a(i, j) - b(i, j);
    double w = 0.0;
    if (i > 0) w += 0.5 * p.time().step(i);
    if (i < p.steps()) w += 0.5 * p.time().step(i + 1);
    sum += w * l2_inner(p.ops(), e, e);
  }
  return std::sqrt(sum);
}

template <class F>
void parallel_for(std::size_t count, unsigned threads, F&& body) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < count;) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

nlohmann::json report_json(const OptimalityReport& r) {
  nlohmann::json j;
  j["F"] = r.F;
  j["nu_j"] = r.nu_j;
  j["tikhonov"] = r.tikhonov;
  j["J"] = r.J;
  j["norm_u"] = r.norm_u;
  j["support"] = r.support;
  j["lambda_max_abs"] = r.lambda_max_abs;
  j["sign_violation_max"] = r.sign_violation_max;
  j["violation_count"] = r.violation_count;
  return j;
}

}  // namespace

std::vector<std::string> preset_names() { return {"example1", "example2", "example3", "example4", "example5"}; }

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig c;
  c.preset = name;
  if (name == "custom") return c;
  if (name == "example1" || name == "example2") {
    const double r3 = std::sqrt(3.0);
    c.reaction = cubic_coefficients(1.0 / 3.0, -r3, 0.0, r3);
    c.prehistory = "affine_sin2";
    c.prehistory_params = {0.2, 0.2, 0.0, 1.0};
    c.target = "manufactured";
    c.target_params = {0.5, -7.7, 0.01, 1.0};
    c.T = 1.0;
    c.control_horizon = 1.0;
    if (name == "example1") {
      c.space_nodes = 257;
      c.time_steps = 256;
      c.nu = 3.39817e-4;
      c.control_intervals = 27;
    } else {
      c.space_nodes = 65;
      c.time_steps = 64;
      c.nu = 1e-2;
      c.target_params[3] = 4.0;
    }
    return c;
  }
  if (name == "example3") {
    c.x_left = -20.0;
    c.x_right = 20.0;
    c.space_nodes = 513;
    c.T = 40.0;
    c.time_steps = 777;
    c.time_grading = 10.0;
    c.reaction = cubic_coefficients(1.0, 0.0, 0.25, 1.0);
    c.prehistory = "front";
    c.prehistory_params = {0.0, 0.25, 1.0};
    c.target = "kernel_state";
    c.target_params = {0.5, 0.456, 0.541};
    c.nu = 1e-2;
    c.control_horizon = 1.0;
    c.control_intervals = 100;
    return c;
  }
  if (name == "example4" || name == "example5") {
    c.space_nodes = 17;
    c.T = 2.0;
    c.reaction = cubic_coefficients(1.0, 0.0, 0.25, 1.0);
    c.nu = 1e-3;
    c.window_begin = 1.0;
    c.window_end = 2.0;
    c.control_horizon = 2.0;
    c.solver.max_newton = 400;
    if (name == "example4") {
      c.time_steps = 512;
      c.solver.max_total_newton = 600;
      c.prehistory = "constant";
      c.prehistory_params = {1.0};
      c.target = "constant";
      c.target_params = {0.25};
    } else {
      c.time_steps = 256;
      c.prehistory = "cosine_squared";
      c.prehistory_params = {0.5, 2.0};
      c.target = "cosine_squared";
      c.target_params = {0.5, 1.0};
    }
    return c;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (key == "preset") c = preset_config(v);
  else if (key == "mesh.x_left") c.x_left = parse_double(key, v);
  else if (key == "mesh.x_right") c.x_right = parse_double(key, v);
  else if (key == "mesh.nodes") c.space_nodes = parse_count(key, v);
  else if (key == "time.T") c.T = parse_positive(key, v);
  else if (key == "time.steps") c.time_steps = parse_count(key, v);
  else if (key == "time.grading") c.time_grading = parse_positive(key, v);
  else if (key == "reaction.coeffs") c.reaction = parse_list(key, v);
  else if (key == "reaction.cubic") {
    const auto a = parse_list(key, v);
    if (a.size() != 4) throw ConfigError("key 'reaction.cubic': expected rho, y1, y2, y3");
    try {
      c.reaction = cubic_coefficients(a[0], a[1], a[2], a[3]);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("key 'reaction.cubic': " + std::string(e.what()));
    }
  } else if (key == "prehistory.family") c.prehistory = v;
  else if (key == "prehistory.params") c.prehistory_params = parse_list(key, v);
  else if (key == "target.family") c.target = v;
  else if (key == "target.params") c.target_params = parse_list(key, v);
  else if (key == "nu") c.nu = parse_positive(key, v);
  else if (key == "window.begin") c.window_begin = parse_double(key, v);
  else if (key == "window.end") c.window_end = parse_double(key, v);
  else if (key == "control.horizon") c.control_horizon = parse_positive(key, v);
  else if (key == "control.intervals") c.control_intervals = parse_count(key, v);
  else if (key == "control.nodes") c.control_nodes = parse_list(key, v);
  else if (key == "control.file") c.control_nodes = read_control_nodes(v);
  else if (key == "solver.c0") c.solver.c0 = parse_positive(key, v);
  else if (key == "solver.growth") c.solver.growth = parse_positive(key, v);
  else if (key == "solver.c_max") c.solver.c_max = parse_positive(key, v);
  else if (key == "solver.stop_tol") c.solver.stop_tol = parse_positive(key, v);
  else if (key == "solver.tol") c.solver.tol = parse_positive(key, v);
  else if (key == "solver.floor_tol") c.solver.floor_tol = parse_positive(key, v);
  else if (key == "solver.max_newton") c.solver.max_newton = parse_int(key, v);
  else if (key == "solver.max_total_newton") c.solver.max_total_newton = parse_int(key, v);
  else if (key == "solver.krylov_tol") c.solver.krylov_tol = parse_positive(key, v);
  else if (key == "solver.krylov_max") c.solver.krylov_max = parse_int(key, v);
  else if (key == "solver.krylov_restart") c.solver.krylov_restart = parse_int(key, v);
  else if (key == "solver.max_halvings") c.solver.max_halvings = parse_int(key, v);
  else throw ConfigError("unknown key '" + key + "'");
}

ExperimentConfig parse_config(std::istream& in, const std::string& source) {
  struct Entry {
    std::size_t line;
    std::string key;
    std::string value;
  };
  std::vector<Entry> entries;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(number) + ": expected 'key = value'");
    Entry e{number, trim(line.substr(0, eq)), trim(line.substr(eq + 1))};
    for (const auto& prev : entries)
      if (prev.key == e.key)
        throw ConfigError(source + ":" + std::to_string(number) + ": duplicate key '" + e.key + "'");
    entries.push_back(std::move(e));
  }
  ExperimentConfig cfg;
  auto apply = [&](const Entry& e) {
    try {
      apply_setting(cfg, e.key, e.value);
    } catch (const std::exception& ex) {
      throw ConfigError(source + ":" + std::to_string(e.line) + ": " + ex.what());
    }
  };
  for (const auto& e : entries)
    if (e.key == "preset") apply(e);
  for (const auto& e : entries)
    if (e.key != "preset") apply(e);
  try {
    cfg.solver.validate();
  } catch (const std::exception& ex) {
    throw ConfigError(source + ": " + ex.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  return parse_config(in, path.string());
}

std::vector<double> read_control_nodes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open control grid file '" + path.string() + "'");
  std::vector<double> nodes;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const std::string first = trim(line.substr(0, line.find(',')));
    char* end = nullptr;
    const double v = std::strtod(first.c_str(), &end);
    if (end != first.c_str() + first.size() || first.empty()) {
      if (nodes.empty() && number == 1) continue;  // header
      throw ConfigError(path.string() + ":" + std::to_string(number) + ": expected a number");
    }
    nodes.push_back(v);
  }
  return nodes;
}

AdjointCandidate cosine_adjoint(double T, double amplitude) {
  const double a = std::numbers::pi / (2.0 * T);
  return AdjointCandidate{
      [=](double, double t) { return t <= T ? amplitude * std::pow(std::cos(a * t), 2) : 0.0; },
      [=](double, double t) { return t <= T ? -amplitude * a * std::sin(2.0 * a * t) : 0.0; },
      [](double, double) { return 0.0; }};
}

GeneralMeasure pyragas_kernel(double kappa, double ta, double tb) {
  if (!(0.0 <= ta && ta < tb)) throw std::invalid_argument("pyragas_kernel: need 0 <= ta < tb");
  return GeneralMeasure(tb, {{0.0, -kappa}}, {{ta, tb, kappa / (tb - ta)}});
}

std::pair<ProblemSpec, ManufacturedReference> build_manufactured(ProblemSpec base,
                                                                 const AdjointCandidate& phi,
                                                                 const GeneralMeasure& u) {
  const auto& mesh = base.mesh;
  const auto& time = base.time;
  const double T = time.final_time();
  for (double x : mesh.nodes()) {
    if (std::abs(phi.value(x, T)) > 1e-12)
      throw std::invalid_argument("build_manufactured: adjoint candidate violates phi(., T) = 0");
  }
  base.target = Trajectory(time.steps() + 1, mesh.size());
  Problem plain(base);
  auto y = solve_state(plain, u);

  // integral of phi(x, t + s) over a density piece, phi = 0 past T
  constexpr std::array<double, 4> gx{-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                                     0.8611363115940526};
  constexpr std::array<double, 4> gw{0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                                     0.3478548451374538};
  auto piece_integral = [&](const DensityPiece& pc, double x, double t) {
    const double b = std::min(pc.b, T - t);
    if (b <= pc.a) return 0.0;
    constexpr int sub = 32;
    const double h = (b - pc.a) / sub;
    double s = 0.0;
    for (int m = 0; m < sub; ++m) {
      const double mid = pc.a + (m + 0.5) * h;
      for (std::size_t q = 0; q < gx.size(); ++q) s += gw[q] * 0.5 * h * phi.value(x, t + mid + 0.5 * h * gx[q]);
    }
    return pc.value * s;
  };

  const auto x = mesh.nodes();
  const auto& R = base.reaction;
  for (std::size_t i = 0; i <= time.steps(); ++i) {
    const double t = time[i];
    for (std::size_t j = 0; j < mesh.size(); ++j) {
      const double yb = y.values(i, j);
      double v = phi.dt(x[j], t) + phi.laplacian(x[j], t) - R.eval(yb, 1) * phi.value(x[j], t) + yb;
      for (const auto& a : u.atoms())
        if (t + a.location <= T) v += a.weight * phi.value(x[j], t + a.location);
      for (const auto& pc : u.pieces()) v += piece_integral(pc, x[j], t);
      base.target(i, j) = v;
    }
  }
  return {std::move(base), ManufacturedReference{u, std::move(y), phi}};
}

BuiltProblem build_problem(const ExperimentConfig& c) {
  try {
    c.solver.validate();
    if (c.space_nodes < 3) throw ConfigError("mesh.nodes must be at least 3");
    if (!(c.x_left < c.x_right)) throw ConfigError("mesh.x_left must be below mesh.x_right");
    if (!(c.T > 0.0) || c.time_steps < 1) throw ConfigError("time.T and time.steps must be positive");
    if (!(c.nu > 0.0)) throw ConfigError("nu must be positive");

    auto mesh = SpaceMesh::uniform(c.x_left, c.x_right, c.space_nodes);
    auto time = TimeGrid::graded(c.T, c.time_steps, c.time_grading);

    std::vector<double> nodes = c.control_nodes;
    if (nodes.empty()) {
      const double horizon = c.control_horizon.value_or(c.T);
      if (!(horizon > 0.0)) throw ConfigError("control.horizon must be positive");
      std::size_t intervals = c.control_intervals;
      if (intervals == 0) {
        if (c.time_grading != 1.0)
          throw ConfigError("control.intervals is required with a graded time grid");
        intervals = static_cast<std::size_t>(std::llround(static_cast<double>(c.time_steps) * horizon / c.T));
        if (intervals == 0) intervals = 1;
      }
      const auto grid = ControlGrid::uniform(horizon, intervals);
      nodes.assign(grid.nodes().begin(), grid.nodes().end());
    }

    ProblemSpec spec{mesh,
                     time,
                     ReactionModel(c.reaction),
                     make_prehistory(c.prehistory, c.prehistory_params),
                     Trajectory(time.steps() + 1, mesh.size()),
                     c.nu,
                     c.window_begin.value_or(0.0),
                     c.window_end.value_or(c.T),
                     ControlGrid(nodes),
                     {}};

    std::optional<ManufacturedReference> reference;
    if (c.target == "manufactured") {
      if (c.target_params.size() != 4)
        throw ConfigError("target family 'manufactured' takes t_star, u_star, amplitude, refine");
      const double rf = c.target_params[3];
      if (rf < 1.0 || rf != std::floor(rf)) throw ConfigError("manufactured refine must be a positive integer");
      const auto r = static_cast<std::size_t>(rf);
      if (r > 1 && c.time_grading != 1.0) throw ConfigError("manufactured refine needs a uniform time grid");
      GeneralMeasure ubar(c.T, {{c.target_params[0], c.target_params[1]}});
      // y_d and the reference state are built on a grid refined r times in
      // space and time, then restricted to the nested nodes.
      ProblemSpec fine = spec;
      fine.mesh = SpaceMesh::uniform(c.x_left, c.x_right, (c.space_nodes - 1) * r + 1);
      fine.time = TimeGrid::uniform(c.T, c.time_steps * r);
      fine.target = Trajectory(fine.time.steps() + 1, fine.mesh.size());
      auto [built, ref] = build_manufactured(std::move(fine), cosine_adjoint(c.T, c.target_params[2]), ubar);
      Trajectory yref(time.steps() + 1, mesh.size());
      for (std::size_t i = 0; i <= time.steps(); ++i)
        for (std::size_t j = 0; j < mesh.size(); ++j) {
          spec.target(i, j) = built.target(i * r, j * r);
          yref(i, j) = ref.y.values(i * r, j * r);
        }
      Problem coarse(spec);
      ref.y = StateTrajectory{coarse.time_ptr(), coarse.mesh_ptr(), coarse.history_ptr(), std::move(yref)};
      reference = std::move(ref);
    } else if (c.target == "kernel_state") {
      if (c.target_params.size() != 3) throw ConfigError("target family 'kernel_state' takes kappa, ta, tb");
      const auto k = pyragas_kernel(c.target_params[0], c.target_params[1], c.target_params[2]);
      const GeneralMeasure ud(c.T, {k.atoms().begin(), k.atoms().end()}, {k.pieces().begin(), k.pieces().end()});
      Problem plain(spec);
      spec.target = solve_state(plain, ud).values;
    } else {
      spec.target = sample_field(mesh, time, make_field("target", c.target, c.target_params));
    }
    return BuiltProblem{Problem(std::move(spec)), std::move(reference)};
  } catch (const ConfigError&) {
    throw;
  } catch (const SolverError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
}

}  // namespace

RunSummary run_config(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  const auto built = build_problem(cfg);
  const Problem& p = built.problem;
  RunSummary run{continuation_solve(p, cfg.solver), 0};
  const auto& r = run.result;
  run.exit_code = r.converged ? 0 : 2;

  const auto y = solve_state(p, r.u);
  std::ostringstream control, lambda, state, target, trace;
  write_measure_csv(control, r.u);
  write_lambda_csv(lambda, r.u, r.report.lambda);
  write_trajectory_csv(state, p.time(), p.mesh(), y.values);
  write_trajectory_csv(target, p.time(), p.mesh(), p.target());
  write_trace_csv(trace, r.trace);

  nlohmann::json j = report_json(r.report);
  j["preset"] = cfg.preset;
  j["nu"] = p.nu();
  j["converged"] = r.converged;
  j["krylov_fallback"] = r.krylov_fallback;
  j["final_c"] = r.final_c;
  j["unregularized"] = report_json(r.unregularized);
  nlohmann::json atoms = nlohmann::json::array();
  for (auto k : r.report.support) atoms.push_back({{"t", r.u.location(k)}, {"weight", r.u.weight(k)}});
  j["atoms"] = atoms;
  if (built.reference) {
    j["reference"] = {{"y_error_l2", l2q_distance(p, y.values, built.reference->y.values)},
                      {"norm_u", total_variation(built.reference->u)},
                      {"F", tracking_cost(p, built.reference->y)}};
  }

  std::filesystem::create_directories(out_dir);
  write_file(out_dir / "control.csv", control.str());
  write_file(out_dir / "lambda.csv", lambda.str());
  write_file(out_dir / "state.csv", state.str());
  write_file(out_dir / "target.csv", target.str());
  write_file(out_dir / "trace.csv", trace.str());
  write_file(out_dir / "summary.json", j.dump(2) + "\n");
  return run;
}

std::vector<Table1Row> table1(const ExperimentConfig& base, const std::vector<int>& exponents,
                              unsigned threads) {
  const auto ref_built = build_problem(base);
  if (!ref_built.reference) throw ConfigError("table1 needs a manufactured target");
  const auto& ref = *ref_built.reference;
  const double t_star = ref.u.atoms().front().location;

  std::vector<Table1Row> rows(exponents.size());
  parallel_for(exponents.size(), threads, [&](std::size_t r) {
    ExperimentConfig cfg = base;
    cfg.control_nodes.clear();
    cfg.control_intervals = static_cast<std::size_t>(std::llround(std::pow(3.0, exponents[r])));
    const auto built = build_problem(cfg);
    const Problem& p = built.problem;
    const auto res = continuation_solve(p, cfg.solver);
    const auto y = solve_state(p, res.u);
    Table1Row row;
    row.tau = "3^-" + std::to_string(exponents[r]);
    const auto nodes = p.control().nodes();
    const auto upper = std::upper_bound(nodes.begin(), nodes.end(), t_star);
    const std::size_t kp = static_cast<std::size_t>(upper - nodes.begin());
    std::size_t km = kp - 1;
    if (nodes[km] == t_star && km > 0) --km;
    row.t_minus = nodes[km];
    row.u_minus = res.u.weight(km);
    row.t_plus = nodes[kp];
    row.u_plus = res.u.weight(kp);
    row.y_error = l2q_distance(p, y.values, ref.y.values);
    row.norm_u = res.unregularized.norm_u;
    row.F = res.unregularized.F;
    row.nu_j = res.unregularized.nu_j;
    row.support = res.unregularized.support.size();
    row.lambda_max_abs = res.unregularized.lambda_max_abs;
    row.sign_violation_max = res.unregularized.sign_violation_max;
    row.converged = res.converged;
    rows[r] = row;
  });

  Table1Row exact;
  exact.tau = "exact";
  exact.t_minus = exact.t_plus = t_star;
  exact.u_minus = exact.u_plus = ref.u.atoms().front().weight;
  exact.norm_u = total_variation(ref.u);
  exact.F = tracking_cost(ref_built.problem, ref.y);
  exact.nu_j = ref_built.problem.nu() * exact.norm_u;
  exact.support = 1;
  exact.converged = true;
  rows.push_back(exact);
  return rows;
}

void write_table1_csv(std::ostream& out, const std::vector<Table1Row>& rows) {
  const auto old = out.precision(10);
  out << "tau,t_minus,u_minus,t_plus,u_plus,y_error_l2,norm_u,F,nu_j,support,lambda_max_abs,"
         "sign_violation_max,converged\n";
  for (const auto& r : rows)
    out << r.tau << ',' << r.t_minus << ',' << r.u_minus << ',' << r.t_plus << ',' << r.u_plus << ','
        << r.y_error << ',' << r.norm_u << ',' << r.F << ',' << r.nu_j << ',' << r.support << ','
        << r.lambda_max_abs << ',' << r.sign_violation_max << ',' << (r.converged ? 1 : 0) << '\n';
  out.precision(old);
}

std::vector<double> table2_default_nus() { return {1e-1, 6e-2, 5e-2, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8}; }

std::vector<Table2Row> table2(const ExperimentConfig& base, const std::vector<double>& nus, unsigned threads) {
  const auto built = build_problem(base);
  std::vector<Table2Row> rows(nus.size());
  parallel_for(nus.size(), threads, [&](std::size_t r) {
    const Problem p = built.problem.with_nu(nus[r]);
    const auto res = continuation_solve(p, base.solver);
    Table2Row row;
    row.nu = nus[r];
    row.F = res.unregularized.F;
    row.norm_u = res.unregularized.norm_u;
    row.support = res.unregularized.support.size();
    row.lambda_max_abs = res.unregularized.lambda_max_abs;
    row.sign_violation_max = res.unregularized.sign_violation_max;
    row.converged = res.converged;
    row.u.assign(res.u.weights().begin(), res.u.weights().end());
    rows[r] = std::move(row);
  });
  return rows;
}

void write_table2_csv(std::ostream& out, const std::vector<Table2Row>& rows) {
  const auto old = out.precision(10);
  out << "nu,F,norm_u,support,lambda_max_abs,sign_violation_max,converged\n";
  for (const auto& r : rows)
    out << r.nu << ',' << r.F << ',' << r.norm_u << ',' << r.support << ',' << r.lambda_max_abs << ','
        << r.sign_violation_max << ',' << (r.converged ? 1 : 0) << '\n';
  out.precision(old);
}

std::vector<CheckResult> gradcheck(const Problem& p, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> normal;
  const std::size_t K = p.control().size();
  auto random_measure = [&](double scale) {
    std::vector<double> w(K);
    for (double& v : w) v = scale * normal(rng);
    return AtomicMeasure(p.control(), std::move(w));
  };
  auto combine = [&](const AtomicMeasure& a, double s, const AtomicMeasure& b) {
    std::vector<double> w(K);
    for (std::size_t k = 0; k < K; ++k) w[k] = a.weight(k) + s * b.weight(k);
    return AtomicMeasure(p.control(), std::move(w));
  };
  std::vector<CheckResult> out;
  const auto u = random_measure(0.5 / std::sqrt(static_cast<double>(K)));
  const auto ev = evaluate(p, u);

  // adjoint identity against the linearized state
  {
    double worst = 0.0;
    for (int d = 0; d < 3; ++d) {
      const auto v = random_measure(1.0);
      const auto z = solve_linearized_state(p, u, ev.y, v);
      const auto w = p.tracking_weights();
      std::vector<double> e(p.mesh().size());
      double lin = 0.0;
      for (std::size_t i = 0; i <= p.steps(); ++i) {
        if (w[i] == 0.0) continue;
        for (std::size_t j = 0; j < e.size(); ++j) e[j] = ev.y.values(i, j) - p.target()(i, j);
        lin += w[i] * l2_inner(p.ops(), e, z.values.row(i));
      }
      const double g = grad_F_direction(p, ev.y, ev.phi, v);
      worst = std::max(worst, std::abs(g - lin) / std::max(std::abs(lin), 1e-300));
    }
    out.push_back({"adjoint gradient identity", worst <= 1e-10, worst, 1e-10});
  }
  // central differences of F
  {
    double worst = 0.0;
    const double rho = 1e-5;
    for (int d = 0; d < 5; ++d) {
      const auto v = random_measure(1.0);
      const double fd = (tracking_cost(p, solve_state(p, combine(u, rho, v))) -
                         tracking_cost(p, solve_state(p, combine(u, -rho, v)))) /
                        (2.0 * rho);
      const double g = grad_F_direction(p, ev.y, ev.phi, v);
      worst = std::max(worst, std::abs(g - fd) / std::max(std::abs(fd), 1e-300));
    }
    out.push_back({"gradient vs central differences", worst <= 1e-5, worst, 1e-5});
  }
  // Taylor remainders of the linearizations
  {
    const auto v = random_measure(1.0);
    const auto z = solve_linearized_state(p, u, ev.y, v);
    const auto eta = solve_linearized_adjoint(p, u, ev.y, ev.phi, v, z);
    std::vector<double> rz, re;
    for (double rho : {1e-2, 1e-3, 1e-4}) {
      const auto up = combine(u, rho, v);
      const auto yp = solve_state(p, up);
      const auto pp = solve_adjoint(p, up, yp);
      Trajectory dz(yp.values.rows(), yp.values.cols()), de(dz.rows(), dz.cols());
      for (std::size_t i = 0; i < dz.rows(); ++i)
        for (std::size_t j = 0; j < dz.cols(); ++j) {
          dz(i, j) = yp.values(i, j) - ev.y.values(i, j) - rho * z.values(i, j);
          de(i, j) = pp.values(i, j) - ev.phi.values(i, j) - rho * eta.values(i, j);
        }
      const Trajectory zero(dz.rows(), dz.cols());
      rz.push_back(l2q_distance(p, dz, zero));
      re.push_back(l2q_distance(p, de, zero));
    }
    auto order = [](const std::vector<double>& r) {
      return std::min(std::log10(r[0] / r[1]), std::log10(r[1] / r[2]));
    };
    out.push_back({"linearized state Taylor order", order(rz) >= 1.9, order(rz), 1.9});
    out.push_back({"linearized adjoint Taylor order", order(re) >= 1.9, order(re), 1.9});
  }
  // Jacobian of lambda
  {
    const double rho = 1e-5;
    const auto d = random_measure(1.0);
    const double c = 1e3;
    const auto jd = jacobian_apply(p, u, ev.y, ev.phi, c, d.weights());
    const auto up = combine(u, rho, d);
    const auto um = combine(u, -rho, d);
    const auto ep = evaluate(p, up);
    const auto em = evaluate(p, um);
    const auto lp = compute_lambda(p, up, ep.y, ep.phi, c);
    const auto lm = compute_lambda(p, um, em.y, em.phi, c);
    double err = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double fd = (lp[k] - lm[k]) / (2.0 * rho);
      err = std::max(err, std::abs(fd - jd[k]));
      scale = std::max(scale, std::abs(fd));
    }
    out.push_back({"lambda Jacobian vs differences", err <= 1e-4 * scale, err / scale, 1e-4});
  }
  // j'
  {
    double worst = 0.0;
    for (int d = 0; d < 20; ++d) {
      auto a = random_measure(1.0);
      std::vector<double> w(a.weights().begin(), a.weights().end());
      for (std::size_t k = 0; k < K; k += 3) w[k] = 0.0;
      a = a.with_weights(w);
      const auto v = random_measure(1.0);
      const double rho = 1e-8;
      const auto b = combine(a, rho, v);
      double fd = 0.0;
      for (std::size_t k = 0; k < K; ++k) fd += (std::abs(b.weight(k)) - std::abs(a.weight(k))) / rho;
      worst = std::max(worst, std::abs(fd - directional_derivative_j(a, v)));
    }
    out.push_back({"j' vs one-sided differences", worst <= 1e-6, worst, 1e-6});
  }
  return out;
}

}  // namespace delayopt

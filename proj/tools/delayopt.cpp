#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "delayopt/experiments.hpp"

namespace fs = std::filesystem;
using namespace delayopt;

namespace {

struct Common {
  std::string config;
  std::string preset;
  std::string out_dir = "out";
  std::string control_grid;
  double nu = 0.0;
  unsigned seed = 1;
  unsigned threads = 1;
};

void add_common(CLI::App* cmd, Common& o) {
  cmd->add_option("--config", o.config, "Configuration file");
  cmd->add_option("--preset", o.preset, "example1 ... example5 (used when no config is given)");
  cmd->add_option("--out-dir", o.out_dir, "Output directory");
  cmd->add_option("--control-grid", o.control_grid, "Number of control intervals, or a file of nodes");
  cmd->add_option("--nu", o.nu, "Override the sparsity weight");
  cmd->add_option("--seed", o.seed, "Seed for the random directions of gradcheck");
  cmd->add_option("--threads", o.threads, "Worker threads for table1/table2");
}

ExperimentConfig resolve(const Common& o, const std::string& fallback_preset) {
  ExperimentConfig cfg;
  if (!o.config.empty()) cfg = load_config(o.config);
  else if (!o.preset.empty()) cfg = preset_config(o.preset);
  else if (!fallback_preset.empty()) cfg = preset_config(fallback_preset);
  else throw ConfigError("no configuration: pass a config file or --preset");
  if (o.nu > 0.0) cfg.nu = o.nu;
  if (!o.control_grid.empty()) {
    const bool numeric = o.control_grid.find_first_not_of("0123456789") == std::string::npos;
    if (numeric) {
      cfg.control_nodes.clear();
      cfg.control_intervals = std::stoul(o.control_grid);
      if (cfg.control_intervals == 0) throw ConfigError("--control-grid must be positive");
    } else {
      cfg.control_nodes = read_control_nodes(o.control_grid);
    }
  }
  return cfg;
}

AtomicMeasure read_control(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open control file '" + path + "'");
  try {
    return read_measure_csv(in);
  } catch (const std::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse measure-valued delay control of a semilinear parabolic equation"};
  app.require_subcommand(1);

  Common o;
  std::string control_file;

  auto* solve = app.add_subcommand("solve", "Run the continuation semi-smooth Newton solver");
  add_common(solve, o);
  solve->add_option("config_file", o.config, "Configuration file");

  auto* forward = app.add_subcommand("forward", "Solve the state equation for a given control");
  add_common(forward, o);
  std::vector<std::string> forward_files, check_files;
  forward->add_option("files", forward_files, "[config_file] control, the control as a t,weight CSV")
      ->expected(1, 2)
      ->required();

  auto* check = app.add_subcommand("check-optimality", "Report lambda and the sign conditions of a control");
  add_common(check, o);
  check->add_option("files", check_files, "[config_file] control, the control as a t,weight CSV")
      ->expected(1, 2)
      ->required();

  auto* grad = app.add_subcommand("gradcheck", "Derivative and adjointness property checks");
  add_common(grad, o);
  grad->add_option("config_file", o.config, "Configuration file");

  std::vector<int> exponents{2, 3, 4, 5};
  auto* t1 = app.add_subcommand("table1", "Example 1 on control grids tau = 3^-k");
  add_common(t1, o);
  t1->add_option("--exponents", exponents, "Values of k")->delimiter(',');
  t1->add_option("config_file", o.config, "Configuration file");

  std::vector<double> nus = table2_default_nus();
  auto* t2 = app.add_subcommand("table2", "Example 2 sweep over nu");
  add_common(t2, o);
  t2->add_option("--nus", nus, "Values of nu")->delimiter(',');
  t2->add_option("config_file", o.config, "Configuration file");

  CLI11_PARSE(app, argc, argv);

  for (const auto* files : {&forward_files, &check_files}) {
    if (files->empty()) continue;
    control_file = files->back();
    if (files->size() == 2) o.config = files->front();
  }

  try {
    if (solve->parsed()) {
      const auto cfg = resolve(o, "");
      const auto run = run_config(cfg, o.out_dir);
      const auto& r = run.result.unregularized;
      std::cout << "converged=" << (run.result.converged ? "yes" : "no") << " final_c=" << run.result.final_c
                << " norm_u=" << r.norm_u << " F=" << r.F << " nu_j=" << r.nu_j << " J=" << r.J
                << " support=" << r.support.size() << '\n';
      return run.exit_code;
    }
    if (forward->parsed()) {
      const auto cfg = resolve(o, "");
      const auto built = build_problem(cfg);
      const auto u = read_control(control_file);
      const auto y = solve_state(built.problem, u);
      std::ostringstream state;
      write_trajectory_csv(state, built.problem.time(), built.problem.mesh(), y.values);
      write_text(fs::path(o.out_dir) / "state.csv", state.str());
      std::cout.precision(10);
      std::cout << "F=" << tracking_cost(built.problem, y) << " norm_u=" << total_variation(u) << '\n';
      return 0;
    }
    if (check->parsed()) {
      auto cfg = resolve(o, "");
      const auto u = read_control(control_file);
      cfg.control_nodes.assign(u.grid().nodes().begin(), u.grid().nodes().end());
      const auto built = build_problem(cfg);
      const auto report = check_optimality(built.problem, u);
      std::ostringstream json, lambda;
      write_report_json(json, report);
      write_lambda_csv(lambda, u, report.lambda);
      write_text(fs::path(o.out_dir) / "report.json", json.str());
      write_text(fs::path(o.out_dir) / "lambda.csv", lambda.str());
      std::cout << json.str();
      return 0;
    }
    if (grad->parsed()) {
      ExperimentConfig cfg;
      if (o.config.empty() && o.preset.empty()) {
        cfg = preset_config("example2");
        cfg.space_nodes = 33;
        cfg.control_intervals = 16;
      } else {
        cfg = resolve(o, "");
      }
      const auto built = build_problem(cfg);
      bool ok = true;
      for (const auto& c : gradcheck(built.problem, o.seed)) {
        std::printf("%s %-34s %.3e (threshold %.1e)\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.value,
                    c.threshold);
        ok = ok && c.passed;
      }
      return ok ? 0 : 1;
    }
    if (t1->parsed()) {
      const auto cfg = resolve(o, "example1");
      std::ostringstream csv;
      write_table1_csv(csv, table1(cfg, exponents, o.threads));
      write_text(fs::path(o.out_dir) / "table1.csv", csv.str());
      std::cout << csv.str();
      return 0;
    }
    if (t2->parsed()) {
      const auto cfg = resolve(o, "example2");
      std::ostringstream csv;
      write_table2_csv(csv, table2(cfg, nus, o.threads));
      write_text(fs::path(o.out_dir) / "table2.csv", csv.str());
      std::cout << csv.str();
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "delayopt/ssn.hpp"

namespace delayopt {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything needed to rebuild one problem instance plus solver settings.
/// Parsed from `key = value` lines with dotted keys; see README.
struct ExperimentConfig {
  std::string preset = "custom";

  double x_left = 0.0;
  double x_right = 1.0;
  std::size_t space_nodes = 65;

  double T = 1.0;
  std::size_t time_steps = 64;
  double time_grading = 1.0;  ///< last step / first step; 1 is uniform

  std::vector<double> reaction{0.0, 1.0};  ///< a_0 ... a_K

  std::string prehistory = "constant";
  std::vector<double> prehistory_params{0.0};

  /// zero | constant | cosine_squared | affine_sin2 | manufactured | kernel_state
  std::string target = "zero";
  std::vector<double> target_params;

  double nu = 1e-2;
  std::optional<double> window_begin;
  std::optional<double> window_end;

  std::optional<double> control_horizon;    ///< defaults to T
  std::size_t control_intervals = 0;        ///< 0 means one per time step
  std::vector<double> control_nodes;        ///< explicit grid overrides the above

  SsnSettings solver;
};

ExperimentConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

/// Applies one `key = value` assignment; throws ConfigError naming the key.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// `preset = ...` is applied first wherever it appears, the remaining keys
/// override it. Errors carry `source:line`.
ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Reads a control grid from a file holding one node per line, or the first
/// column of a `t,weight` CSV.
std::vector<double> read_control_nodes(const std::filesystem::path& path);

/// Adjoint candidate with its time derivative and Laplacian.
struct AdjointCandidate {
  std::function<double(double, double)> value;
  std::function<double(double, double)> dt;
  std::function<double(double, double)> laplacian;
};

/// amplitude * cos^2(pi t / (2T)) on [0, T], zero afterwards.
AdjointCandidate cosine_adjoint(double T, double amplitude = 1.0);

struct ManufacturedReference {
  GeneralMeasure u;
  StateTrajectory y;
  AdjointCandidate phi;
};

/// Sets y_d = phi_t + Lap phi - R'(y) phi + y + int phi(t + s) du(s) with y
/// solved at u, so (u, y, phi) satisfies the adjoint equation. The target of
/// `base` is ignored.
std::pair<ProblemSpec, ManufacturedReference> build_manufactured(ProblemSpec base,
                                                                 const AdjointCandidate& phi,
                                                                 const GeneralMeasure& u);

/// Kernel kappa (mean over [ta, tb] minus identity), the nonlocal Pyragas measure.
GeneralMeasure pyragas_kernel(double kappa, double ta, double tb);

struct BuiltProblem {
  Problem problem;
  std::optional<ManufacturedReference> reference;
};

BuiltProblem build_problem(const ExperimentConfig& cfg);

struct RunSummary {
  SsnResult result;
  int exit_code = 0;
};

/// Solves and writes control.csv, lambda.csv, state.csv, target.csv,
/// trace.csv and summary.json into out_dir. Exit code 0 on convergence,
/// 2 when flagged non-converged.
RunSummary run_config(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

struct Table1Row {
  std::string tau;
  double t_minus = 0.0;
  double u_minus = 0.0;
  double t_plus = 0.0;
  double u_plus = 0.0;
  double y_error = 0.0;  ///< L2(Q) distance to the reference state
  double norm_u = 0.0;
  double F = 0.0;
  double nu_j = 0.0;
  std::size_t support = 0;
  double lambda_max_abs = 0.0;
  double sign_violation_max = 0.0;
  bool converged = false;
};

/// Rows for tau = 3^-k, then the reference row ("exact").
std::vector<Table1Row> table1(const ExperimentConfig& base, const std::vector<int>& exponents,
                              unsigned threads = 1);
void write_table1_csv(std::ostream& out, const std::vector<Table1Row>& rows);

struct Table2Row {
  double nu = 0.0;
  double F = 0.0;
  double norm_u = 0.0;
  std::size_t support = 0;
  double lambda_max_abs = 0.0;
  double sign_violation_max = 0.0;
  bool converged = false;
  std::vector<double> u;
};

std::vector<double> table2_default_nus();
std::vector<Table2Row> table2(const ExperimentConfig& base, const std::vector<double>& nus,
                              unsigned threads = 1);
void write_table2_csv(std::ostream& out, const std::vector<Table2Row>& rows);

struct CheckResult {
  std::string name;
  bool passed;
  double value;
  double threshold;
};

/// Derivative and adjointness property checks on the configured problem.
std::vector<CheckResult> gradcheck(const Problem& p, unsigned seed = 1);

}  // namespace delayopt

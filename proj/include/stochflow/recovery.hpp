#pragma once

#include "stochflow/chaos.hpp"
#include "stochflow/tensor.hpp"

#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace stochflow::recovery {

struct RecoveryConfig {
  int rank = 3;
  double lambda = 0.25;
  double admm_penalty = 1.0; // s in the augmented Lagrangian
  double admm_tol_primal = 1e-6;
  double admm_tol_dual = 1e-6;
  int admm_max_iter = 2000;
  int outer_max_iter = 100;
  double outer_tol = 1e-4;
  std::uint64_t init_seed = 1;
  double init_scale = 1.0;
  double init_offset = 0.0; // entries uniform on [offset - scale, offset + scale]
  int restarts = 1;
  bool paper_literal_update = false;
  bool balance_columns = true;

  void validate() const;
};

RecoveryConfig config_from_json(const nlohmann::json& doc, RecoveryConfig defaults = {});
nlohmann::json to_json(const RecoveryConfig& cfg);

/// min_x 1/2 ||A x - b||^2 + lambda |F x|, with x = vec(X) column-major.
struct LassoProblem {
  Eigen::MatrixXd A; // |Omega| x (m r)
  Eigen::MatrixXd F; // K x (m r)
  Eigen::VectorXd b; // |Omega|

  double cost(const Eigen::VectorXd& x, double lambda) const;
};

/// Soft threshold; |a| <= tau maps to 0.
double shrink(double a, double tau);

/// 1/2 ||P_Omega(T(U) - G)||_F^2 + lambda sum_alpha |<T(U), W_alpha>|.
double objective(const tensor::CpTensor& t, const tensor::SampleSet& samples, const tensor::WeightVectors& wv,
                 const chaos::MultiIndexSet& indices, double lambda);

/// Mode-k subproblem with every other factor frozen at its value in `t`.
LassoProblem assemble_lasso(int k, const tensor::CpTensor& t, const tensor::SampleSet& samples,
                            const tensor::WeightVectors& wv, const chaos::MultiIndexSet& indices);

struct AdmmOptions {
  double penalty = 1.0;
  double tol_primal = 1e-6;
  double tol_dual = 1e-6;
  int max_iter = 2000;
  bool paper_literal_update = false;
};

struct AdmmResult {
  Eigen::VectorXd x;
  int iterations = 0;
  bool converged = false; // false: max_iter hit, x is the best iterate seen
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

/// ADMM for the generalized LASSO. The x-update matrix is factorized once.
/// Throws SingularNormalMatrix if A^T A + s F^T F stays indefinite after jitter.
AdmmResult admm_solve(const LassoProblem& problem, double lambda, const AdmmOptions& options,
                      const std::optional<Eigen::VectorXd>& x0 = std::nullopt);

Eigen::VectorXd vec(const Eigen::MatrixXd& x);
Eigen::MatrixXd reshape(const Eigen::VectorXd& x, int m, int r);

struct ConvergenceMetrics {
  double tensor = 0.0;
  double gpc = 0.0;
  double cost = 0.0;

  bool below(double tol) const { return tensor < tol && gpc < tol && cost < tol; }
};

/// Relative updates of factors, coefficients and cost; a zero denominator
/// with a non-zero numerator yields +inf (never converged).
ConvergenceMetrics convergence_metrics(const tensor::CpTensor& prev, const tensor::CpTensor& next,
                                       const Eigen::VectorXd& prev_c, const Eigen::VectorXd& next_c,
                                       double prev_f, double next_f);

struct ConvergenceTrace {
  double initial_objective = 0.0;
  std::vector<double> f;
  std::vector<double> eps_tensor;
  std::vector<double> eps_gpc;
  std::vector<double> eps_cost;

  std::size_t size() const { return f.size(); }
  void append(double objective, const ConvergenceMetrics& m);
  /// Columns iter, f, eps_tensor, eps_gpc, eps_cost; iter 0 is the initial guess.
  void write_csv(std::ostream& out) const;
  void write_csv(const std::filesystem::path& path) const;
  /// True when f_{l+1} <= f_l + slack * (1 + |f_l|) at every step from f_0.
  bool monotone(double slack) const;
};

/// Rescales each rank-1 term so every mode's column has the same norm.
/// Signs and the represented tensor are unchanged.
void balance_columns(tensor::CpTensor& t);

struct RecoveryResult {
  tensor::CpTensor tensor;
  ConvergenceTrace trace;
  bool converged = false;
  bool diverged = false;
  int admm_unconverged = 0; // inner solves that hit admm_max_iter
  int rejected_updates = 0; // mode updates discarded for raising the cost
  int restart = 0;          // index of the restart that won
};

/// Alternating minimization over modes with ADMM inner solves; best of
/// cfg.restarts random starts by final objective.
RecoveryResult recover(const tensor::SampleSet& samples, const tensor::WeightVectors& wv,
                       const chaos::MultiIndexSet& indices, const RecoveryConfig& cfg);

/// One restart from a given initial tensor.
RecoveryResult recover_from(const tensor::SampleSet& samples, const tensor::WeightVectors& wv,
                            const chaos::MultiIndexSet& indices, const RecoveryConfig& cfg,
                            tensor::CpTensor initial);

/// sqrt( sum (G-hat - G)^2 w / sum G^2 w ) over the holdout; throws ZeroDenominator.
double prediction_error(const tensor::CpTensor& t, const tensor::SampleSet& holdout);

} // namespace stochflow::recovery

#pragma once

#include "stochflow/grid.hpp"

#include <optional>

#include <Eigen/Dense>

namespace stochflow::powerflow {

using ComplexMatrix = Eigen::MatrixXcd;

struct PowerFlowSolution {
  Eigen::VectorXd v_mag; // per unit, bus order of the case
  Eigen::VectorXd v_ang; // radians
  int iterations = 0;
  double max_mismatch = 0.0;
};

struct SolveOptions {
  double tol = 1e-8;
  int max_iter = 20;
  bool flat_start = true;
  /// Overrides the start point when set; must match the case's bus count.
  std::optional<PowerFlowSolution> warm_start;
};

/// Dense bus admittance matrix from branch pi-models; throws SingularBranch.
ComplexMatrix build_ybus(const grid::GridCase& grid);

struct Injections {
  Eigen::VectorXd p;
  Eigen::VectorXd q;
};

/// Net injections P_i, Q_i implied by voltages (V, theta).
Injections compute_injections(const ComplexMatrix& ybus, const Eigen::VectorXd& v_mag,
                              const Eigen::VectorXd& v_ang);

/// Polar Newton formulation.
///
/// State x = [theta at non-slack buses ; |V| at PQ buses]. Residual rows are
/// P mismatch at non-slack buses followed by Q mismatch at PQ buses, each
/// defined as computed minus specified injection.
class MismatchModel {
public:
  explicit MismatchModel(const grid::GridCase& grid);

  Eigen::Index unknowns() const { return static_cast<Eigen::Index>(angle_buses_.size() + pq_buses_.size()); }

  Eigen::VectorXd residual(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const;

  Eigen::VectorXd pack(const Eigen::VectorXd& v_mag, const Eigen::VectorXd& v_ang) const;
  /// Expands x into full-length voltage vectors using the fixed magnitudes/angles.
  void unpack(const Eigen::VectorXd& x, Eigen::VectorXd& v_mag, Eigen::VectorXd& v_ang) const;

  const Eigen::VectorXd& fixed_v_mag() const { return base_v_mag_; }
  const Eigen::VectorXd& fixed_v_ang() const { return base_v_ang_; }
  const ComplexMatrix& ybus() const { return ybus_; }

private:
  ComplexMatrix ybus_;
  std::vector<Eigen::Index> angle_buses_; // non-slack
  std::vector<Eigen::Index> pq_buses_;
  Eigen::VectorXd p_spec_;
  Eigen::VectorXd q_spec_;
  Eigen::VectorXd base_v_mag_; // setpoints at slack/PV, 1.0 elsewhere
  Eigen::VectorXd base_v_ang_; // slack reference angle, 0 elsewhere
};

/// Newton-Raphson solve; throws NonConvergence when max_iter is exhausted.
PowerFlowSolution solve(const grid::GridCase& grid, const SolveOptions& options = {});

/// Active power entering branch `branch` at its from-end (or to-end), per unit.
double branch_flow(const grid::GridCase& grid, const PowerFlowSolution& sol, std::size_t branch,
                   bool at_to_end);

/// Output y = g(xi) per the case's OutputSpec, in its configured units.
double extract_output(const grid::GridCase& grid, const PowerFlowSolution& sol);

nlohmann::json to_json(const PowerFlowSolution& sol);
PowerFlowSolution solution_from_json(const nlohmann::json& doc);

} // namespace stochflow::powerflow

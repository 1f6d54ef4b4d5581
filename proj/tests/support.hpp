#pragma once

#include "stochflow/grid.hpp"
#include "stochflow/powerflow.hpp"

#include <random>
#include <string>

#include "json.hpp"

namespace testing {

namespace grid = stochflow::grid;
namespace powerflow = stochflow::powerflow;

inline std::string data_path(const std::string& rel) { return std::string(STOCHFLOW_DATA_DIR) + "/" + rel; }

/// Slack bus 1 then PQ buses, connected in a chain plus one chord.
inline nlohmann::json small_case_json(int n, double load = 0.3) {
  nlohmann::json buses = nlohmann::json::array();
  nlohmann::json branches = nlohmann::json::array();
  buses.push_back({{"id", 1}, {"kind", "slack"}, {"v_mag", 1.0}});
  for (int i = 2; i <= n; ++i) buses.push_back({{"id", i}, {"kind", "pq"}, {"p_load", load}, {"q_load", 0.1}});
  for (int i = 1; i < n; ++i) branches.push_back({{"from_bus", i}, {"to_bus", i + 1}, {"r", 0.02}, {"x", 0.1}});
  if (n > 2) branches.push_back({{"from_bus", 1}, {"to_bus", n}, {"r", 0.03}, {"x", 0.15}, {"b_shunt", 0.02}});
  return {{"base_mva", 100.0}, {"buses", buses}, {"branches", branches}, {"output", {{"from_bus", 1}, {"to_bus", 2}}}};
}

/// Random connected case with 2..6 buses, mixed PV/PQ, line charging and taps.
inline nlohmann::json random_case_json(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nbus(2, 6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = nbus(rng);
  nlohmann::json buses = nlohmann::json::array();
  nlohmann::json branches = nlohmann::json::array();
  buses.push_back({{"id", 1}, {"kind", "slack"}, {"v_mag", 1.0 + 0.05 * u(rng)}, {"v_ang", 10.0 * (u(rng) - 0.5)}});
  for (int i = 2; i <= n; ++i) {
    if (u(rng) < 0.3)
      buses.push_back({{"id", i}, {"kind", "pv"}, {"v_mag", 0.98 + 0.06 * u(rng)}, {"p_gen", 0.3 * u(rng)},
                       {"p_load", 0.1 * u(rng)}});
    else
      buses.push_back({{"id", i}, {"kind", "pq"}, {"p_load", 0.4 * u(rng)}, {"q_load", 0.2 * u(rng) - 0.05},
                       {"p_gen", 0.05 * u(rng)}});
  }
  auto line = [&](int a, int b) {
    nlohmann::json br = {{"from_bus", a}, {"to_bus", b}, {"r", 0.005 + 0.05 * u(rng)}, {"x", 0.05 + 0.2 * u(rng)},
                         {"b_shunt", 0.05 * u(rng)}};
    if (u(rng) < 0.3) br["tap"] = 0.95 + 0.1 * u(rng);
    return br;
  };
  for (int i = 2; i <= n; ++i) {
    std::uniform_int_distribution<int> parent(1, i - 1);
    branches.push_back(line(parent(rng), i));
  }
  for (int extra = 0; extra < n / 2; ++extra) {
    std::uniform_int_distribution<int> pick(1, n);
    const int a = pick(rng), b = pick(rng);
    if (a != b) branches.push_back(line(a, b));
  }
  const auto& first = branches[0];
  return {{"base_mva", 100.0},
          {"buses", buses},
          {"branches", branches},
          {"output", {{"from_bus", first["from_bus"]}, {"to_bus", first["to_bus"]}}}};
}

inline Eigen::MatrixXd fd_jacobian(const powerflow::MismatchModel& model, const Eigen::VectorXd& x, double h = 1e-6) {
  Eigen::MatrixXd j(x.size(), x.size());
  for (Eigen::Index c = 0; c < x.size(); ++c) {
    Eigen::VectorXd xp = x, xm = x;
    xp(c) += h;
    xm(c) -= h;
    j.col(c) = (model.residual(xp) - model.residual(xm)) / (2.0 * h);
  }
  return j;
}

// generation - load - losses with the slack's generation taken from the solved injection
inline double balance_residual(const grid::GridCase& g, const powerflow::PowerFlowSolution& sol) {
  const auto inj = powerflow::compute_injections(powerflow::build_ybus(g), sol.v_mag, sol.v_ang);
  const std::size_t slack = g.slack_index();
  double gen = 0.0, load = 0.0, losses = 0.0;
  for (std::size_t i = 0; i < g.bus_count(); ++i) {
    load += g.buses[i].p_load;
    gen += i == slack ? inj.p(static_cast<Eigen::Index>(i)) + g.buses[i].p_load : g.buses[i].p_gen;
  }
  for (std::size_t b = 0; b < g.branches.size(); ++b)
    losses += powerflow::branch_flow(g, sol, b, false) + powerflow::branch_flow(g, sol, b, true);
  return gen - load - losses;
}

} // namespace testing

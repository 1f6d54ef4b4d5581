#include "stochflow/powerflow.hpp"

#include "stochflow/error.hpp"

#include <cmath>
#include <complex>

namespace stochflow::powerflow {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using cplx = std::complex<double>;

ComplexMatrix build_ybus(const grid::GridCase& grid) {
  const auto n = static_cast<Index>(grid.bus_count());
  ComplexMatrix y = ComplexMatrix::Zero(n, n);
  for (const grid::Branch& br : grid.branches) {
    if (br.r == 0.0 && br.x == 0.0)
      throw SingularBranch("branch " + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus) +
                           " has r = x = 0");
    const auto f = static_cast<Index>(grid.bus_index(br.from_bus));
    const auto t = static_cast<Index>(grid.bus_index(br.to_bus));
    const cplx ys = 1.0 / cplx(br.r, br.x);
    const cplx half_charging(0.0, 0.5 * br.b_shunt);
    const double tap = br.tap;
    y(f, f) += (ys + half_charging) / (tap * tap);
    y(t, t) += ys + half_charging;
    y(f, t) -= ys / tap;
    y(t, f) -= ys / tap;
  }
  return y;
}

Injections compute_injections(const ComplexMatrix& ybus, const VectorXd& v_mag, const VectorXd& v_ang) {
  const Index n = v_mag.size();
  Eigen::VectorXcd v(n);
  for (Index i = 0; i < n; ++i) v(i) = std::polar(v_mag(i), v_ang(i));
  const Eigen::VectorXcd current = ybus * v;
  Injections inj{VectorXd(n), VectorXd(n)};
  for (Index i = 0; i < n; ++i) {
    const cplx s = v(i) * std::conj(current(i));
    inj.p(i) = s.real();
    inj.q(i) = s.imag();
  }
  return inj;
}

MismatchModel::MismatchModel(const grid::GridCase& grid) : ybus_(build_ybus(grid)) {
  const auto n = static_cast<Index>(grid.bus_count());
  p_spec_.resize(n);
  q_spec_.resize(n);
  base_v_mag_ = VectorXd::Ones(n);
  base_v_ang_ = VectorXd::Zero(n);
  for (Index i = 0; i < n; ++i) {
    const grid::Bus& b = grid.buses[static_cast<std::size_t>(i)];
    p_spec_(i) = b.p_gen - b.p_load;
    q_spec_(i) = b.q_gen - b.q_load;
    switch (b.kind) {
    case grid::BusKind::Slack:
      base_v_mag_(i) = b.v_setpoint.value_or(b.v_mag_init);
      base_v_ang_(i) = b.v_ang_init;
      break;
    case grid::BusKind::PV:
      base_v_mag_(i) = *b.v_setpoint;
      angle_buses_.push_back(i);
      break;
    case grid::BusKind::PQ:
      angle_buses_.push_back(i);
      pq_buses_.push_back(i);
      break;
    }
  }
}

VectorXd MismatchModel::pack(const VectorXd& v_mag, const VectorXd& v_ang) const {
  VectorXd x(unknowns());
  Index row = 0;
  for (Index i : angle_buses_) x(row++) = v_ang(i);
  for (Index i : pq_buses_) x(row++) = v_mag(i);
  return x;
}

void MismatchModel::unpack(const VectorXd& x, VectorXd& v_mag, VectorXd& v_ang) const {
  v_mag = base_v_mag_;
  v_ang = base_v_ang_;
  Index row = 0;
  for (Index i : angle_buses_) v_ang(i) = x(row++);
  for (Index i : pq_buses_) v_mag(i) = x(row++);
}

VectorXd MismatchModel::residual(const VectorXd& x) const {
  VectorXd vm, va;
  unpack(x, vm, va);
  const Injections inj = compute_injections(ybus_, vm, va);
  VectorXd r(unknowns());
  Index row = 0;
  for (Index i : angle_buses_) r(row++) = inj.p(i) - p_spec_(i);
  for (Index i : pq_buses_) r(row++) = inj.q(i) - q_spec_(i);
  return r;
}

MatrixXd MismatchModel::jacobian(const VectorXd& x) const {
  VectorXd vm, va;
  unpack(x, vm, va);
  const Index n = vm.size();
  Eigen::VectorXcd v(n), vnorm(n);
  for (Index i = 0; i < n; ++i) {
    v(i) = std::polar(vm(i), va(i));
    vnorm(i) = std::polar(1.0, va(i));
  }
  const Eigen::VectorXcd current = ybus_ * v;

  // dS/dtheta = j diag(V) conj(diag(I) - Y diag(V))
  // dS/d|V|   = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|)
  ComplexMatrix ds_dang(n, n), ds_dmag(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < n; ++k) {
      const cplx yv = ybus_(i, k) * v(k);
      const cplx diag_i = i == k ? current(i) : cplx(0.0);
      ds_dang(i, k) = cplx(0.0, 1.0) * v(i) * std::conj(diag_i - yv);
      ds_dmag(i, k) = v(i) * std::conj(ybus_(i, k) * vnorm(k));
      if (i == k) ds_dmag(i, k) += std::conj(current(i)) * vnorm(i);
    }
  }

  const auto na = static_cast<Index>(angle_buses_.size());
  const auto nq = static_cast<Index>(pq_buses_.size());
  MatrixXd jac(na + nq, na + nq);
  for (Index r = 0; r < na; ++r) {
    const Index i = angle_buses_[static_cast<std::size_t>(r)];
    for (Index c = 0; c < na; ++c) jac(r, c) = ds_dang(i, angle_buses_[static_cast<std::size_t>(c)]).real();
    for (Index c = 0; c < nq; ++c) jac(r, na + c) = ds_dmag(i, pq_buses_[static_cast<std::size_t>(c)]).real();
  }
  for (Index r = 0; r < nq; ++r) {
    const Index i = pq_buses_[static_cast<std::size_t>(r)];
    for (Index c = 0; c < na; ++c) jac(na + r, c) = ds_dang(i, angle_buses_[static_cast<std::size_t>(c)]).imag();
    for (Index c = 0; c < nq; ++c)
      jac(na + r, na + c) = ds_dmag(i, pq_buses_[static_cast<std::size_t>(c)]).imag();
  }
  return jac;
}

PowerFlowSolution solve(const grid::GridCase& grid, const SolveOptions& options) {
  if (!(options.tol > 0.0)) throw ValidationError("power-flow tolerance must be positive");
  const MismatchModel model(grid);
  const auto n = static_cast<Index>(grid.bus_count());

  VectorXd vm = model.fixed_v_mag();
  VectorXd va = model.fixed_v_ang();
  if (options.warm_start) {
    if (options.warm_start->v_mag.size() != n || options.warm_start->v_ang.size() != n)
      throw DimensionMismatch("warm start does not match the case's bus count");
    vm = options.warm_start->v_mag;
    va = options.warm_start->v_ang;
  } else if (!options.flat_start) {
    for (Index i = 0; i < n; ++i) {
      vm(i) = grid.buses[static_cast<std::size_t>(i)].v_mag_init;
      va(i) = grid.buses[static_cast<std::size_t>(i)].v_ang_init;
    }
  }
  // pack() keeps only free unknowns; unpack() restores fixed magnitudes/angles.
  VectorXd x = model.pack(vm, va);

  PowerFlowSolution sol;
  for (int iter = 0;; ++iter) {
    const VectorXd r = model.residual(x);
    const double mismatch = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
    if (!std::isfinite(mismatch))
      throw NonConvergence("mismatch became non-finite after " + std::to_string(iter) + " iterations");
    if (mismatch < options.tol) {
      model.unpack(x, sol.v_mag, sol.v_ang);
      sol.iterations = iter;
      sol.max_mismatch = mismatch;
      return sol;
    }
    if (iter >= options.max_iter)
      throw NonConvergence("mismatch " + std::to_string(mismatch) + " above tolerance after " +
                           std::to_string(iter) + " iterations");
    const Eigen::PartialPivLU<MatrixXd> lu(model.jacobian(x));
    x -= lu.solve(r);
  }
}

double branch_flow(const grid::GridCase& grid, const PowerFlowSolution& sol, std::size_t branch,
                   bool at_to_end) {
  const grid::Branch& br = grid.branches.at(branch);
  const auto f = static_cast<Index>(grid.bus_index(br.from_bus));
  const auto t = static_cast<Index>(grid.bus_index(br.to_bus));
  const cplx vf = std::polar(sol.v_mag(f), sol.v_ang(f));
  const cplx vt = std::polar(sol.v_mag(t), sol.v_ang(t));
  const cplx ys = 1.0 / cplx(br.r, br.x);
  const cplx half_charging(0.0, 0.5 * br.b_shunt);
  const double tap = br.tap;
  if (!at_to_end) {
    const cplx i_f = (ys + half_charging) / (tap * tap) * vf - ys / tap * vt;
    return (vf * std::conj(i_f)).real();
  }
  const cplx i_t = (ys + half_charging) * vt - ys / tap * vf;
  return (vt * std::conj(i_t)).real();
}

double extract_output(const grid::GridCase& grid, const PowerFlowSolution& sol) {
  const auto [branch, reversed] = grid.output_branch();
  const double p = branch_flow(grid, sol, branch, reversed);
  return grid.output.units == grid::OutputUnits::Megawatt ? p * grid.base_mva : p;
}

nlohmann::json to_json(const PowerFlowSolution& sol) {
  return {{"v_mag", std::vector<double>(sol.v_mag.begin(), sol.v_mag.end())},
          {"v_ang", std::vector<double>(sol.v_ang.begin(), sol.v_ang.end())},
          {"iterations", sol.iterations},
          {"max_mismatch", sol.max_mismatch}};
}

PowerFlowSolution solution_from_json(const nlohmann::json& doc) {
  try {
    const auto vm = doc.at("v_mag").get<std::vector<double>>();
    const auto va = doc.at("v_ang").get<std::vector<double>>();
    if (vm.size() != va.size()) throw ParseError("v_mag and v_ang lengths differ");
    PowerFlowSolution sol;
    sol.v_mag = Eigen::Map<const VectorXd>(vm.data(), static_cast<Index>(vm.size()));
    sol.v_ang = Eigen::Map<const VectorXd>(va.data(), static_cast<Index>(va.size()));
    sol.iterations = doc.at("iterations").get<int>();
    sol.max_mismatch = doc.at("max_mismatch").get<double>();
    return sol;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(e.what());
  }
}

} // namespace stochflow::powerflow

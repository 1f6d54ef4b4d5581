#include "stochflow/recovery.hpp"

#include "stochflow/error.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace stochflow::recovery {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using tensor::CpTensor;

void RecoveryConfig::validate() const {
  if (rank < 1) throw ValidationError("rank must be at least 1");
  if (!(lambda >= 0.0)) throw ValidationError("lambda must be non-negative");
  if (!(admm_penalty > 0.0)) throw ValidationError("admm_penalty must be positive");
  if (!(admm_tol_primal > 0.0) || !(admm_tol_dual > 0.0) || !(outer_tol > 0.0))
    throw ValidationError("tolerances must be positive");
  if (admm_max_iter < 1 || outer_max_iter < 1) throw ValidationError("iteration limits must be positive");
  if (restarts < 1) throw ValidationError("restarts must be at least 1");
  if (!(init_scale > 0.0)) throw ValidationError("init_scale must be positive");
}

RecoveryConfig config_from_json(const nlohmann::json& doc, RecoveryConfig cfg) {
  try {
    cfg.rank = doc.value("rank", cfg.rank);
    cfg.lambda = doc.value("lambda", cfg.lambda);
    cfg.admm_penalty = doc.value("admm_penalty", cfg.admm_penalty);
    if (doc.contains("admm_tol")) cfg.admm_tol_primal = cfg.admm_tol_dual = doc.at("admm_tol").get<double>();
    cfg.admm_tol_primal = doc.value("admm_tol_primal", cfg.admm_tol_primal);
    cfg.admm_tol_dual = doc.value("admm_tol_dual", cfg.admm_tol_dual);
    cfg.admm_max_iter = doc.value("admm_max_iter", cfg.admm_max_iter);
    cfg.outer_max_iter = doc.value("outer_max_iter", cfg.outer_max_iter);
    cfg.outer_tol = doc.value("outer_tol", cfg.outer_tol);
    cfg.init_seed = doc.value("init_seed", cfg.init_seed);
    cfg.init_scale = doc.value("init_scale", cfg.init_scale);
    cfg.init_offset = doc.value("init_offset", cfg.init_offset);
    cfg.restarts = doc.value("restarts", cfg.restarts);
    cfg.paper_literal_update = doc.value("paper_literal_update", cfg.paper_literal_update);
    cfg.balance_columns = doc.value("balance_columns", cfg.balance_columns);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(e.what());
  }
  cfg.validate();
  return cfg;
}

nlohmann::json to_json(const RecoveryConfig& cfg) {
  return {{"rank", cfg.rank},
          {"lambda", cfg.lambda},
          {"admm_penalty", cfg.admm_penalty},
          {"admm_tol_primal", cfg.admm_tol_primal},
          {"admm_tol_dual", cfg.admm_tol_dual},
          {"admm_max_iter", cfg.admm_max_iter},
          {"outer_max_iter", cfg.outer_max_iter},
          {"outer_tol", cfg.outer_tol},
          {"init_seed", cfg.init_seed},
          {"init_scale", cfg.init_scale},
          {"init_offset", cfg.init_offset},
          {"restarts", cfg.restarts},
          {"paper_literal_update", cfg.paper_literal_update},
          {"balance_columns", cfg.balance_columns}};
}

double LassoProblem::cost(const VectorXd& x, double lambda) const {
  return 0.5 * (A * x - b).squaredNorm() + lambda * (F * x).lpNorm<1>();
}

double shrink(double a, double tau) {
  if (a > tau) return a - tau;
  if (a < -tau) return a + tau;
  return 0.0;
}

double objective(const CpTensor& t, const tensor::SampleSet& samples, const tensor::WeightVectors& wv,
                 const chaos::MultiIndexSet& indices, double lambda) {
  const double fit = tensor::project_residual(t, samples);
  if (lambda == 0.0) return fit;
  return fit + lambda * tensor::all_coefficients(t, wv, indices).lpNorm<1>();
}

LassoProblem assemble_lasso(int k, const CpTensor& t, const tensor::SampleSet& samples,
                            const tensor::WeightVectors& wv, const chaos::MultiIndexSet& indices) {
  const int d = t.modes();
  const int m = t.size();
  const int r = t.rank();
  if (k < 0 || k >= d) throw IndexOutOfRange("mode " + std::to_string(k) + " outside [0, d)");
  const auto uk = static_cast<std::size_t>(k);

  LassoProblem p;
  const auto rows = static_cast<Index>(samples.omega.size());
  p.A = MatrixXd::Zero(rows, m * r);
  p.b.resize(rows);
  for (Index n = 0; n < rows; ++n) {
    const auto& i = samples.omega[static_cast<std::size_t>(n)];
    p.b(n) = samples.values[static_cast<std::size_t>(n)];
    for (int j = 0; j < r; ++j) {
      double mu = 1.0;
      for (int kk = 0; kk < d; ++kk)
        if (kk != k) mu *= t.factor(kk)(i[static_cast<std::size_t>(kk)], j);
      p.A(n, j * m + i[uk]) = mu;
    }
  }

  const auto proj = tensor::weight_projections(t, wv);
  p.F.resize(static_cast<Index>(indices.size()), m * r);
  for (std::size_t a = 0; a < indices.size(); ++a) {
    const auto& alpha = indices[a];
    const VectorXd& w = wv(uk, alpha[uk]);
    for (int j = 0; j < r; ++j) {
      double nu = 1.0;
      for (int kk = 0; kk < d; ++kk)
        if (kk != k) nu *= proj[static_cast<std::size_t>(kk)](alpha[static_cast<std::size_t>(kk)], j);
      p.F.block(static_cast<Index>(a), j * m, 1, m) = nu * w.transpose();
    }
  }
  return p;
}

VectorXd vec(const MatrixXd& x) { return Eigen::Map<const VectorXd>(x.data(), x.size()); }

MatrixXd reshape(const VectorXd& x, int m, int r) {
  if (x.size() != static_cast<Index>(m) * r) throw DimensionMismatch("vector length is not m * r");
  return Eigen::Map<const MatrixXd>(x.data(), m, r);
}

AdmmResult admm_solve(const LassoProblem& p, double lambda, const AdmmOptions& opt,
                      const std::optional<VectorXd>& x0) {
  if (!(opt.penalty > 0.0)) throw ValidationError("ADMM penalty must be positive");
  const Index n = p.A.cols();
  const double s = opt.penalty;
  const double tau = lambda / s;

  MatrixXd normal = p.A.transpose() * p.A + s * p.F.transpose() * p.F;
  Eigen::LLT<MatrixXd> chol(normal);
  if (chol.info() != Eigen::Success) {
    const double jitter = 1e-12 * std::max(1.0, normal.diagonal().cwiseAbs().maxCoeff());
    normal.diagonal().array() += jitter;
    chol.compute(normal);
    if (chol.info() != Eigen::Success)
      throw SingularNormalMatrix("A^T A + s F^T F is not positive definite");
  }

  const VectorXd atb = p.A.transpose() * p.b;
  AdmmResult res;
  res.x = x0 ? *x0 : VectorXd::Zero(n);
  if (res.x.size() != n) throw DimensionMismatch("ADMM start vector has the wrong length");
  VectorXd z = p.F * res.x;
  VectorXd u = opt.paper_literal_update ? z : VectorXd::Zero(z.size());

  VectorXd best = res.x;
  double best_cost = std::numeric_limits<double>::infinity();
  VectorXd x = res.x;
  for (int it = 1; it <= opt.max_iter; ++it) {
    x = chol.solve(atb + s * p.F.transpose() * (z - u));
    const VectorXd fx = p.F * x;
    const VectorXd z_old = z;
    const VectorXd shrink_arg = opt.paper_literal_update ? VectorXd(fx + z + u) : VectorXd(fx + u);
    z = shrink_arg.unaryExpr([tau](double a) { return shrink(a, tau); });
    u += fx - z;

    res.iterations = it;
    res.primal_residual = (fx - z).norm();
    res.dual_residual = (p.F.transpose() * (z - z_old)).norm();
    if (!x.allFinite()) throw SingularNormalMatrix("ADMM iterate became non-finite");
    if (res.primal_residual < opt.tol_primal && res.dual_residual < opt.tol_dual) {
      res.converged = true;
      res.x = x;
      return res;
    }
    const double c = p.cost(x, lambda);
    if (c < best_cost) {
      best_cost = c;
      best = x;
    }
  }
  res.x = best;
  return res;
}

namespace {

double relative(double num, double den) {
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return num / den;
}

} // namespace

ConvergenceMetrics convergence_metrics(const CpTensor& prev, const CpTensor& next, const VectorXd& prev_c,
                                       const VectorXd& next_c, double prev_f, double next_f) {
  if (prev.modes() != next.modes() || prev.size() != next.size() || prev.rank() != next.rank() ||
      prev_c.size() != next_c.size())
    throw DimensionMismatch("convergence metrics need matching shapes");
  double diff = 0.0;
  for (int k = 0; k < prev.modes(); ++k) diff += (next.factor(k) - prev.factor(k)).squaredNorm();
  ConvergenceMetrics m;
  m.tensor = std::sqrt(relative(diff, prev.factor_norm_squared()));
  m.gpc = relative((next_c - prev_c).norm(), prev_c.norm());
  m.cost = relative(std::abs(next_f - prev_f), std::abs(prev_f));
  return m;
}

void ConvergenceTrace::append(double objective, const ConvergenceMetrics& m) {
  f.push_back(objective);
  eps_tensor.push_back(m.tensor);
  eps_gpc.push_back(m.gpc);
  eps_cost.push_back(m.cost);
}

void ConvergenceTrace::write_csv(std::ostream& out) const {
  out << "iter,f,eps_tensor,eps_gpc,eps_cost\n";
  out << std::setprecision(17);
  out << 0 << ',' << initial_objective << ",nan,nan,nan\n";
  for (std::size_t l = 0; l < f.size(); ++l)
    out << l + 1 << ',' << f[l] << ',' << eps_tensor[l] << ',' << eps_gpc[l] << ',' << eps_cost[l] << '\n';
}

void ConvergenceTrace::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_csv(out);
}

bool ConvergenceTrace::monotone(double slack) const {
  double prev = initial_objective;
  for (double cur : f) {
    if (cur > prev + slack * (1.0 + std::abs(prev))) return false;
    prev = cur;
  }
  return true;
}

void balance_columns(CpTensor& t) {
  const int d = t.modes();
  for (int j = 0; j < t.rank(); ++j) {
    std::vector<double> norms(static_cast<std::size_t>(d));
    double log_mean = 0.0;
    bool degenerate = false;
    for (int k = 0; k < d; ++k) {
      const double nk = t.factor(k).col(j).norm();
      norms[static_cast<std::size_t>(k)] = nk;
      if (!(nk > 0.0)) degenerate = true;
      else log_mean += std::log(nk);
    }
    if (degenerate) continue;
    const double target = std::exp(log_mean / d);
    for (int k = 0; k < d; ++k) t.factor(k).col(j) *= target / norms[static_cast<std::size_t>(k)];
  }
}

RecoveryResult recover_from(const tensor::SampleSet& samples, const tensor::WeightVectors& wv,
                            const chaos::MultiIndexSet& indices, const RecoveryConfig& cfg, CpTensor initial) {
  cfg.validate();
  if (samples.omega.empty()) throw PreconditionError("recovery needs at least one sample");
  if (samples.values.size() != samples.omega.size()) throw DimensionMismatch("omega and values differ in length");

  const AdmmOptions admm{cfg.admm_penalty, cfg.admm_tol_primal, cfg.admm_tol_dual, cfg.admm_max_iter,
                         cfg.paper_literal_update};
  const double slack = 10.0 * std::max(cfg.admm_tol_primal, cfg.admm_tol_dual);

  RecoveryResult res;
  res.tensor = std::move(initial);
  if (cfg.balance_columns) balance_columns(res.tensor);
  VectorXd c_prev = tensor::all_coefficients(res.tensor, wv, indices);
  double f_prev = objective(res.tensor, samples, wv, indices, cfg.lambda);
  res.trace.initial_objective = f_prev;

  const int m = res.tensor.size();
  const int r = res.tensor.rank();
  for (int l = 0; l < cfg.outer_max_iter; ++l) {
    const CpTensor prev = res.tensor;
    for (int k = 0; k < res.tensor.modes(); ++k) {
      const LassoProblem p = assemble_lasso(k, res.tensor, samples, wv, indices);
      const VectorXd x_old = vec(res.tensor.factor(k));
      const AdmmResult sol = admm_solve(p, cfg.lambda, admm, x_old);
      if (!sol.converged) ++res.admm_unconverged;
      // An inexact inner solve may land above the current point; keep descent.
      if (p.cost(sol.x, cfg.lambda) <= p.cost(x_old, cfg.lambda))
        res.tensor.factor(k) = reshape(sol.x, m, r);
      else
        ++res.rejected_updates;
    }
    if (cfg.balance_columns) balance_columns(res.tensor);

    const VectorXd c = tensor::all_coefficients(res.tensor, wv, indices);
    const double f = objective(res.tensor, samples, wv, indices, cfg.lambda);
    const ConvergenceMetrics metrics = convergence_metrics(prev, res.tensor, c_prev, c, f_prev, f);
    res.trace.append(f, metrics);

    if (f > f_prev + slack * (1.0 + std::abs(f_prev))) {
      res.diverged = true;
      break;
    }
    if (metrics.below(cfg.outer_tol)) {
      res.converged = true;
      break;
    }
    c_prev = c;
    f_prev = f;
  }
  return res;
}

RecoveryResult recover(const tensor::SampleSet& samples, const tensor::WeightVectors& wv,
                       const chaos::MultiIndexSet& indices, const RecoveryConfig& cfg) {
  cfg.validate();
  if (samples.omega.empty()) throw PreconditionError("recovery needs at least one sample");
  std::optional<RecoveryResult> best;
  for (int attempt = 0; attempt < cfg.restarts; ++attempt) {
    std::mt19937_64 rng(cfg.init_seed + static_cast<std::uint64_t>(attempt));
    CpTensor init = CpTensor::random(samples.d, samples.m, cfg.rank, cfg.init_scale, rng);
    if (cfg.init_offset != 0.0)
      for (int k = 0; k < init.modes(); ++k) init.factor(k).array() += cfg.init_offset;
    RecoveryResult res = recover_from(samples, wv, indices, cfg, std::move(init));
    res.restart = attempt;
    const double f = res.trace.size() ? res.trace.f.back() : res.trace.initial_objective;
    if (!best || f < (best->trace.size() ? best->trace.f.back() : best->trace.initial_objective))
      best = std::move(res);
  }
  return std::move(*best);
}

double prediction_error(const CpTensor& t, const tensor::SampleSet& s) {
  if (s.holdout.empty()) throw PreconditionError("prediction error needs a non-empty holdout");
  if (s.holdout_values.size() != s.holdout.size() || s.holdout_weights.size() != s.holdout.size())
    throw DimensionMismatch("holdout indices, values and weights differ in length");
  double num = 0.0, den = 0.0;
  for (std::size_t n = 0; n < s.holdout.size(); ++n) {
    const double g = s.holdout_values[n];
    const double diff = tensor::cp_eval(t, s.holdout[n]) - g;
    num += diff * diff * s.holdout_weights[n];
    den += g * g * s.holdout_weights[n];
  }
  if (!(den > 0.0)) throw ZeroDenominator("all holdout values are zero");
  return std::sqrt(num / den);
}

} // namespace stochflow::recovery

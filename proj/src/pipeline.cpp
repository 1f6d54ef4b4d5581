#include "stochflow/pipeline.hpp"

#include "stochflow/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <thread>

#include <spdlog/spdlog.h>

namespace stochflow::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

template <class Body>
void parallel_for(std::size_t n, int threads, Body&& body) {
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) body(i);
    });
}

json one_based(const tensor::MultiIndex& i) {
  json out = json::array();
  for (int v : i) out.push_back(v + 1);
  return out;
}

tensor::MultiIndex zero_based(const json& j, int d, int m) {
  auto i = j.get<tensor::MultiIndex>();
  if (static_cast<int>(i.size()) != d) throw ParseError("index has " + std::to_string(i.size()) + " entries, expected " + std::to_string(d));
  for (int& v : i) {
    if (v < 1 || v > m) throw ParseError("index entry " + std::to_string(v) + " outside [1, m]");
    --v;
  }
  return i;
}

std::string label(const tensor::MultiIndex& i) {
  std::string s = "(";
  for (std::size_t k = 0; k < i.size(); ++k) s += (k ? "," : "") + std::to_string(i[k] + 1);
  return s + ")";
}

} // namespace

// --- cache -------------------------------------------------------------------

std::optional<double> SimulationCache::find(std::uint64_t case_key, int m, const tensor::MultiIndex& index) const {
  std::scoped_lock lock(mutex_);
  const auto it = entries_.find(Key{case_key, m, index});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void SimulationCache::insert(std::uint64_t case_key, int m, const tensor::MultiIndex& index, double value) {
  std::scoped_lock lock(mutex_);
  entries_[Key{case_key, m, index}] = value;
}

std::size_t SimulationCache::size() const {
  std::scoped_lock lock(mutex_);
  return entries_.size();
}

void SimulationCache::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return; // a missing cache is an empty cache
  try {
    const json doc = json::parse(in);
    std::scoped_lock lock(mutex_);
    for (const json& e : doc.at("entries")) {
      auto idx = e.at("index").get<tensor::MultiIndex>();
      for (int& v : idx) --v;
      entries_[Key{std::stoull(e.at("case").get<std::string>(), nullptr, 16), e.at("m").get<int>(), idx}] =
          e.at("value").get<double>();
    }
  } catch (const std::exception& e) {
    throw ParseError("cache " + path.string() + ": " + e.what());
  }
}

void SimulationCache::save(const fs::path& path) const {
  json entries = json::array();
  {
    std::scoped_lock lock(mutex_);
    for (const auto& [key, value] : entries_) {
      std::ostringstream hex;
      hex << std::hex << std::get<0>(key);
      entries.push_back({{"case", hex.str()}, {"m", std::get<1>(key)}, {"index", one_based(std::get<2>(key))},
                         {"value", value}});
    }
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write cache " + path.string());
  out << json{{"entries", std::move(entries)}}.dump() << '\n';
}

// --- simulation ----------------------------------------------------------------

int resolve_threads(int requested) {
  if (const char* env = std::getenv("STOCHFLOW_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<int>(v);
  }
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<double> node_point(const chaos::BasisFamily& basis, std::span<const int> index) {
  std::vector<double> xi(index.size());
  for (std::size_t k = 0; k < index.size(); ++k) xi[k] = basis.node(k, index[k]);
  return xi;
}

double simulate_point(const grid::GridCase& grid, std::span<const double> xi, const powerflow::SolveOptions& solver) {
  const grid::GridCase perturbed = grid::apply_parameters(grid, xi);
  return powerflow::extract_output(perturbed, powerflow::solve(perturbed, solver));
}

namespace {

powerflow::SolveOptions with_base_warm_start(const grid::GridCase& grid, const SimulationOptions& options) {
  powerflow::SolveOptions solver = options.solver;
  if (!options.warm_start_from_base || solver.warm_start) return solver;
  try {
    solver.warm_start = powerflow::solve(grid, options.solver);
  } catch (const NonConvergence&) {
    // fall back to the configured start
  }
  return solver;
}

} // namespace

SimulationOutcome simulate_samples(const grid::GridCase& grid, const chaos::BasisFamily& basis,
                                   const std::vector<tensor::MultiIndex>& omega,
                                   const std::vector<tensor::MultiIndex>& holdout,
                                   const SimulationOptions& options) {
  const int d = static_cast<int>(basis.dimension());
  const int m = basis.points();
  if (static_cast<int>(grid.dimension()) != d)
    throw DimensionMismatch("basis has " + std::to_string(d) + " parameters, case has " +
                            std::to_string(grid.dimension()));

  std::vector<const tensor::MultiIndex*> all;
  for (const auto& i : omega) all.push_back(&i);
  for (const auto& i : holdout) all.push_back(&i);
  for (const auto* i : all) {
    if (static_cast<int>(i->size()) != d) throw IndexOutOfRange("index arity does not match the case");
    for (int v : *i)
      if (v < 0 || v >= m) throw IndexOutOfRange("index " + label(*i) + " outside the quadrature grid");
  }

  const std::uint64_t key = grid::case_hash(grid);
  const powerflow::SolveOptions solver = with_base_warm_start(grid, options);
  std::vector<double> values(all.size(), 0.0);
  std::vector<std::exception_ptr> errors(all.size());
  std::vector<char> hit(all.size(), 0);

  parallel_for(all.size(), resolve_threads(options.threads), [&](std::size_t n) {
    const tensor::MultiIndex& idx = *all[n];
    try {
      if (options.cache) {
        if (const auto cached = options.cache->find(key, m, idx)) {
          values[n] = *cached;
          hit[n] = 1;
          return;
        }
      }
      values[n] = simulate_point(grid, node_point(basis, idx), solver);
      if (options.cache) options.cache->insert(key, m, idx, values[n]);
    } catch (...) {
      errors[n] = std::current_exception();
    }
  });

  SimulationOutcome out;
  out.samples.d = d;
  out.samples.m = m;
  for (std::size_t n = 0; n < all.size(); ++n) {
    const bool in_omega = n < omega.size();
    if (errors[n]) {
      std::string why;
      try {
        std::rethrow_exception(errors[n]);
      } catch (const std::exception& e) {
        why = e.what();
      }
      if (options.policy == FailurePolicy::Abort)
        throw SimulationFailure("power flow failed at index " + label(*all[n]) + ": " + why);
      spdlog::warn("skipping index {}: {}", label(*all[n]), why);
      out.skipped.push_back(*all[n]);
      continue;
    }
    out.cache_hits += hit[n] ? 1 : 0;
    if (in_omega) {
      out.samples.omega.push_back(*all[n]);
      out.samples.values.push_back(values[n]);
    } else {
      out.samples.holdout.push_back(*all[n]);
      out.samples.holdout_values.push_back(values[n]);
      out.samples.holdout_weights.push_back(tensor::composite_weight(basis, *all[n]));
    }
  }
  return out;
}

// --- expansion -----------------------------------------------------------------

double GpcExpansion::evaluate(std::span<const double> xi) const {
  if (!basis) throw ValidationError("expansion has no basis");
  const std::size_t d = basis->dimension();
  if (xi.size() != d) throw DimensionMismatch("xi has the wrong dimension");
  std::vector<std::vector<double>> phi(d);
  for (std::size_t k = 0; k < d; ++k) {
    phi[k] = chaos::orthonormal_eval_all(basis->parameter(k).recurrence, xi[k]);
  }
  double y = 0.0;
  for (std::size_t n = 0; n < indices.size(); ++n) {
    double psi = coefficients(static_cast<Eigen::Index>(n));
    if (psi == 0.0) continue;
    const auto& alpha = indices[n];
    for (std::size_t k = 0; k < d; ++k)
      if (alpha[k]) psi *= phi[k][static_cast<std::size_t>(alpha[k])];
    y += psi;
  }
  return y;
}

GpcExpansion expansion_from_tensor(const tensor::CpTensor& t, const tensor::WeightVectors& wv,
                                   const chaos::MultiIndexSet& indices,
                                   std::shared_ptr<const chaos::BasisFamily> basis) {
  return GpcExpansion{indices, tensor::all_coefficients(t, wv, indices), std::move(basis)};
}

Moments moments(const GpcExpansion& e) {
  if (e.coefficients.size() == 0) return {};
  const double mean = e.coefficients(0);
  const double var = e.coefficients.squaredNorm() - mean * mean;
  return {mean, std::sqrt(std::max(var, 0.0))};
}

Moments sample_moments(std::span<const double> values) {
  if (values.empty()) return {};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
}

std::vector<double> sample_expansion(const GpcExpansion& e, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ValidationError("sample_expansion needs n >= 1");
  if (!e.basis) throw ValidationError("expansion has no basis");
  const std::size_t d = e.basis->dimension();
  std::vector<ParameterSampler> draw;
  for (std::size_t k = 0; k < d; ++k) draw.emplace_back(e.basis->parameter(k).distribution);
  std::mt19937_64 rng(seed);
  std::vector<double> out(n);
  std::vector<double> xi(d);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t k = 0; k < d; ++k) xi[k] = draw[k](rng);
    out[s] = e.evaluate(xi);
  }
  return out;
}

// --- histogram / Monte Carlo -----------------------------------------------------

Histogram Histogram::build(std::span<const double> values, double lo, double hi, int bins) {
  if (bins < 1 || !(hi > lo)) throw ValidationError("histogram needs bins >= 1 and hi > lo");
  Histogram h{lo, hi, std::vector<std::size_t>(static_cast<std::size_t>(bins), 0)};
  const double width = (hi - lo) / bins;
  for (double v : values) {
    if (v < lo || v > hi) continue;
    auto b = static_cast<std::size_t>((v - lo) / width);
    h.counts[std::min(b, h.counts.size() - 1)] += 1;
  }
  return h;
}

Histogram Histogram::around(std::span<const double> values, const Moments& m, int bins) {
  double half = 5.0 * m.std;
  if (!(half > 0.0)) half = 1e-9 * std::max(1.0, std::abs(m.mean));
  return build(values, m.mean - half, m.mean + half, bins);
}

double Histogram::bin_lo(std::size_t b) const { return lo + (hi - lo) * static_cast<double>(b) / counts.size(); }
double Histogram::bin_hi(std::size_t b) const { return lo + (hi - lo) * static_cast<double>(b + 1) / counts.size(); }

void Histogram::write_csv(const fs::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "bin_lo,bin_hi,count\n" << std::setprecision(17);
  for (std::size_t b = 0; b < counts.size(); ++b) out << bin_lo(b) << ',' << bin_hi(b) << ',' << counts[b] << '\n';
}

MonteCarloResult monte_carlo(const grid::GridCase& grid, std::size_t n, std::uint64_t seed,
                             const SimulationOptions& options, int bins) {
  if (n < 1) throw ValidationError("Monte Carlo needs n >= 1");
  const std::size_t d = grid.dimension();
  std::vector<ParameterSampler> draw;
  for (const Distribution& dist : grid.uncertainty.distributions()) draw.emplace_back(dist);

  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> xi(n, std::vector<double>(d));
  for (auto& row : xi)
    for (std::size_t k = 0; k < d; ++k) row[k] = draw[k](rng);

  const powerflow::SolveOptions solver = with_base_warm_start(grid, options);
  std::vector<double> values(n, 0.0);
  std::vector<std::exception_ptr> errors(n);
  parallel_for(n, resolve_threads(options.threads), [&](std::size_t s) {
    try {
      values[s] = simulate_point(grid, xi[s], solver);
    } catch (...) {
      errors[s] = std::current_exception();
    }
  });

  MonteCarloResult res;
  for (std::size_t s = 0; s < n; ++s) {
    if (errors[s]) {
      if (options.policy == FailurePolicy::Abort) {
        try {
          std::rethrow_exception(errors[s]);
        } catch (const std::exception& e) {
          throw SimulationFailure("Monte Carlo sample " + std::to_string(s) + " failed: " + e.what());
        }
      }
      ++res.failures;
      continue;
    }
    res.samples.push_back(values[s]);
  }
  if (res.samples.empty()) throw SimulationFailure("every Monte Carlo sample failed");
  res.moments = sample_moments(res.samples);
  res.histogram = Histogram::around(res.samples, res.moments, bins);
  return res;
}

double log10_reduction_ratio(int d, int m, std::uint64_t count) {
  if (count < 1) throw ValidationError("reduction ratio needs a non-empty sample set");
  return tensor::log10_grid_size(d, m) - std::log10(static_cast<double>(count));
}

// --- files ---------------------------------------------------------------------

void write_coefficients_csv(const GpcExpansion& e, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "alpha,c\n" << std::setprecision(17);
  for (std::size_t n = 0; n < e.indices.size(); ++n)
    out << chaos::index_label(e.indices[n]) << ',' << e.coefficients(static_cast<Eigen::Index>(n)) << '\n';
}

json samples_to_json(const tensor::SampleSet& s, const chaos::BasisFamily& basis) {
  json dists = json::array();
  for (std::size_t k = 0; k < basis.dimension(); ++k) dists.push_back(family_name(basis.parameter(k).distribution.family));
  json omega = json::array(), holdout = json::array();
  for (const auto& i : s.omega) omega.push_back(one_based(i));
  for (const auto& i : s.holdout) holdout.push_back(one_based(i));
  return {{"d", s.d},
          {"m", s.m},
          {"p", basis.degree()},
          {"distributions", std::move(dists)},
          {"omega", std::move(omega)},
          {"values", s.values},
          {"holdout", std::move(holdout)},
          {"holdout_values", s.holdout_values}};
}

LoadedSamples samples_from_json(const json& doc) {
  LoadedSamples out;
  try {
    const int d = doc.at("d").get<int>();
    const int m = doc.at("m").get<int>();
    const int p = doc.at("p").get<int>();
    std::vector<Distribution> dists;
    for (const json& name : doc.at("distributions")) {
      const Family f = parse_family(name.get<std::string>());
      dists.push_back(f == Family::Uniform ? Distribution::uniform() : Distribution::gaussian());
    }
    if (static_cast<int>(dists.size()) != d) throw ParseError("distribution count does not match d");
    out.basis = std::make_shared<const chaos::BasisFamily>(dists, p, m);

    tensor::SampleSet& s = out.samples;
    s.d = d;
    s.m = m;
    for (const json& i : doc.at("omega")) s.omega.push_back(zero_based(i, d, m));
    s.values = doc.at("values").get<std::vector<double>>();
    if (doc.contains("holdout")) {
      for (const json& i : doc.at("holdout")) s.holdout.push_back(zero_based(i, d, m));
      s.holdout_values = doc.at("holdout_values").get<std::vector<double>>();
    }
    for (const auto& i : s.holdout) s.holdout_weights.push_back(tensor::composite_weight(*out.basis, i));
    if (doc.contains("recovery")) out.recovery = recovery::config_from_json(doc.at("recovery"));
  } catch (const json::exception& e) {
    throw ParseError(e.what());
  }
  out.samples.validate();
  return out;
}

// --- study -----------------------------------------------------------------------

StudyConfig StudyConfig::from_json(const json& doc, const fs::path& base_dir) {
  StudyConfig cfg;
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base_dir / p; };
  try {
    cfg.case_path = resolve(doc.at("case").get<std::string>());
    cfg.degree = doc.value("degree", 0);
    cfg.points = doc.value("points", 0);
    cfg.samples = doc.at("samples").get<std::uint64_t>();
    cfg.holdout = doc.value("holdout", std::uint64_t{0});
    cfg.seed = doc.value("seed", std::uint64_t{1});
    cfg.lambda_explicit = doc.contains("recovery") && doc.at("recovery").contains("lambda");
    if (doc.contains("recovery")) cfg.recovery = recovery::config_from_json(doc.at("recovery"));
    if (doc.contains("monte_carlo")) {
      const json& mc = doc.at("monte_carlo");
      cfg.mc_samples = mc.value("samples", cfg.mc_samples);
      cfg.mc_seed = mc.value("seed", cfg.mc_seed);
    }
    cfg.gpc_samples = doc.value("gpc_samples", cfg.gpc_samples);
    cfg.gpc_seed = doc.value("gpc_seed", cfg.gpc_seed);
    cfg.histogram_bins = doc.value("histogram_bins", cfg.histogram_bins);
    if (doc.contains("output_dir")) cfg.output_dir = resolve(doc.at("output_dir").get<std::string>());
    if (doc.contains("cache")) cfg.cache_path = resolve(doc.at("cache").get<std::string>());
    cfg.threads = doc.value("threads", 0);
    const std::string policy = doc.value("failure_policy", std::string("abort"));
    if (policy == "abort") cfg.policy = FailurePolicy::Abort;
    else if (policy == "skip") cfg.policy = FailurePolicy::Skip;
    else throw ParseError("unknown failure_policy '" + policy + "'");
  } catch (const json::exception& e) {
    throw ParseError(e.what());
  }
  if (cfg.samples < 1) throw ValidationError("study needs samples >= 1");
  return cfg;
}

StudyConfig StudyConfig::from_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open study config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return from_json(doc, path.parent_path());
}

json StudyReport::to_json() const {
  json skipped_json = json::array();
  for (const auto& i : skipped) skipped_json.push_back(one_based(i));
  json doc = {{"case", case_path},
              {"d", d},
              {"m", m},
              {"p", p},
              {"basis_count", basis_count},
              {"samples", samples},
              {"holdout", holdout},
              {"grid_size_log10", grid_size_log10},
              {"reduction_ratio", reduction_ratio},
              {"reduction_ratio_log10", reduction_ratio_log10},
              {"recovery", {{"mean", recovery.mean}, {"std", recovery.std}}},
              {"prediction_error", prediction_error ? json(*prediction_error) : json(nullptr)},
              {"converged", converged},
              {"diverged", diverged},
              {"outer_iterations", outer_iterations},
              {"final_objective", final_objective},
              {"admm_unconverged", admm_unconverged},
              {"rejected_updates", rejected_updates},
              {"skipped", std::move(skipped_json)},
              {"files", files}};
  if (monte_carlo)
    doc["monte_carlo"] = {{"mean", monte_carlo->mean}, {"std", monte_carlo->std}, {"samples", mc_samples}};
  else
    doc["monte_carlo"] = nullptr;
  return doc;
}

namespace {

template <class F>
auto stage(const char* name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e);
  } catch (const std::exception& e) {
    throw StageError(name, e.what(), ErrorCategory::Internal);
  }
}

} // namespace

StudyReport run_study(const StudyConfig& cfg_in) {
  StudyConfig cfg = cfg_in;
  const grid::GridCase grid = stage("case", [&] { return grid::load_case(cfg.case_path); });
  const int d = static_cast<int>(grid.dimension());
  if (d < 1) throw StageError("case", "case has no uncertain parameters", ErrorCategory::Validation);

  const bool small = d <= 5;
  if (cfg.degree <= 0) cfg.degree = small ? 3 : 2;
  if (cfg.points <= 0) cfg.points = small ? 4 : 3;
  if (!cfg.lambda_explicit) cfg.recovery.lambda = small ? 0.25 : 0.3;

  StudyReport rep;
  rep.case_path = cfg.case_path.string();
  rep.d = d;
  rep.m = cfg.points;
  rep.p = cfg.degree;

  SimulationCache cache;
  SimulationOptions sim;
  sim.threads = cfg.threads;
  sim.policy = cfg.policy;
  sim.cache = cfg.cache_path ? &cache : nullptr;

  auto basis = stage("sampling", [&] {
    return std::make_shared<const chaos::BasisFamily>(grid.uncertainty.distributions(), cfg.degree, cfg.points);
  });
  const chaos::MultiIndexSet indices = stage("sampling", [&] { return chaos::enumerate_indices(d, cfg.degree); });
  const tensor::IndexDraw draw =
      stage("sampling", [&] { return tensor::sample_omega(d, cfg.points, cfg.samples, cfg.seed, cfg.holdout); });
  rep.basis_count = indices.size();
  rep.grid_size_log10 = tensor::log10_grid_size(d, cfg.points);

  SimulationOutcome sim_out = stage("simulation", [&] {
    if (cfg.cache_path) cache.load(*cfg.cache_path);
    return simulate_samples(grid, *basis, draw.omega, draw.holdout, sim);
  });
  const tensor::SampleSet& samples = sim_out.samples;
  rep.samples = samples.omega.size();
  rep.holdout = samples.holdout.size();
  rep.skipped = sim_out.skipped;
  rep.reduction_ratio_log10 = stage("sampling", [&] { return log10_reduction_ratio(d, cfg.points, rep.samples); });
  rep.reduction_ratio = std::pow(10.0, rep.reduction_ratio_log10);
  spdlog::info("{} samples of a {}^{} grid (K = {}), reduction ratio 10^{:.3f} = {:.4g}", rep.samples, cfg.points,
               d, rep.basis_count, rep.reduction_ratio_log10, rep.reduction_ratio);

  const tensor::WeightVectors wv(*basis);
  const recovery::RecoveryResult rec =
      stage("recovery", [&] { return recovery::recover(samples, wv, indices, cfg.recovery); });
  rep.trace = rec.trace;
  rep.converged = rec.converged;
  rep.diverged = rec.diverged;
  rep.outer_iterations = static_cast<int>(rec.trace.size());
  rep.final_objective = rec.trace.size() ? rec.trace.f.back() : rec.trace.initial_objective;
  rep.admm_unconverged = rec.admm_unconverged;
  rep.rejected_updates = rec.rejected_updates;
  spdlog::info("recovery: {} outer iterations, converged = {}, f = {:.6g}", rep.outer_iterations, rep.converged,
               rep.final_objective);

  stage("expansion", [&] {
    rep.expansion = expansion_from_tensor(rec.tensor, wv, indices, basis);
    rep.recovery = moments(rep.expansion);
    if (!samples.holdout.empty()) rep.prediction_error = recovery::prediction_error(rec.tensor, samples);
  });

  std::optional<MonteCarloResult> mc;
  if (cfg.mc_samples > 0) {
    mc = stage("monte_carlo", [&] { return monte_carlo(grid, cfg.mc_samples, cfg.mc_seed, sim, cfg.histogram_bins); });
    rep.monte_carlo = mc->moments;
    rep.mc_samples = mc->samples.size();
  }

  stage("report", [&] {
    if (cfg.output_dir.empty()) return;
    fs::create_directories(cfg.output_dir);
    const std::vector<double> gpc_draws =
        cfg.gpc_samples > 0 ? sample_expansion(rep.expansion, cfg.gpc_samples, cfg.gpc_seed) : std::vector<double>{};
    const Moments span = mc ? mc->moments : rep.recovery;

    write_coefficients_csv(rep.expansion, cfg.output_dir / "coeffs.csv");
    rep.files["coefficients"] = "coeffs.csv";
    rec.trace.write_csv(cfg.output_dir / "trace.csv");
    rep.files["trace"] = "trace.csv";
    if (!gpc_draws.empty()) {
      Histogram::around(gpc_draws, span, cfg.histogram_bins).write_csv(cfg.output_dir / "hist_gpc.csv");
      rep.files["hist_gpc"] = "hist_gpc.csv";
    }
    if (mc) {
      mc->histogram.write_csv(cfg.output_dir / "hist_mc.csv");
      rep.files["hist_mc"] = "hist_mc.csv";
    }
    {
      std::ofstream out(cfg.output_dir / "samples.json");
      json doc = samples_to_json(samples, *basis);
      doc["recovery"] = recovery::to_json(cfg.recovery);
      out << doc.dump(1) << '\n';
      rep.files["samples"] = "samples.json";
    }
    {
      std::ofstream out(cfg.output_dir / "tensor.json");
      out << tensor::to_json(rec.tensor).dump() << '\n';
      rep.files["tensor"] = "tensor.json";
    }
    if (cfg.cache_path) cache.save(*cfg.cache_path);
    rep.files["report"] = "report.json";
    std::ofstream out(cfg.output_dir / "report.json");
    out << rep.to_json().dump(2) << '\n';
  });
  return rep;
}

StudyReport run_study(const fs::path& config_path) {
  const StudyConfig cfg = stage("config", [&] { return StudyConfig::from_file(config_path); });
  return run_study(cfg);
}

} // namespace stochflow::pipeline

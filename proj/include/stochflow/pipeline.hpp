#pragma once

#include "stochflow/chaos.hpp"
#include "stochflow/grid.hpp"
#include "stochflow/powerflow.hpp"
#include "stochflow/recovery.hpp"
#include "stochflow/tensor.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

namespace stochflow::pipeline {

enum class FailurePolicy { Abort, Skip };

/// Solved outputs keyed by (case hash, quadrature size, grid index), so runs
/// that grow Omega reuse earlier solves. Safe to share between workers.
class SimulationCache {
public:
  std::optional<double> find(std::uint64_t case_key, int m, const tensor::MultiIndex& index) const;
  void insert(std::uint64_t case_key, int m, const tensor::MultiIndex& index, double value);
  std::size_t size() const;

  void load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

private:
  using Key = std::tuple<std::uint64_t, int, tensor::MultiIndex>;
  mutable std::mutex mutex_;
  std::map<Key, double> entries_;
};

struct SimulationOptions {
  int threads = 0; // 0: STOCHFLOW_THREADS, then hardware concurrency
  FailurePolicy policy = FailurePolicy::Abort;
  powerflow::SolveOptions solver;
  bool warm_start_from_base = true;
  SimulationCache* cache = nullptr;
};

/// Worker count after applying the STOCHFLOW_THREADS override.
int resolve_threads(int requested);

/// Quadrature node vector (xi_1^{i_1}, ..., xi_d^{i_d}) for a 0-based index.
std::vector<double> node_point(const chaos::BasisFamily& basis, std::span<const int> index);

/// One deterministic solve at parameter vector xi; returns y = g(xi).
double simulate_point(const grid::GridCase& grid, std::span<const double> xi,
                      const powerflow::SolveOptions& solver = {});

struct SimulationOutcome {
  tensor::SampleSet samples;
  std::vector<tensor::MultiIndex> skipped; // failed indices removed under FailurePolicy::Skip
  std::size_t cache_hits = 0;
};

/// Solves the power flow at every index of omega and holdout. Throws
/// SimulationFailure on the first failed index under FailurePolicy::Abort.
SimulationOutcome simulate_samples(const grid::GridCase& grid, const chaos::BasisFamily& basis,
                                   const std::vector<tensor::MultiIndex>& omega,
                                   const std::vector<tensor::MultiIndex>& holdout,
                                   const SimulationOptions& options = {});

struct GpcExpansion {
  chaos::MultiIndexSet indices;
  Eigen::VectorXd coefficients; // canonical (graded lexicographic) order
  std::shared_ptr<const chaos::BasisFamily> basis;

  double evaluate(std::span<const double> xi) const;
};

GpcExpansion expansion_from_tensor(const tensor::CpTensor& t, const tensor::WeightVectors& wv,
                                   const chaos::MultiIndexSet& indices,
                                   std::shared_ptr<const chaos::BasisFamily> basis);

struct Moments {
  double mean = 0.0;
  double std = 0.0;
};

/// mean = c_0, std = sqrt(sum_{alpha != 0} c_alpha^2).
Moments moments(const GpcExpansion& e);

/// Sample mean and unbiased standard deviation.
Moments sample_moments(std::span<const double> values);

/// n i.i.d. draws of xi pushed through the expansion.
std::vector<double> sample_expansion(const GpcExpansion& e, std::size_t n, std::uint64_t seed);

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> counts;

  /// Uniform bins on [lo, hi]; values outside are not counted.
  static Histogram build(std::span<const double> values, double lo, double hi, int bins);
  /// 50 bins spanning mean +/- 5 std by default.
  static Histogram around(std::span<const double> values, const Moments& m, int bins = 50);
  double bin_lo(std::size_t b) const;
  double bin_hi(std::size_t b) const;
  void write_csv(const std::filesystem::path& path) const;
};

struct MonteCarloResult {
  Moments moments;
  std::vector<double> samples;
  std::size_t failures = 0;
  Histogram histogram;
};

/// n parameter draws (drawn up front, in order) and n power-flow solves.
MonteCarloResult monte_carlo(const grid::GridCase& grid, std::size_t n, std::uint64_t seed,
                             const SimulationOptions& options = {}, int bins = 50);

/// log10(m^d / count).
double log10_reduction_ratio(int d, int m, std::uint64_t count);

struct StudyConfig {
  std::filesystem::path case_path;
  int degree = 0; // 0: 3 for d <= 5, else 2
  int points = 0; // 0: 4 for d <= 5, else 3
  std::uint64_t samples = 0;
  std::uint64_t holdout = 0;
  std::uint64_t seed = 1;
  recovery::RecoveryConfig recovery;
  bool lambda_explicit = false; // otherwise 0.25 for d <= 5, 0.3 above
  std::size_t mc_samples = 5000;
  std::uint64_t mc_seed = 2;
  std::size_t gpc_samples = 5000;
  std::uint64_t gpc_seed = 3;
  int histogram_bins = 50;
  std::filesystem::path output_dir;
  std::optional<std::filesystem::path> cache_path;
  int threads = 0;
  FailurePolicy policy = FailurePolicy::Abort;

  /// Relative paths resolve against the config file's directory.
  static StudyConfig from_file(const std::filesystem::path& path);
  static StudyConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);
};

struct StudyReport {
  std::string case_path;
  int d = 0;
  int m = 0;
  int p = 0;
  std::uint64_t basis_count = 0;
  std::uint64_t samples = 0;
  std::uint64_t holdout = 0;
  double grid_size_log10 = 0.0;
  double reduction_ratio_log10 = 0.0;
  double reduction_ratio = 0.0;
  Moments recovery;
  std::optional<Moments> monte_carlo;
  std::size_t mc_samples = 0;
  std::optional<double> prediction_error;
  bool converged = false;
  bool diverged = false;
  int outer_iterations = 0;
  double final_objective = 0.0;
  int admm_unconverged = 0;
  int rejected_updates = 0;
  std::vector<tensor::MultiIndex> skipped;
  recovery::ConvergenceTrace trace;
  GpcExpansion expansion;
  std::map<std::string, std::string> files;

  nlohmann::json to_json() const;
};

/// Sample, simulate, recover, extract and validate; writes report.json,
/// coeffs.csv, hist_gpc.csv, hist_mc.csv, trace.csv, samples.json and
/// tensor.json into cfg.output_dir (when set). Errors are StageError.
StudyReport run_study(const StudyConfig& cfg);
StudyReport run_study(const std::filesystem::path& config_path);

void write_coefficients_csv(const GpcExpansion& e, const std::filesystem::path& path);

/// Sample files store indices 1-based.
nlohmann::json samples_to_json(const tensor::SampleSet& s, const chaos::BasisFamily& basis);

struct LoadedSamples {
  tensor::SampleSet samples;
  std::shared_ptr<const chaos::BasisFamily> basis;
  std::optional<recovery::RecoveryConfig> recovery;
};
LoadedSamples samples_from_json(const nlohmann::json& doc);

} // namespace stochflow::pipeline

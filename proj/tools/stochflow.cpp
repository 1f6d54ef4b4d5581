// stochflow command line: single solves, quadrature tables, full studies.
#include "stochflow/chaos.hpp"
#include "stochflow/error.hpp"
#include "stochflow/grid.hpp"
#include "stochflow/pipeline.hpp"
#include "stochflow/powerflow.hpp"
#include "stochflow/recovery.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"

namespace sf = stochflow;
namespace pl = stochflow::pipeline;
using nlohmann::json;

namespace {

int exit_code(sf::ErrorCategory c) {
  switch (c) {
  case sf::ErrorCategory::Validation: return 2;
  case sf::ErrorCategory::Simulation: return 3;
  case sf::ErrorCategory::Solver: return 4;
  case sf::ErrorCategory::Internal: break;
  }
  return 1;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sf::ParseError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw sf::ParseError(path + ": " + e.what());
  }
}

int cmd_pf(const std::string& case_path, const std::vector<double>& xi) {
  sf::grid::GridCase grid = sf::grid::load_case(case_path);
  if (!xi.empty()) grid = sf::grid::apply_parameters(grid, xi);
  const auto sol = sf::powerflow::solve(grid);
  json out = sf::powerflow::to_json(sol);
  out["output"] = sf::powerflow::extract_output(grid, sol);
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_quad(const std::string& dist, int m) {
  const sf::Family f = sf::parse_family(dist);
  const sf::Distribution d = f == sf::Family::Uniform ? sf::Distribution::uniform() : sf::Distribution::gaussian();
  const auto rule = sf::chaos::gauss_rule(sf::chaos::build_recurrence(d, std::max(m - 1, 0)), m);
  std::printf("node,weight\n");
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) std::printf("%.17g,%.17g\n", rule.nodes[i], rule.weights[i]);
  return 0;
}

int cmd_study(const std::string& config, int threads) {
  auto cfg = pl::StudyConfig::from_file(config);
  if (threads > 0) cfg.threads = threads;
  const auto rep = pl::run_study(cfg);
  json summary = rep.to_json();
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_mc(const std::string& config, int threads) {
  auto cfg = pl::StudyConfig::from_file(config);
  const auto grid = sf::grid::load_case(cfg.case_path);
  pl::SimulationOptions opts;
  opts.threads = threads > 0 ? threads : cfg.threads;
  opts.policy = cfg.policy;
  const auto mc = pl::monte_carlo(grid, cfg.mc_samples, cfg.mc_seed, opts, cfg.histogram_bins);
  if (!cfg.output_dir.empty()) {
    std::filesystem::create_directories(cfg.output_dir);
    mc.histogram.write_csv(cfg.output_dir / "hist_mc.csv");
  }
  std::cout << json{{"mean", mc.moments.mean},
                    {"std", mc.moments.std},
                    {"samples", mc.samples.size()},
                    {"failures", mc.failures}}
                   .dump(2)
            << '\n';
  return 0;
}

int cmd_recover(const std::string& samples_path, const std::string& config_path, const std::string& out_dir) {
  const auto loaded = pl::samples_from_json(read_json(samples_path));
  sf::recovery::RecoveryConfig cfg = loaded.recovery.value_or(sf::recovery::RecoveryConfig{});
  if (!config_path.empty()) cfg = sf::recovery::config_from_json(read_json(config_path), cfg);

  const sf::tensor::WeightVectors wv(*loaded.basis);
  const auto indices = sf::chaos::enumerate_indices(static_cast<int>(loaded.basis->dimension()), loaded.basis->degree());
  const auto rec = sf::recovery::recover(loaded.samples, wv, indices, cfg);
  const auto expansion = pl::expansion_from_tensor(rec.tensor, wv, indices, loaded.basis);
  const auto mom = pl::moments(expansion);

  json out = {{"mean", mom.mean},
              {"std", mom.std},
              {"converged", rec.converged},
              {"diverged", rec.diverged},
              {"outer_iterations", rec.trace.size()}};
  if (!loaded.samples.holdout.empty()) out["prediction_error"] = sf::recovery::prediction_error(rec.tensor, loaded.samples);
  if (!out_dir.empty()) {
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    pl::write_coefficients_csv(expansion, dir / "coeffs.csv");
    rec.trace.write_csv(dir / "trace.csv");
    std::ofstream(dir / "tensor.json") << sf::tensor::to_json(rec.tensor).dump() << '\n';
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic power flow by low-rank tensor recovery"};
  app.require_subcommand(1);
  int threads = 0;
  bool verbose = false;
  app.add_option("--threads", threads, "Worker threads for power-flow solves (STOCHFLOW_THREADS overrides)");
  app.add_flag("-v,--verbose", verbose, "Log progress to stderr");

  std::string case_path;
  std::vector<double> xi;
  auto* pf = app.add_subcommand("pf", "Solve one deterministic power flow");
  pf->add_option("case", case_path, "Case JSON")->required();
  pf->add_option("--xi", xi, "Parameter values, one per uncertain load");

  std::string dist = "gaussian";
  int m = 3;
  auto* quad = app.add_subcommand("quad", "Print Gauss quadrature nodes and weights");
  quad->add_option("--dist", dist, "gaussian or uniform");
  quad->add_option("--m", m, "Number of points")->check(CLI::Range(1, 200));

  std::string config;
  auto* study = app.add_subcommand("study", "Run the full sampling / recovery / validation pipeline");
  study->add_option("config", config, "Study config JSON")->required();
  auto* mc = app.add_subcommand("mc", "Monte Carlo reference run for a study config");
  mc->add_option("config", config, "Study config JSON")->required();

  std::string samples, recovery_config, out_dir;
  auto* rec = app.add_subcommand("recover", "Recover an expansion from precomputed samples");
  rec->add_option("--samples", samples, "Samples JSON")->required();
  rec->add_option("--config", recovery_config, "Recovery settings JSON");
  rec->add_option("--out", out_dir, "Directory for coeffs.csv, trace.csv and tensor.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  spdlog::set_default_logger(spdlog::stderr_color_mt("stochflow")); // stdout carries the JSON results
  spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);

  try {
    if (*pf) return cmd_pf(case_path, xi);
    if (*quad) return cmd_quad(dist, m);
    if (*study) return cmd_study(config, threads);
    if (*mc) return cmd_mc(config, threads);
    if (*rec) return cmd_recover(samples, recovery_config, out_dir);
  } catch (const sf::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

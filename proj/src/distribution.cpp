#include "stochflow/distribution.hpp"

#include "stochflow/error.hpp"

#include <algorithm>
#include <string>

namespace stochflow {

std::string_view family_name(Family family) {
  switch (family) {
  case Family::Gaussian: return "gaussian";
  case Family::Uniform: return "uniform";
  case Family::Custom: return "custom";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  if (name == "gaussian" || name == "normal") return Family::Gaussian;
  if (name == "uniform") return Family::Uniform;
  throw UnsupportedDistribution("unknown distribution '" + std::string(name) + "'");
}

ParameterSampler::ParameterSampler(const Distribution& dist) : family_(dist.family) {
  if (family_ != Family::Custom) return;
  if (!dist.density || !(dist.support_hi > dist.support_lo))
    throw UnsupportedDistribution("custom distribution needs a density and a finite support");

  constexpr int points = 2000;
  const double h = (dist.support_hi - dist.support_lo) / (points - 1);
  grid_.resize(points);
  cdf_.assign(points, 0.0);
  double prev = dist.density(dist.support_lo);
  grid_[0] = dist.support_lo;
  for (int i = 1; i < points; ++i) {
    grid_[i] = dist.support_lo + h * i;
    const double cur = dist.density(grid_[i]);
    cdf_[i] = cdf_[i - 1] + 0.5 * h * (prev + cur);
    prev = cur;
  }
  const double total = cdf_.back();
  if (!(total > 0.0)) throw UnsupportedDistribution("custom density integrates to zero");
  for (double& c : cdf_) c /= total;
}

double ParameterSampler::operator()(std::mt19937_64& rng) const {
  switch (family_) {
  case Family::Gaussian: return std::normal_distribution<double>(0.0, 1.0)(rng);
  case Family::Uniform: return std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
  case Family::Custom: break;
  }
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.begin()) return grid_.front();
  if (it == cdf_.end()) return grid_.back();
  const auto hi = static_cast<std::size_t>(it - cdf_.begin());
  const std::size_t lo = hi - 1;
  const double span = cdf_[hi] - cdf_[lo];
  const double t = span > 0.0 ? (u - cdf_[lo]) / span : 0.0;
  return grid_[lo] + t * (grid_[hi] - grid_[lo]);
}

} // namespace stochflow

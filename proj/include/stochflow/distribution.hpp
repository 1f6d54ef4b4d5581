#pragma once

#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace stochflow {

/// Marginal law of one standardized random parameter xi_k.
///
/// Gaussian is the standard normal and Uniform is U[-1, 1]; physical means and
/// spreads live in the affine load mapping. Custom carries an arbitrary density
/// on a finite interval and is only reachable through the library API.
enum class Family { Gaussian, Uniform, Custom };

struct Distribution {
  Family family = Family::Gaussian;
  std::function<double(double)> density; // Custom only, need not be normalized
  double support_lo = 0.0;                // Custom only
  double support_hi = 0.0;

  static Distribution gaussian() { return {Family::Gaussian, {}, 0.0, 0.0}; }
  static Distribution uniform() { return {Family::Uniform, {}, -1.0, 1.0}; }
  static Distribution custom(std::function<double(double)> pdf, double lo, double hi) {
    return {Family::Custom, std::move(pdf), lo, hi};
  }
};

std::string_view family_name(Family family);
Family parse_family(std::string_view name);

/// Draws one standardized value. Custom densities are sampled by inverting a
/// tabulated CDF on the same grid the Stieltjes procedure uses.
class ParameterSampler {
public:
  explicit ParameterSampler(const Distribution& dist);

  double operator()(std::mt19937_64& rng) const;

private:
  Family family_;
  std::vector<double> grid_;
  std::vector<double> cdf_;
};

} // namespace stochflow

#pragma once

#include "stochflow/distribution.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace stochflow::chaos {

/// Three-term recurrence pi_{a+1} = (x - gamma_a) pi_a - kappa_a pi_{a-1}
/// for monic orthogonal polynomials, with kappa_0 = 1 (total mass).
/// Holds gamma_0..gamma_p and kappa_0..kappa_p.
struct Recurrence {
  std::vector<double> gamma;
  std::vector<double> kappa;

  int degree() const { return static_cast<int>(gamma.size()) - 1; }
};

Recurrence build_recurrence(const Distribution& dist, int p);

/// Discretized Stieltjes procedure on a uniform trapezoid grid over [lo, hi].
Recurrence stieltjes_recurrence(const std::function<double(double)>& density, double lo, double hi,
                                int p, int grid_points = 2000);

/// phi_alpha(x) = pi_alpha(x) / sqrt(kappa_0 ... kappa_alpha); throws DegreeOutOfRange.
double orthonormal_eval(const Recurrence& rec, int alpha, double x);

/// phi_0(x) .. phi_p(x) in one pass of the recurrence.
std::vector<double> orthonormal_eval_all(const Recurrence& rec, double x);

struct QuadratureRule1D {
  std::vector<double> nodes;   // strictly increasing
  std::vector<double> weights; // positive, sum to 1

  int order() const { return static_cast<int>(nodes.size()); }
};

/// Eigen-decomposition of a symmetric tridiagonal matrix by implicit-shift QL.
/// `diag` has n entries, `offdiag` n-1. Eigenvalues come back ascending with
/// the first component of each unit eigenvector.
struct TridiagonalEigen {
  std::vector<double> values;
  std::vector<double> first_components;
};
TridiagonalEigen tridiagonal_eigen(std::vector<double> diag, std::vector<double> offdiag,
                                   int max_sweeps = 60);

/// m-point Gauss rule via Golub-Welsch; needs rec.degree() >= m - 1.
QuadratureRule1D gauss_rule(const Recurrence& rec, int m);

/// Per-parameter recurrences, rules and evaluators for a product measure.
class BasisFamily {
public:
  struct Parameter {
    Distribution distribution;
    Recurrence recurrence; // depth max(p, m - 1)
    QuadratureRule1D rule;
  };

  BasisFamily(const std::vector<Distribution>& distributions, int degree, int points);

  std::size_t dimension() const { return params_.size(); }
  int degree() const { return degree_; }
  int points() const { return points_; }
  const Parameter& parameter(std::size_t k) const { return params_.at(k); }
  const QuadratureRule1D& rule(std::size_t k) const { return params_.at(k).rule; }

  /// phi_{k,alpha}(x); throws DegreeOutOfRange when alpha > degree().
  double orthonormal_eval(std::size_t k, int alpha, double x) const;

  /// Physical quadrature node xi_k^{i} for a 0-based node index.
  double node(std::size_t k, int i) const { return params_.at(k).rule.nodes.at(static_cast<std::size_t>(i)); }
  double weight(std::size_t k, int i) const {
    return params_.at(k).rule.weights.at(static_cast<std::size_t>(i));
  }

private:
  std::vector<Parameter> params_;
  int degree_;
  int points_;
};

using MultiIndex = std::vector<int>;

/// All alpha in N^d with |alpha| <= p in graded lexicographic order: by total
/// degree, then by descending exponent from the first coordinate onward, so
/// d = 2, p = 1 gives (0,0), (1,0), (0,1).
class MultiIndexSet {
public:
  MultiIndexSet() = default;
  MultiIndexSet(int dimension, int degree, std::vector<MultiIndex> indices)
      : dimension_(dimension), degree_(degree), indices_(std::move(indices)) {}

  int dimension() const { return dimension_; }
  int degree() const { return degree_; }
  std::size_t size() const { return indices_.size(); }
  const MultiIndex& operator[](std::size_t i) const { return indices_[i]; }
  auto begin() const { return indices_.begin(); }
  auto end() const { return indices_.end(); }

private:
  int dimension_ = 0;
  int degree_ = 0;
  std::vector<MultiIndex> indices_;
};

/// K = (p + d)! / (p! d!), exact; throws IndexOverflow past 2^63.
std::uint64_t basis_count(int d, int p);

MultiIndexSet enumerate_indices(int d, int p, std::uint64_t cap = 1'000'000);

/// "1-0-2" style label used by coefficient exports.
std::string index_label(const MultiIndex& alpha);

} // namespace stochflow::chaos

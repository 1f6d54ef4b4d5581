#pragma once

#include "stochflow/chaos.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace stochflow::tensor {

/// Grid multi-index i = (i_1, ..., i_d). Stored 0-based; every file format
/// writes the 1-based form.
using MultiIndex = std::vector<int>;

/// Rank-r canonical polyadic tensor: sum_j u_j^(1) o ... o u_j^(d), with
/// U^(k) an m x r matrix whose column j is u_j^(k).
class CpTensor {
public:
  CpTensor() = default;
  explicit CpTensor(std::vector<Eigen::MatrixXd> factors);

  static CpTensor zeros(int d, int m, int r);
  /// Entries i.i.d. uniform on [-scale, scale].
  static CpTensor random(int d, int m, int r, double scale, std::mt19937_64& rng);
  /// Rank r1 + r2 tensor representing a + b.
  static CpTensor concat(const CpTensor& a, const CpTensor& b);

  int modes() const { return static_cast<int>(factors_.size()); }
  int size() const { return factors_.empty() ? 0 : static_cast<int>(factors_[0].rows()); }
  int rank() const { return factors_.empty() ? 0 : static_cast<int>(factors_[0].cols()); }

  const Eigen::MatrixXd& factor(int k) const { return factors_.at(static_cast<std::size_t>(k)); }
  Eigen::MatrixXd& factor(int k) { return factors_.at(static_cast<std::size_t>(k)); }
  const std::vector<Eigen::MatrixXd>& factors() const { return factors_; }

  /// Sum over modes of squared factor Frobenius norms.
  double factor_norm_squared() const;

private:
  std::vector<Eigen::MatrixXd> factors_;
};

/// G-hat(i) = sum_j prod_k U^(k)(i_k, j); throws IndexOutOfRange.
double cp_eval(const CpTensor& t, std::span<const int> index);

/// w_{alpha}^{(k)}(i) = phi_{k,alpha}(xi_k^i) w_k^i for alpha = 0..p.
class WeightVectors {
public:
  explicit WeightVectors(const chaos::BasisFamily& basis);

  std::size_t dimension() const { return w_.size(); }
  int degree() const { return degree_; }
  int points() const { return points_; }
  const Eigen::VectorXd& operator()(std::size_t k, int alpha) const {
    return w_[k][static_cast<std::size_t>(alpha)];
  }

private:
  std::vector<std::vector<Eigen::VectorXd>> w_;
  int degree_;
  int points_;
};

/// Observed entries over Omega plus an optional disjoint holdout Omega'.
struct SampleSet {
  int d = 0;
  int m = 0;
  std::vector<MultiIndex> omega;
  std::vector<double> values;
  std::vector<MultiIndex> holdout;
  std::vector<double> holdout_values;
  std::vector<double> holdout_weights; // w_i = prod_k w_k^{i_k}

  /// Checks shape consistency, index ranges, distinctness and disjointness.
  void validate() const;
};

/// 1/2 * sum_{i in Omega} (G-hat(i) - G(i))^2.
double project_residual(const CpTensor& t, const SampleSet& samples);

/// <G-hat, W_alpha> = sum_j prod_k <u_j^(k), w_{alpha_k}^(k)>, O(r d m).
double cp_inner_weight(const CpTensor& t, const WeightVectors& wv, std::span<const int> alpha);

/// Per-mode inner products P_k(a, j) = <u_j^(k), w_a^(k)>, a = 0..p.
std::vector<Eigen::MatrixXd> weight_projections(const CpTensor& t, const WeightVectors& wv);

/// c_alpha for every alpha of `indices`, in order, sharing one projection table.
Eigen::VectorXd all_coefficients(const CpTensor& t, const WeightVectors& wv,
                                 const chaos::MultiIndexSet& indices);

/// Composite quadrature weight prod_k w_k^{i_k}.
double composite_weight(const chaos::BasisFamily& basis, std::span<const int> index);

struct IndexDraw {
  std::vector<MultiIndex> omega;
  std::vector<MultiIndex> holdout;
};

/// `count` distinct indices drawn uniformly without replacement from [0, m)^d,
/// then `holdout` more disjoint from them. Throws CountTooLarge.
IndexDraw sample_omega(int d, int m, std::uint64_t count, std::uint64_t seed, std::uint64_t holdout = 0);

/// log10(m^d), computed without forming m^d.
double log10_grid_size(int d, int m);

nlohmann::json to_json(const CpTensor& t);
CpTensor cp_from_json(const nlohmann::json& doc);

/// Dense helpers for oracles; refuse grids larger than `cap` entries.
namespace dense {

inline constexpr std::uint64_t default_cap = 1'000'000;

/// Entries in row-major multi-index order (last mode fastest).
std::vector<double> materialize(const CpTensor& t, std::uint64_t cap = default_cap);
/// Rank-1 W_alpha in the same layout.
std::vector<double> weight_tensor(const WeightVectors& wv, std::span<const int> alpha,
                                  std::uint64_t cap = default_cap);
/// Linear position of a 0-based multi-index in the dense layout.
std::uint64_t linear_index(std::span<const int> index, int m);
MultiIndex unravel(std::uint64_t linear, int d, int m);

} // namespace dense

} // namespace stochflow::tensor

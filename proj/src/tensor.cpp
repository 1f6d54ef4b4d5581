#include "stochflow/tensor.hpp"

#include "stochflow/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>

namespace stochflow::tensor {

using Eigen::MatrixXd;
using Eigen::VectorXd;

CpTensor::CpTensor(std::vector<MatrixXd> factors) : factors_(std::move(factors)) {
  for (const MatrixXd& f : factors_) {
    if (f.rows() != factors_.front().rows() || f.cols() != factors_.front().cols())
      throw DimensionMismatch("CP factors must all be m x r");
  }
}

CpTensor CpTensor::zeros(int d, int m, int r) {
  return CpTensor(std::vector<MatrixXd>(static_cast<std::size_t>(d), MatrixXd::Zero(m, r)));
}

CpTensor CpTensor::random(int d, int m, int r, double scale, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  std::vector<MatrixXd> f(static_cast<std::size_t>(d), MatrixXd(m, r));
  for (MatrixXd& u : f)
    for (Eigen::Index j = 0; j < u.cols(); ++j)
      for (Eigen::Index i = 0; i < u.rows(); ++i) u(i, j) = dist(rng);
  return CpTensor(std::move(f));
}

CpTensor CpTensor::concat(const CpTensor& a, const CpTensor& b) {
  if (a.modes() != b.modes() || a.size() != b.size())
    throw DimensionMismatch("concatenated CP tensors must share modes and sizes");
  std::vector<MatrixXd> f;
  for (int k = 0; k < a.modes(); ++k) {
    MatrixXd u(a.size(), a.rank() + b.rank());
    u << a.factor(k), b.factor(k);
    f.push_back(std::move(u));
  }
  return CpTensor(std::move(f));
}

double CpTensor::factor_norm_squared() const {
  double s = 0.0;
  for (const MatrixXd& f : factors_) s += f.squaredNorm();
  return s;
}

double cp_eval(const CpTensor& t, std::span<const int> index) {
  if (static_cast<int>(index.size()) != t.modes())
    throw IndexOutOfRange("index has " + std::to_string(index.size()) + " modes, tensor has " +
                          std::to_string(t.modes()));
  const int m = t.size();
  for (int i : index)
    if (i < 0 || i >= m) throw IndexOutOfRange("index entry " + std::to_string(i) + " outside [0, m)");
  double total = 0.0;
  for (int j = 0; j < t.rank(); ++j) {
    double prod = 1.0;
    for (int k = 0; k < t.modes(); ++k) prod *= t.factor(k)(index[static_cast<std::size_t>(k)], j);
    total += prod;
  }
  return total;
}

WeightVectors::WeightVectors(const chaos::BasisFamily& basis)
    : degree_(basis.degree()), points_(basis.points()) {
  w_.resize(basis.dimension());
  for (std::size_t k = 0; k < basis.dimension(); ++k) {
    const chaos::QuadratureRule1D& rule = basis.rule(k);
    w_[k].assign(static_cast<std::size_t>(degree_) + 1, VectorXd(points_));
    for (int i = 0; i < points_; ++i) {
      const auto phi = chaos::orthonormal_eval_all(basis.parameter(k).recurrence, rule.nodes[static_cast<std::size_t>(i)]);
      for (int a = 0; a <= degree_; ++a)
        w_[k][static_cast<std::size_t>(a)](i) = phi[static_cast<std::size_t>(a)] * rule.weights[static_cast<std::size_t>(i)];
    }
  }
}

void SampleSet::validate() const {
  if (values.size() != omega.size()) throw DimensionMismatch("omega and values differ in length");
  if (holdout_values.size() != holdout.size() || holdout_weights.size() != holdout.size())
    throw DimensionMismatch("holdout indices, values and weights differ in length");
  std::set<MultiIndex> seen;
  auto check = [&](const MultiIndex& i, const char* which) {
    if (static_cast<int>(i.size()) != d) throw IndexOutOfRange(std::string(which) + " index has wrong arity");
    for (int v : i)
      if (v < 0 || v >= m) throw IndexOutOfRange(std::string(which) + " index entry outside the grid");
    if (!seen.insert(i).second) throw ValidationError(std::string(which) + " index repeated or not disjoint");
  };
  for (const auto& i : omega) check(i, "omega");
  for (const auto& i : holdout) check(i, "holdout");
}

double project_residual(const CpTensor& t, const SampleSet& samples) {
  double s = 0.0;
  for (std::size_t n = 0; n < samples.omega.size(); ++n) {
    const double diff = cp_eval(t, samples.omega[n]) - samples.values[n];
    s += diff * diff;
  }
  return 0.5 * s;
}

std::vector<MatrixXd> weight_projections(const CpTensor& t, const WeightVectors& wv) {
  if (static_cast<int>(wv.dimension()) != t.modes() || wv.points() != t.size())
    throw DimensionMismatch("weight vectors do not match the tensor shape");
  std::vector<MatrixXd> proj(static_cast<std::size_t>(t.modes()));
  for (int k = 0; k < t.modes(); ++k) {
    MatrixXd& pk = proj[static_cast<std::size_t>(k)];
    pk.resize(wv.degree() + 1, t.rank());
    for (int a = 0; a <= wv.degree(); ++a)
      pk.row(a) = wv(static_cast<std::size_t>(k), a).transpose() * t.factor(k);
  }
  return proj;
}

double cp_inner_weight(const CpTensor& t, const WeightVectors& wv, std::span<const int> alpha) {
  if (static_cast<int>(alpha.size()) != t.modes())
    throw DimensionMismatch("alpha has the wrong number of modes");
  if (static_cast<int>(wv.dimension()) != t.modes() || wv.points() != t.size())
    throw DimensionMismatch("weight vectors do not match the tensor shape");
  for (int a : alpha)
    if (a < 0 || a > wv.degree()) throw DegreeOutOfRange("alpha entry exceeds the basis degree");
  double total = 0.0;
  for (int j = 0; j < t.rank(); ++j) {
    double prod = 1.0;
    for (int k = 0; k < t.modes(); ++k)
      prod *= t.factor(k).col(j).dot(wv(static_cast<std::size_t>(k), alpha[static_cast<std::size_t>(k)]));
    total += prod;
  }
  return total;
}

VectorXd all_coefficients(const CpTensor& t, const WeightVectors& wv, const chaos::MultiIndexSet& indices) {
  const auto proj = weight_projections(t, wv);
  VectorXd c(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t n = 0; n < indices.size(); ++n) {
    const auto& alpha = indices[n];
    double total = 0.0;
    for (int j = 0; j < t.rank(); ++j) {
      double prod = 1.0;
      for (int k = 0; k < t.modes(); ++k) prod *= proj[static_cast<std::size_t>(k)](alpha[static_cast<std::size_t>(k)], j);
      total += prod;
    }
    c(static_cast<Eigen::Index>(n)) = total;
  }
  return c;
}

double composite_weight(const chaos::BasisFamily& basis, std::span<const int> index) {
  double w = 1.0;
  for (std::size_t k = 0; k < index.size(); ++k) w *= basis.weight(k, index[k]);
  return w;
}

double log10_grid_size(int d, int m) { return d * std::log10(static_cast<double>(m)); }

namespace {

// m^d when it fits in 63 bits.
std::optional<std::uint64_t> grid_size(int d, int m) {
  std::uint64_t total = 1;
  for (int k = 0; k < d; ++k) {
    if (total > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()) / static_cast<std::uint64_t>(m))
      return std::nullopt;
    total *= static_cast<std::uint64_t>(m);
  }
  return total;
}

} // namespace

IndexDraw sample_omega(int d, int m, std::uint64_t count, std::uint64_t seed, std::uint64_t holdout) {
  if (d < 1 || m < 1) throw ValidationError("sample_omega needs d >= 1 and m >= 1");
  if (count < 1) throw CountTooLarge("sample count must be at least 1");
  const std::uint64_t wanted = count + holdout;
  const auto total = grid_size(d, m);
  if (total && wanted > *total)
    throw CountTooLarge(std::to_string(wanted) + " indices requested from a grid of " + std::to_string(*total));

  std::mt19937_64 rng(seed);
  std::vector<MultiIndex> drawn;
  drawn.reserve(static_cast<std::size_t>(wanted));

  if (total) {
    // Floyd's algorithm on linear positions, then a shuffle for random order.
    std::unordered_set<std::uint64_t> chosen;
    std::vector<std::uint64_t> order;
    for (std::uint64_t j = *total - wanted; j < *total; ++j) {
      const std::uint64_t t = std::uniform_int_distribution<std::uint64_t>(0, j)(rng);
      const std::uint64_t pick = chosen.insert(t).second ? t : j;
      if (pick == j) chosen.insert(j);
      order.push_back(pick);
    }
    std::shuffle(order.begin(), order.end(), rng);
    for (std::uint64_t lin : order) drawn.push_back(dense::unravel(lin, d, m));
  } else {
    // Grid too large to enumerate; rejection on coordinates is still uniform.
    std::set<MultiIndex> seen;
    std::uniform_int_distribution<int> coord(0, m - 1);
    while (drawn.size() < wanted) {
      MultiIndex i(static_cast<std::size_t>(d));
      for (int& v : i) v = coord(rng);
      if (seen.insert(i).second) drawn.push_back(std::move(i));
    }
  }

  IndexDraw out;
  out.omega.assign(drawn.begin(), drawn.begin() + static_cast<std::ptrdiff_t>(count));
  out.holdout.assign(drawn.begin() + static_cast<std::ptrdiff_t>(count), drawn.end());
  return out;
}

nlohmann::json to_json(const CpTensor& t) {
  nlohmann::json factors = nlohmann::json::array();
  for (const MatrixXd& f : t.factors())
    factors.push_back(std::vector<double>(f.data(), f.data() + f.size())); // Eigen is column-major
  return {{"d", t.modes()}, {"m", t.size()}, {"r", t.rank()}, {"factors", std::move(factors)}};
}

CpTensor cp_from_json(const nlohmann::json& doc) {
  try {
    const int d = doc.at("d").get<int>();
    const int m = doc.at("m").get<int>();
    const int r = doc.at("r").get<int>();
    const auto& jf = doc.at("factors");
    if (static_cast<int>(jf.size()) != d) throw ParseError("factor count does not match d");
    std::vector<MatrixXd> f;
    for (const auto& col_major : jf) {
      const auto v = col_major.get<std::vector<double>>();
      if (static_cast<int>(v.size()) != m * r) throw ParseError("factor size does not match m * r");
      f.push_back(Eigen::Map<const MatrixXd>(v.data(), m, r));
    }
    return CpTensor(std::move(f));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(e.what());
  }
}

namespace dense {

std::uint64_t linear_index(std::span<const int> index, int m) {
  std::uint64_t lin = 0;
  for (int i : index) lin = lin * static_cast<std::uint64_t>(m) + static_cast<std::uint64_t>(i);
  return lin;
}

MultiIndex unravel(std::uint64_t linear, int d, int m) {
  MultiIndex i(static_cast<std::size_t>(d));
  for (int k = d - 1; k >= 0; --k) {
    i[static_cast<std::size_t>(k)] = static_cast<int>(linear % static_cast<std::uint64_t>(m));
    linear /= static_cast<std::uint64_t>(m);
  }
  return i;
}

namespace {

std::uint64_t checked_size(int d, int m, std::uint64_t cap) {
  const auto total = grid_size(d, m);
  if (!total || *total > cap) throw CountTooLarge("dense materialization exceeds the size cap");
  return *total;
}

} // namespace

std::vector<double> materialize(const CpTensor& t, std::uint64_t cap) {
  const std::uint64_t total = checked_size(t.modes(), t.size(), cap);
  std::vector<double> out(static_cast<std::size_t>(total));
  for (std::uint64_t lin = 0; lin < total; ++lin) out[lin] = cp_eval(t, unravel(lin, t.modes(), t.size()));
  return out;
}

std::vector<double> weight_tensor(const WeightVectors& wv, std::span<const int> alpha, std::uint64_t cap) {
  const int d = static_cast<int>(wv.dimension());
  const std::uint64_t total = checked_size(d, wv.points(), cap);
  std::vector<double> out(static_cast<std::size_t>(total));
  for (std::uint64_t lin = 0; lin < total; ++lin) {
    const MultiIndex i = unravel(lin, d, wv.points());
    double w = 1.0;
    for (int k = 0; k < d; ++k) w *= wv(static_cast<std::size_t>(k), alpha[static_cast<std::size_t>(k)])(i[static_cast<std::size_t>(k)]);
    out[lin] = w;
  }
  return out;
}

} // namespace dense

} // namespace stochflow::tensor

#include "doctest.h"

#include "stochflow/error.hpp"
#include "stochflow/tensor.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <set>

using namespace stochflow;
using tensor::CpTensor;
using tensor::MultiIndex;

namespace {

chaos::BasisFamily gaussian_basis(int d, int p, int m) {
  return chaos::BasisFamily(std::vector<Distribution>(static_cast<std::size_t>(d), Distribution::gaussian()), p, m);
}

// Every multi-index of [0, m)^d in dense layout order.
std::vector<MultiIndex> all_indices(int d, int m) {
  std::vector<MultiIndex> out;
  MultiIndex i(static_cast<std::size_t>(d), 0);
  while (true) {
    out.push_back(i);
    int k = d - 1;
    while (k >= 0 && ++i[static_cast<std::size_t>(k)] == m) i[static_cast<std::size_t>(k--)] = 0;
    if (k < 0) return out;
  }
}

// Entry by explicit nested products, independent of cp_eval.
double brute_entry(const CpTensor& t, const MultiIndex& i) {
  double s = 0.0;
  for (int j = 0; j < t.rank(); ++j) {
    double prod = 1.0;
    for (int k = 0; k < t.modes(); ++k) prod *= t.factor(k)(i[static_cast<std::size_t>(k)], j);
    s += prod;
  }
  return s;
}

} // namespace

TEST_CASE("cp_eval examples") {
  Eigen::MatrixXd u(2, 1), v(2, 1);
  u << 1, 2;
  v << 3, 4;
  const CpTensor t({u, v});
  CHECK(tensor::cp_eval(t, std::vector<int>{1, 0}) == 6.0);
  CHECK(tensor::cp_eval(t, std::vector<int>{1, 1}) == 8.0);
  CHECK_THROWS_AS(tensor::cp_eval(t, std::vector<int>{2, 0}), IndexOutOfRange);
  CHECK_THROWS_AS(tensor::cp_eval(t, std::vector<int>{0}), IndexOutOfRange);

  std::mt19937_64 rng(3);
  CpTensor z = CpTensor::random(3, 2, 2, 1.0, rng);
  const CpTensor first({z.factor(0).leftCols(1), z.factor(1).leftCols(1), z.factor(2).leftCols(1)});
  z.factor(1).col(1).setZero();
  for (const auto& i : all_indices(3, 2)) CHECK(tensor::cp_eval(z, i) == doctest::Approx(tensor::cp_eval(first, i)));
}

TEST_CASE("cp_eval matches dense materialization") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const CpTensor t = CpTensor::random(3, 2 + trial % 3, 2, 1.0, rng);
    const auto dense = tensor::dense::materialize(t);
    const auto idx = all_indices(3, t.size());
    REQUIRE(dense.size() == idx.size());
    for (std::size_t n = 0; n < idx.size(); ++n) {
      CHECK(tensor::dense::linear_index(idx[n], t.size()) == n);
      CHECK(tensor::dense::unravel(n, 3, t.size()) == idx[n]);
      CHECK(std::abs(tensor::cp_eval(t, idx[n]) - brute_entry(t, idx[n])) < 1e-14);
      CHECK(std::abs(dense[n] - brute_entry(t, idx[n])) < 1e-14);
    }
  }
  std::mt19937_64 big(1);
  CHECK_THROWS_AS(tensor::dense::materialize(CpTensor::random(7, 8, 1, 1.0, big)), CountTooLarge);
}

TEST_CASE("property: cp_eval is linear under factor concatenation") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 1 + trial % 4, m = 1 + trial % 5;
    const CpTensor a = CpTensor::random(d, m, 1 + trial % 3, 1.0, rng);
    const CpTensor b = CpTensor::random(d, m, 1 + (trial / 3) % 3, 2.0, rng);
    const CpTensor s = CpTensor::concat(a, b);
    CHECK(s.rank() == a.rank() + b.rank());
    for (const auto& i : all_indices(d, m))
      CHECK(std::abs(tensor::cp_eval(s, i) - tensor::cp_eval(a, i) - tensor::cp_eval(b, i)) < 1e-12);
  }
  std::mt19937_64 r2(2);
  CHECK_THROWS_AS(CpTensor::concat(CpTensor::random(2, 2, 1, 1, r2), CpTensor::random(2, 3, 1, 1, r2)),
                  DimensionMismatch);
}

TEST_CASE("property: rank-1 Frobenius norm is the product of factor norms") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 1 + trial % 4, m = 2 + trial % 4;
    const CpTensor t = CpTensor::random(d, m, 1, 1.5, rng);
    const auto dense = tensor::dense::materialize(t);
    const double fro = std::sqrt(std::inner_product(dense.begin(), dense.end(), dense.begin(), 0.0));
    double prod = 1.0;
    for (int k = 0; k < d; ++k) prod *= t.factor(k).norm();
    CHECK(fro == doctest::Approx(prod).epsilon(1e-12));
  }
}

TEST_CASE("weight vectors") {
  const chaos::BasisFamily basis({Distribution::gaussian(), Distribution::uniform()}, 2, 3);
  const tensor::WeightVectors wv(basis);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(wv(k, 0).sum() == doctest::Approx(1.0).epsilon(1e-13));
    // w_a . phi_b(nodes) = delta_ab by exactness of the rule
    for (int a = 0; a <= 2; ++a) {
      CHECK(wv(k, a).size() == 3);
      for (int b = 0; b <= 2; ++b) {
        double s = 0.0;
        for (int i = 0; i < 3; ++i) s += wv(k, a)(i) * basis.orthonormal_eval(k, b, basis.rule(k).nodes[i]);
        CHECK(std::abs(s - (a == b ? 1.0 : 0.0)) < 1e-10);
      }
    }
  }
}

TEST_CASE("cp_inner_weight examples") {
  const auto basis = gaussian_basis(2, 2, 2);
  const tensor::WeightVectors wv(basis);
  const CpTensor ones({Eigen::MatrixXd::Ones(2, 1), Eigen::MatrixXd::Ones(2, 1)});
  CHECK(tensor::cp_inner_weight(ones, wv, std::vector<int>{0, 0}) == doctest::Approx(1.0));

  Eigen::MatrixXd u(2, 1), v(2, 1);
  u << 0.5, -1.5;
  v << 2.0, 0.25;
  const CpTensor t({u, v});
  const double hand = (u(0) * wv(0, 1)(0) + u(1) * wv(0, 1)(1)) * (v(0) * wv(1, 0)(0) + v(1) * wv(1, 0)(1));
  CHECK(tensor::cp_inner_weight(t, wv, std::vector<int>{1, 0}) == doctest::Approx(hand));
  CHECK_THROWS_AS(tensor::cp_inner_weight(t, wv, std::vector<int>{3, 0}), DegreeOutOfRange);
  CHECK_THROWS_AS(tensor::cp_inner_weight(t, wv, std::vector<int>{0}), DimensionMismatch);
}

TEST_CASE("property: cp_inner_weight equals the dense inner product with W_alpha") {
  std::mt19937_64 rng(17);
  for (const auto& [d, m, p, r] : std::vector<std::tuple<int, int, int, int>>{
           {3, 4, 3, 3}, {2, 5, 4, 2}, {4, 3, 2, 2}, {1, 6, 5, 1}, {5, 4, 2, 3}}) {
    const auto basis = gaussian_basis(d, p, m);
    const tensor::WeightVectors wv(basis);
    const CpTensor t = CpTensor::random(d, m, r, 1.0, rng);
    const auto g = tensor::dense::materialize(t);
    const auto idx = chaos::enumerate_indices(d, p);
    const Eigen::VectorXd all = tensor::all_coefficients(t, wv, idx);
    REQUIRE(static_cast<std::size_t>(all.size()) == idx.size());
    for (std::size_t n = 0; n < idx.size(); ++n) {
      const auto w = tensor::dense::weight_tensor(wv, idx[n]);
      // W_alpha entries built directly from the product of per-mode weights
      double dot = 0.0;
      const auto grid = all_indices(d, m);
      for (std::size_t e = 0; e < grid.size(); ++e) {
        double we = 1.0;
        for (int k = 0; k < d; ++k) we *= wv(static_cast<std::size_t>(k), idx[n][static_cast<std::size_t>(k)])(grid[e][static_cast<std::size_t>(k)]);
        CHECK(std::abs(w[e] - we) < 1e-15);
        dot += g[e] * we;
      }
      const double c = tensor::cp_inner_weight(t, wv, idx[n]);
      CHECK(std::abs(c - dot) < 1e-12 * std::max(1.0, std::abs(dot)));
      CHECK(std::abs(all(static_cast<Eigen::Index>(n)) - c) < 1e-13 * std::max(1.0, std::abs(c)));
    }
  }
}

TEST_CASE("project_residual") {
  Eigen::MatrixXd u(1, 1);
  u << 2.0;
  const CpTensor t({u});
  tensor::SampleSet s;
  s.d = 1;
  s.m = 1;
  s.omega = {{0}};
  s.values = {0.0};
  CHECK(tensor::project_residual(t, s) == 2.0);
  s.values = {2.0};
  CHECK(tensor::project_residual(t, s) == 0.0);

  std::mt19937_64 rng(4);
  const CpTensor r = CpTensor::random(3, 3, 2, 1.0, rng);
  const auto draw = tensor::sample_omega(3, 3, 10, 9);
  tensor::SampleSet rs{3, 3, draw.omega, {}, {}, {}, {}};
  std::normal_distribution<double> g;
  double oracle = 0.0;
  for (const auto& i : rs.omega) {
    rs.values.push_back(g(rng));
    const double diff = brute_entry(r, i) - rs.values.back();
    oracle += 0.5 * diff * diff;
  }
  CHECK(tensor::project_residual(r, rs) == doctest::Approx(oracle).epsilon(1e-13));
}

TEST_CASE("sample set validation") {
  tensor::SampleSet s{2, 3, {{0, 1}, {2, 2}}, {1.0, 2.0}, {}, {}, {}};
  CHECK_NOTHROW(s.validate());
  auto dup = s;
  dup.omega[1] = {0, 1};
  CHECK_THROWS_AS(dup.validate(), ValidationError);
  auto overlap = s;
  overlap.holdout = {{2, 2}};
  overlap.holdout_values = {1.0};
  overlap.holdout_weights = {1.0};
  CHECK_THROWS_AS(overlap.validate(), ValidationError);
  auto range = s;
  range.omega[0] = {0, 3};
  CHECK_THROWS_AS(range.validate(), IndexOutOfRange);
  auto arity = s;
  arity.omega[0] = {0};
  CHECK_THROWS_AS(arity.validate(), IndexOutOfRange);
  auto lengths = s;
  lengths.values.pop_back();
  CHECK_THROWS_AS(lengths.validate(), DimensionMismatch);
}

TEST_CASE("sample_omega") {
  const auto a = tensor::sample_omega(3, 4, 18, 5);
  CHECK(a.omega.size() == 18);
  CHECK(std::set<MultiIndex>(a.omega.begin(), a.omega.end()).size() == 18);
  const auto b = tensor::sample_omega(3, 4, 18, 5);
  CHECK(a.omega == b.omega);
  CHECK(tensor::sample_omega(3, 4, 18, 6).omega != a.omega);

  const auto full = tensor::sample_omega(2, 3, 9, 1);
  CHECK(std::set<MultiIndex>(full.omega.begin(), full.omega.end()).size() == 9);

  CHECK_THROWS_AS(tensor::sample_omega(2, 3, 10, 1), CountTooLarge);
  CHECK_THROWS_AS(tensor::sample_omega(2, 3, 5, 1, 5), CountTooLarge);
  CHECK_THROWS_AS(tensor::sample_omega(2, 3, 0, 1), CountTooLarge);

  // the 3^24 grid is far too large to enumerate
  const auto big = tensor::sample_omega(24, 3, 280, 7, 50);
  CHECK(big.omega.size() == 280);
  CHECK(big.holdout.size() == 50);
  std::set<MultiIndex> seen(big.omega.begin(), big.omega.end());
  for (const auto& i : big.holdout) CHECK(seen.insert(i).second);
  for (const auto& i : big.omega)
    for (int v : i) CHECK((v >= 0 && v < 3));
}

TEST_CASE("property: holdout is always disjoint and every draw is in range") {
  std::mt19937_64 gen(99);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + static_cast<int>(gen() % 4), m = 1 + static_cast<int>(gen() % 4);
    std::uint64_t total = 1;
    for (int k = 0; k < d; ++k) total *= static_cast<std::uint64_t>(m);
    const std::uint64_t count = 1 + gen() % total;
    const std::uint64_t hold = gen() % (total - count + 1);
    const auto draw = tensor::sample_omega(d, m, count, gen(), hold);
    CHECK(draw.omega.size() == count);
    CHECK(draw.holdout.size() == hold);
    std::set<MultiIndex> seen;
    for (const auto& v : {draw.omega, draw.holdout})
      for (const auto& i : v) {
        CHECK(seen.insert(i).second);
        CHECK(static_cast<int>(i.size()) == d);
        for (int x : i) CHECK((x >= 0 && x < m));
      }
  }
}

TEST_CASE("sample_omega is roughly uniform") {
  // each of the 16 cells is picked with probability 4/16 per draw
  std::vector<int> hits(16, 0);
  const int trials = 4000;
  for (int s = 0; s < trials; ++s)
    for (const auto& i : tensor::sample_omega(2, 4, 4, static_cast<std::uint64_t>(s)).omega)
      ++hits[static_cast<std::size_t>(tensor::dense::linear_index(i, 4))];
  for (int h : hits) CHECK(std::abs(h - trials / 4) < 5 * std::sqrt(trials * 0.25 * 0.75));
}

TEST_CASE("grid size and composite weights") {
  CHECK(tensor::log10_grid_size(3, 4) == doctest::Approx(std::log10(64.0)));
  CHECK(tensor::log10_grid_size(24, 3) == doctest::Approx(24 * std::log10(3.0)));
  const auto basis = gaussian_basis(2, 2, 3);
  CHECK(tensor::composite_weight(basis, std::vector<int>{1, 1}) == doctest::Approx(4.0 / 9.0));
  CHECK(tensor::composite_weight(basis, std::vector<int>{0, 2}) == doctest::Approx(1.0 / 36.0));
}

TEST_CASE("CP tensor JSON round trip") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const CpTensor t = CpTensor::random(1 + trial % 4, 2 + trial % 3, 1 + trial % 3, 1.0, rng);
    const auto j = tensor::to_json(t);
    CHECK(j.at("d") == t.modes());
    const CpTensor back = tensor::cp_from_json(nlohmann::json::parse(j.dump()));
    for (int k = 0; k < t.modes(); ++k) CHECK(back.factor(k) == t.factor(k));
  }
  Eigen::MatrixXd f(2, 2);
  f << 1, 2, 3, 4;
  const auto j = tensor::to_json(CpTensor({f}));
  CHECK(j.at("factors")[0] == std::vector<double>{1, 3, 2, 4});
  CHECK_THROWS_AS(tensor::cp_from_json({{"d", 1}, {"m", 2}, {"r", 2}, {"factors", {{1, 2, 3}}}}), ParseError);
  CHECK_THROWS_AS(tensor::cp_from_json({{"d", 1}}), ParseError);
}

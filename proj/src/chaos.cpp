#include "stochflow/chaos.hpp"

#include "stochflow/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace stochflow::chaos {

Recurrence stieltjes_recurrence(const std::function<double(double)>& density, double lo, double hi,
                                int p, int grid_points) {
  if (p < 0) throw DegreeOutOfRange("negative degree");
  if (!density || !(hi > lo) || grid_points < 2)
    throw UnsupportedDistribution("Stieltjes needs a density on a non-empty interval");

  const auto n = static_cast<std::size_t>(grid_points);
  const double h = (hi - lo) / static_cast<double>(n - 1);
  std::vector<double> x(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = lo + h * static_cast<double>(i);
    w[i] = h * density(x[i]) * ((i == 0 || i + 1 == n) ? 0.5 : 1.0);
  }
  const double mass = std::accumulate(w.begin(), w.end(), 0.0);
  if (!(mass > 0.0)) throw UnsupportedDistribution("density integrates to zero");
  for (double& wi : w) wi /= mass;

  Recurrence rec;
  std::vector<double> prev(n, 0.0), cur(n, 1.0), next(n);
  double norm_cur = 1.0;
  for (int a = 0; a <= p; ++a) {
    double xnorm = 0.0;
    for (std::size_t i = 0; i < n; ++i) xnorm += w[i] * x[i] * cur[i] * cur[i];
    rec.gamma.push_back(xnorm / norm_cur);
    if (a == 0) {
      rec.kappa.push_back(1.0);
    }
    if (a == p) break;
    const double kappa_a = rec.kappa.back();
    double norm_next = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] = (x[i] - rec.gamma.back()) * cur[i] - (a == 0 ? 0.0 : kappa_a * prev[i]);
      norm_next += w[i] * next[i] * next[i];
    }
    if (!(norm_next > 0.0))
      throw UnsupportedDistribution("measure supports fewer than " + std::to_string(a + 2) + " points");
    rec.kappa.push_back(norm_next / norm_cur);
    prev.swap(cur);
    cur.swap(next);
    norm_cur = norm_next;
  }
  return rec;
}

Recurrence build_recurrence(const Distribution& dist, int p) {
  if (p < 0) throw DegreeOutOfRange("negative degree");
  Recurrence rec;
  rec.gamma.assign(static_cast<std::size_t>(p) + 1, 0.0);
  rec.kappa.assign(static_cast<std::size_t>(p) + 1, 1.0);
  switch (dist.family) {
  case Family::Gaussian:
    // Probabilists' Hermite.
    for (int a = 1; a <= p; ++a) rec.kappa[static_cast<std::size_t>(a)] = a;
    return rec;
  case Family::Uniform:
    // Legendre for the uniform density 1/2 on [-1, 1].
    for (int a = 1; a <= p; ++a) {
      const double aa = static_cast<double>(a) * a;
      rec.kappa[static_cast<std::size_t>(a)] = aa / (4.0 * aa - 1.0);
    }
    return rec;
  case Family::Custom:
    return stieltjes_recurrence(dist.density, dist.support_lo, dist.support_hi, p);
  }
  throw UnsupportedDistribution("unknown family");
}

std::vector<double> orthonormal_eval_all(const Recurrence& rec, double x) {
  const int p = rec.degree();
  std::vector<double> phi(static_cast<std::size_t>(p) + 1);
  double prev = 0.0;
  double cur = 1.0;
  double norm = rec.kappa[0];
  phi[0] = cur / std::sqrt(norm);
  for (int a = 0; a < p; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    const double next = (x - rec.gamma[ua]) * cur - (a == 0 ? 0.0 : rec.kappa[ua] * prev);
    prev = cur;
    cur = next;
    norm *= rec.kappa[ua + 1];
    phi[ua + 1] = cur / std::sqrt(norm);
  }
  return phi;
}

double orthonormal_eval(const Recurrence& rec, int alpha, double x) {
  if (alpha < 0 || alpha > rec.degree())
    throw DegreeOutOfRange("degree " + std::to_string(alpha) + " outside 0.." + std::to_string(rec.degree()));
  double prev = 0.0;
  double cur = 1.0;
  double norm = rec.kappa[0];
  for (int a = 0; a < alpha; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    const double next = (x - rec.gamma[ua]) * cur - (a == 0 ? 0.0 : rec.kappa[ua] * prev);
    prev = cur;
    cur = next;
    norm *= rec.kappa[ua + 1];
  }
  return cur / std::sqrt(norm);
}

TridiagonalEigen tridiagonal_eigen(std::vector<double> d, std::vector<double> e, int max_sweeps) {
  const int n = static_cast<int>(d.size());
  if (n == 0) return {};
  if (static_cast<int>(e.size()) != n - 1) throw EigenFailure("off-diagonal must have n - 1 entries");
  e.push_back(0.0);
  std::vector<double> z(static_cast<std::size_t>(n), 0.0); // first row of Q
  z[0] = 1.0;
  constexpr double eps = std::numeric_limits<double>::epsilon();

  auto at = [](std::vector<double>& v, int i) -> double& { return v[static_cast<std::size_t>(i)]; };

  for (int l = 0; l < n; ++l) {
    int iter = 0;
    int m = l;
    do {
      for (m = l; m < n - 1; ++m) {
        const double dd = std::abs(at(d, m)) + std::abs(at(d, m + 1));
        if (std::abs(at(e, m)) <= eps * dd) break;
      }
      if (m == l) break;
      if (iter++ == max_sweeps) throw EigenFailure("QL iteration did not converge");

      double g = (at(d, l + 1) - at(d, l)) / (2.0 * at(e, l));
      double r = std::hypot(g, 1.0);
      g = at(d, m) - at(d, l) + at(e, l) / (g + std::copysign(r, g));
      double s = 1.0, c = 1.0, p = 0.0;
      int i = m - 1;
      bool deflated = false;
      for (; i >= l; --i) {
        const double f = s * at(e, i);
        const double b = c * at(e, i);
        r = std::hypot(f, g);
        at(e, i + 1) = r;
        if (r == 0.0) {
          at(d, i + 1) -= p;
          at(e, m) = 0.0;
          deflated = true;
          break;
        }
        s = f / r;
        c = g / r;
        g = at(d, i + 1) - p;
        r = (at(d, i) - g) * s + 2.0 * c * b;
        p = s * r;
        at(d, i + 1) = g + p;
        g = c * r - b;
        const double zf = at(z, i + 1);
        at(z, i + 1) = s * at(z, i) + c * zf;
        at(z, i) = c * at(z, i) - s * zf;
      }
      if (deflated) continue;
      at(d, l) -= p;
      at(e, l) = g;
      at(e, m) = 0.0;
    } while (m != l);
  }

  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
  TridiagonalEigen out;
  for (std::size_t k : order) {
    out.values.push_back(d[k]);
    out.first_components.push_back(z[k]);
  }
  return out;
}

QuadratureRule1D gauss_rule(const Recurrence& rec, int m) {
  if (m < 1) throw DegreeOutOfRange("a Gauss rule needs at least one point");
  if (rec.degree() < m - 1)
    throw DegreeOutOfRange("recurrence depth " + std::to_string(rec.degree()) + " too small for " +
                           std::to_string(m) + " points");
  std::vector<double> diag(rec.gamma.begin(), rec.gamma.begin() + m);
  std::vector<double> off;
  for (int i = 1; i < m; ++i) {
    const double k = rec.kappa[static_cast<std::size_t>(i)];
    if (!(k > 0.0)) throw EigenFailure("recurrence has non-positive kappa");
    off.push_back(std::sqrt(k));
  }
  const TridiagonalEigen eig = tridiagonal_eigen(std::move(diag), std::move(off));
  QuadratureRule1D rule;
  rule.nodes = eig.values;
  for (double q : eig.first_components) rule.weights.push_back(rec.kappa[0] * q * q);
  for (std::size_t i = 1; i < rule.nodes.size(); ++i)
    if (!(rule.nodes[i] > rule.nodes[i - 1])) throw EigenFailure("Gauss nodes are not distinct");
  return rule;
}

BasisFamily::BasisFamily(const std::vector<Distribution>& distributions, int degree, int points)
    : degree_(degree), points_(points) {
  if (degree < 0) throw DegreeOutOfRange("negative degree");
  if (points < 1) throw DegreeOutOfRange("need at least one quadrature point");
  const int depth = std::max(degree, points - 1);
  params_.reserve(distributions.size());
  for (const Distribution& dist : distributions) {
    Parameter par{dist, build_recurrence(dist, depth), {}};
    par.rule = gauss_rule(par.recurrence, points);
    params_.push_back(std::move(par));
  }
}

double BasisFamily::orthonormal_eval(std::size_t k, int alpha, double x) const {
  if (alpha < 0 || alpha > degree_)
    throw DegreeOutOfRange("degree " + std::to_string(alpha) + " above basis degree " + std::to_string(degree_));
  return chaos::orthonormal_eval(params_.at(k).recurrence, alpha, x);
}

std::uint64_t basis_count(int d, int p) {
  if (d < 1 || p < 0) throw DegreeOutOfRange("basis count needs d >= 1 and p >= 0");
  // C(d + i, i) built incrementally stays integral at every step.
  unsigned __int128 k = 1;
  for (int i = 1; i <= p; ++i) {
    k = k * static_cast<unsigned>(d + i) / static_cast<unsigned>(i);
    if (k > static_cast<unsigned __int128>(std::numeric_limits<std::int64_t>::max()))
      throw IndexOverflow("basis count overflows 64 bits");
  }
  return static_cast<std::uint64_t>(k);
}

namespace {

void fill_degree(int remaining, std::size_t pos, MultiIndex& cur, std::vector<MultiIndex>& out) {
  if (pos + 1 == cur.size()) {
    cur[pos] = remaining;
    out.push_back(cur);
    return;
  }
  for (int a = remaining; a >= 0; --a) {
    cur[pos] = a;
    fill_degree(remaining - a, pos + 1, cur, out);
  }
  cur[pos] = 0;
}

} // namespace

MultiIndexSet enumerate_indices(int d, int p, std::uint64_t cap) {
  const std::uint64_t k = basis_count(d, p);
  if (k > cap)
    throw IndexOverflow(std::to_string(k) + " basis functions exceed the cap of " + std::to_string(cap));
  std::vector<MultiIndex> out;
  out.reserve(static_cast<std::size_t>(k));
  MultiIndex cur(static_cast<std::size_t>(d), 0);
  for (int t = 0; t <= p; ++t) fill_degree(t, 0, cur, out);
  return MultiIndexSet(d, p, std::move(out));
}

std::string index_label(const MultiIndex& alpha) {
  std::string s;
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    if (k) s += '-';
    s += std::to_string(alpha[k]);
  }
  return s;
}

} // namespace stochflow::chaos

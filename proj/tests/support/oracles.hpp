#pragma once

// Dense, deliberately naive reference implementations used by the unit and
// acceptance tests. Nothing here shares code with the library beyond types.

#include "mardp/graph.hpp"
#include "mardp/likelihood.hpp"
#include "mardp/sampler.hpp"

#include <Eigen/Dense>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace oracle {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Q = (I - B)^T Lambda (I - B) with B and Lambda written out entry by entry.
inline Eigen::MatrixXd dagar_Q(const mardp::RegionGraph& g, const std::vector<int>& order, double rho) {
  const int n = g.n_regions();
  std::vector<int> pos(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) pos[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = k;
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n), L = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    int before = 0;
    for (int j = 0; j < n; ++j)
      if (g.adjacent(i, j) && pos[static_cast<std::size_t>(j)] < pos[static_cast<std::size_t>(i)]) ++before;
    const double b = rho / (1.0 + (before - 1) * rho * rho);
    for (int j = 0; j < n; ++j)
      if (g.adjacent(i, j) && pos[static_cast<std::size_t>(j)] < pos[static_cast<std::size_t>(i)]) B(i, j) = b;
    L(i, i) = (1.0 + (before - 1) * rho * rho) / (1.0 - rho * rho);
  }
  const Eigen::MatrixXd IB = Eigen::MatrixXd::Identity(n, n) - B;
  return IB.transpose() * L * IB;
}

inline Eigen::MatrixXd car_Q(const mardp::RegionGraph& g, double rho) {
  const int n = g.n_regions();
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) Q(i, i) = g.degree(i);
      else if (g.adjacent(i, j)) Q(i, j) = -rho;
    }
  return Q;
}

inline Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// (A kron I) blockdiag(Q_d^{-1}) (A kron I)^T.
inline Eigen::MatrixXd sigma(const std::vector<Eigen::MatrixXd>& Qs, const Eigen::MatrixXd& A) {
  const auto n = Qs.front().rows();
  const auto q = static_cast<Eigen::Index>(Qs.size());
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n * q, n * q);
  for (Eigen::Index d = 0; d < q; ++d) D.block(d * n, d * n, n, n) = Qs[static_cast<std::size_t>(d)].inverse();
  const Eigen::MatrixXd AI = kron(A, Eigen::MatrixXd::Identity(n, n));
  return AI * D * AI.transpose();
}

inline Eigen::VectorXd stick_probs(const Eigen::VectorXd& V) {
  Eigen::VectorXd p(V.size());
  for (Eigen::Index k = 0; k < V.size(); ++k) {
    double rest = 1.0;
    for (Eigen::Index j = 0; j < k; ++j) rest *= 1.0 - V(j);
    p(k) = V(k) * rest;
  }
  return p;
}

/// Linear scan: first j with F <= p_0 + ... + p_j.
inline int label_of(double F, const Eigen::VectorXd& p) {
  double c = 0.0;
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    c += p(j);
    if (j == p.size() - 1 || F <= c) return static_cast<int>(j);
  }
  return static_cast<int>(p.size() - 1);
}

/// log |d vech(A A^T) / d vech(A)| by central finite differences.
inline double log_jacobian_fd(const Eigen::MatrixXd& A, double h = 1e-6) {
  const auto q = A.rows();
  std::vector<std::pair<int, int>> idx;
  for (int i = 0; i < q; ++i)
    for (int j = 0; j <= i; ++j) idx.emplace_back(i, j);
  const auto m = static_cast<Eigen::Index>(idx.size());
  auto vech = [&](const Eigen::MatrixXd& M) {
    const Eigen::MatrixXd W = M * M.transpose();
    Eigen::VectorXd v(m);
    for (Eigen::Index k = 0; k < m; ++k) v(k) = W(idx[static_cast<std::size_t>(k)].first, idx[static_cast<std::size_t>(k)].second);
    return v;
  };
  Eigen::MatrixXd J(m, m);
  for (Eigen::Index c = 0; c < m; ++c) {
    Eigen::MatrixXd Ap = A, Am = A;
    Ap(idx[static_cast<std::size_t>(c)].first, idx[static_cast<std::size_t>(c)].second) += h;
    Am(idx[static_cast<std::size_t>(c)].first, idx[static_cast<std::size_t>(c)].second) -= h;
    J.col(c) = (vech(Ap) - vech(Am)) / (2.0 * h);
  }
  return std::log(std::abs(J.determinant()));
}

/// Inverse-Wishart log density up to a constant, via full inverse and determinant.
inline double log_iw(const Eigen::MatrixXd& W, double nu, const Eigen::MatrixXd& R) {
  const double q = static_cast<double>(W.rows());
  return -0.5 * (nu + q + 1.0) * std::log(W.determinant()) - 0.5 * (R * W.inverse()).trace();
}

struct Toy {
  const mardp::RegionGraph* graph;
  const mardp::Dataset* data;
  mardp::SpatialModel model;
  mardp::SamplerConfig config;
  std::vector<int> order;
};

/// Unnormalised log posterior of the full state, every piece recomputed densely.
inline double log_posterior(const Toy& toy, const mardp::ChainState& s) {
  using namespace mardp;
  const auto& g = *toy.graph;
  const auto& data = *toy.data;
  const auto& pr = toy.config.priors;
  const int n = g.n_regions(), q = data.q(), N = n * q, K = toy.config.K;
  for (int d = 0; d < q; ++d)
    if (!(s.rho(d) > 0.0 && s.rho(d) < 1.0)) return -INFINITY;
  for (int k = 0; k + 1 < K; ++k)
    if (!(s.V(k) > 0.0 && s.V(k) < 1.0)) return -INFINITY;

  std::vector<Eigen::MatrixXd> Qs;
  for (int d = 0; d < q; ++d)
    Qs.push_back(uses_dagar(toy.model) ? dagar_Q(g, toy.order, s.rho(d)) : car_Q(g, s.rho(d)));
  Eigen::MatrixXd A = s.A;
  if (!is_joint(toy.model)) A = Eigen::MatrixXd(A.diagonal().asDiagonal());
  const Eigen::MatrixXd S = sigma(Qs, A);
  const double lp_gamma = -0.5 * s.gamma.dot(S.inverse() * s.gamma) - 0.5 * std::log(S.determinant());

  Eigen::VectorXd V = s.V;
  V(K - 1) = 1.0;
  const Eigen::VectorXd p = stick_probs(V);
  double lp = lp_gamma;
  for (int o = 0; o < N; ++o) {
    const int d = o / n, i = o % n;
    const int u = label_of(normal_cdf(s.gamma(o) / std::sqrt(S(o, o))), p);
    const auto& dd = data.diseases[static_cast<std::size_t>(d)];
    const double eta = dd.X.row(i).dot(s.beta[static_cast<std::size_t>(d)]) + s.theta(u);
    if (data.likelihood == Likelihood::Gaussian) {
      const double r = dd.y(i) - eta;
      lp += 0.5 * std::log(s.tau(d) / (2.0 * std::numbers::pi)) - 0.5 * s.tau(d) * r * r;
    } else {
      lp += dd.y(i) * (std::log(dd.E(i)) + eta) - dd.E(i) * std::exp(eta) - std::lgamma(dd.y(i) + 1.0);
    }
  }
  for (int k = 0; k + 1 < K; ++k) lp += (toy.config.alpha - 1.0) * std::log(1.0 - s.V(k));
  for (int k = 0; k < K; ++k) lp += 0.5 * std::log(s.tau_s) - 0.5 * s.tau_s * s.theta(k) * s.theta(k);
  for (int d = 0; d < q; ++d) lp -= s.beta[static_cast<std::size_t>(d)].squaredNorm() / (2.0 * pr.sigma2_beta);
  if (is_joint(toy.model)) {
    const double nu = pr.nu.value_or(q);
    const Eigen::MatrixXd R = pr.R.value_or(Eigen::MatrixXd(0.1 * Eigen::MatrixXd::Identity(q, q)));
    lp += log_iw(A * A.transpose(), nu, R) + log_jacobian_fd(A);
  } else {
    for (int d = 0; d < q; ++d) {
      // density of a = sqrt(v), v ~ IG(a_v, b_v)
      const double v = A(d, d) * A(d, d);
      lp += -(pr.a_v + 1.0) * std::log(v) - pr.b_v / v + std::log(2.0 * A(d, d));
    }
  }
  return lp;
}

/// Dense linear map taking gamma to gamma' with the whitened field held fixed:
/// (A' kron I) blockdiag(U'_d^{-1} U_d) (A^{-1} kron I), U_d the upper Cholesky factor of Q_d.
inline Eigen::MatrixXd transport_matrix(const Toy& toy, const mardp::ChainState& from, const Eigen::VectorXd& rho_star,
                                        const Eigen::MatrixXd& A_star) {
  using namespace mardp;
  const auto& g = *toy.graph;
  const int n = g.n_regions(), q = static_cast<int>(from.rho.size());
  auto effective = [&](const Eigen::MatrixXd& A) {
    Eigen::MatrixXd L = A.triangularView<Eigen::Lower>();
    return is_joint(toy.model) ? L : Eigen::MatrixXd(L.diagonal().asDiagonal());
  };
  auto Q = [&](double rho) { return uses_dagar(toy.model) ? dagar_Q(g, toy.order, rho) : car_Q(g, rho); };
  Eigen::MatrixXd middle = Eigen::MatrixXd::Zero(n * q, n * q);
  for (int d = 0; d < q; ++d) {
    const Eigen::MatrixXd U = Q(from.rho(d)).llt().matrixU();
    const Eigen::MatrixXd U_star = Q(rho_star(d)).llt().matrixU();
    middle.block(d * n, d * n, n, n) = U_star.inverse() * U;
  }
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  return kron(effective(A_star), I) * middle * kron(effective(from.A).inverse(), I);
}

/// One-sample Kolmogorov-Smirnov distance against a continuous CDF.
template <typename Cdf>
double ks_distance(std::vector<double> x, Cdf cdf) {
  std::sort(x.begin(), x.end());
  const double m = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double F = cdf(x[k]);
    d = std::max({d, F - static_cast<double>(k) / m, static_cast<double>(k + 1) / m - F});
  }
  return d;
}

/// Brute-force threshold search: scans a fine grid over [0, 1] plus every
/// value of v, keeps the largest selection whose estimated FDR is <= delta.
struct GridDecision {
  bool empty = true;
  std::vector<bool> selected;
  double fdr = 0.0, fnr = 0.0;
};

inline GridDecision grid_threshold(const std::vector<double>& v, double delta, int steps = 4096) {
  std::vector<double> grid;
  for (int k = 0; k <= steps; ++k) grid.push_back(static_cast<double>(k) / steps);
  grid.insert(grid.end(), v.begin(), v.end());
  GridDecision best;
  int best_count = -1;
  for (double t : grid) {
    double miss = 0.0, kept = 0.0;
    int sel = 0, uns = 0;
    for (double x : v) {
      if (x > t) {
        miss += 1.0 - x;
        ++sel;
      } else {
        kept += x;
        ++uns;
      }
    }
    if (sel == 0) continue;
    const double fdr = miss / sel;
    if (fdr <= delta && sel > best_count) {
      best_count = sel;
      best.empty = false;
      best.selected.assign(v.size(), false);
      for (std::size_t k = 0; k < v.size(); ++k) best.selected[k] = v[k] > t;
      best.fdr = fdr;
      best.fnr = uns == 0 ? 0.0 : kept / uns;
    }
  }
  return best;
}

}  // namespace oracle

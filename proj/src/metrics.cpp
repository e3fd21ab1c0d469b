#include "mardp/metrics.hpp"

#include "mardp/diagnostics.hpp"
#include "mardp/random.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace mardp {

DScore d_score_from_replicates(const Eigen::VectorXd& y, const Eigen::MatrixXd& replicates, int q) {
  const auto N = y.size();
  if (replicates.cols() != N) throw std::invalid_argument("replicate width does not match observations");
  if (q < 1 || N % q != 0) throw std::invalid_argument("observations do not split into disease blocks");
  const auto L = replicates.rows();
  if (L < 2) throw std::invalid_argument("at least two replicates are needed");
  const auto n = N / q;
  const Eigen::RowVectorXd mean = replicates.colwise().mean();
  const Eigen::RowVectorXd var = (replicates.rowwise() - mean).colwise().squaredNorm() / static_cast<double>(L - 1);
  DScore out;
  out.G = Eigen::VectorXd::Zero(q);
  out.P = Eigen::VectorXd::Zero(q);
  for (Eigen::Index o = 0; o < N; ++o) {
    const auto d = o / n;
    out.G(d) += std::pow(y(o) - mean(o), 2);
    out.P(d) += var(o);
  }
  out.D = out.G + out.P;
  out.G_sum = out.G.sum();
  out.P_sum = out.P.sum();
  out.D_sum = out.G_sum + out.P_sum;
  out.draws = static_cast<int>(L);
  out.few_draws = L < 100;
  return out;
}

Eigen::VectorXd draw_mean(const PosteriorSamples& s, const Dataset& data, int chain, int draw) {
  const auto& c = s.chains.at(static_cast<std::size_t>(chain));
  const int n = s.n;
  Eigen::VectorXd mean = s.phi(chain, draw);
  for (int d = 0; d < s.q; ++d) {
    const auto& X = data.diseases.at(static_cast<std::size_t>(d)).X;
    const Eigen::VectorXd beta = c.beta.row(draw).segment(s.coefficient_offset(d), X.cols()).transpose();
    mean.segment(d * n, n) += X * beta;
  }
  return mean;
}

DScore d_score(const PosteriorSamples& s, const Dataset& data, std::uint64_t seed) {
  if (data.n() != s.n || data.q() != s.q) throw std::invalid_argument("posterior and dataset shapes differ");
  const int N = s.n * s.q;
  const bool poisson = s.likelihood == Likelihood::Poisson;
  Eigen::VectorXd y(N), E = Eigen::VectorXd::Ones(N);
  for (int d = 0; d < s.q; ++d) {
    const auto& dd = data.diseases[static_cast<std::size_t>(d)];
    y.segment(d * s.n, s.n) = dd.y;
    if (poisson) E.segment(d * s.n, s.n) = dd.E;
  }
  Eigen::MatrixXd reps(s.total_draws(), N);
  Eigen::Index row = 0;
  for (int c = 0; c < static_cast<int>(s.chains.size()); ++c) {
    auto rng = make_rng(seed, kReplicateStream + static_cast<std::uint64_t>(c));
    const auto& ch = s.chains[static_cast<std::size_t>(c)];
    for (int r = 0; r < ch.draws(); ++r, ++row) {
      const Eigen::VectorXd mu = draw_mean(s, data, c, r);
      for (int o = 0; o < N; ++o) {
        if (poisson) {
          reps(row, o) = static_cast<double>(poisson_variate(rng, E(o) * std::exp(mu(o)))) / E(o);
        } else {
          const double tau = ch.tau(r, o / s.n);
          reps(row, o) = mu(o) + std_normal(rng) / std::sqrt(tau);
        }
      }
    }
  }
  if (poisson) y = y.cwiseQuotient(E);
  return d_score_from_replicates(y, reps, s.q);
}

double gaussian_kl(const Eigen::VectorXd& m0, const Eigen::VectorXd& v0, const Eigen::VectorXd& m1,
                   const Eigen::VectorXd& v1) {
  if (m0.size() != v0.size() || m1.size() != v1.size() || m0.size() != m1.size())
    throw std::invalid_argument("KL arguments differ in length");
  if ((v0.array() <= 0.0).any() || (v1.array() <= 0.0).any()) throw std::invalid_argument("variances must be positive");
  return 0.5 * ((v1.array() / v0.array()).log() + (v0.array() + (m0 - m1).array().square()) / v1.array() - 1.0).sum();
}

Eigen::VectorXd posterior_kl(const PosteriorSamples& s, const Dataset& data, const Eigen::VectorXd& true_mean,
                             const Eigen::VectorXd& true_tau) {
  if (s.likelihood != Likelihood::Gaussian) throw std::invalid_argument("KL divergence is defined for Gaussian fits only");
  const int N = s.n * s.q;
  if (true_mean.size() != N || true_tau.size() != s.q) throw std::invalid_argument("true parameters have the wrong shape");
  Eigen::VectorXd v0(N);
  for (int o = 0; o < N; ++o) v0(o) = 1.0 / true_tau(o / s.n);
  Eigen::VectorXd out(s.total_draws());
  Eigen::Index k = 0;
  for (int c = 0; c < static_cast<int>(s.chains.size()); ++c) {
    const auto& ch = s.chains[static_cast<std::size_t>(c)];
    for (int r = 0; r < ch.draws(); ++r) {
      Eigen::VectorXd v1(N);
      for (int o = 0; o < N; ++o) v1(o) = 1.0 / ch.tau(r, o / s.n);
      out(k++) = gaussian_kl(true_mean, v0, draw_mean(s, data, c, r), v1);
    }
  }
  return out;
}

SensSpec sensitivity_specificity(const std::vector<bool>& selected, const std::vector<bool>& truth) {
  if (selected.size() != truth.size()) throw std::invalid_argument("selection and truth differ in length");
  double tp = 0, pos = 0, tn = 0, neg = 0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    if (truth[k]) {
      ++pos;
      tp += selected[k] ? 1 : 0;
    } else {
      ++neg;
      tn += selected[k] ? 0 : 1;
    }
  }
  return {pos > 0 ? tp / pos : 0.0, neg > 0 ? tn / neg : 0.0};
}

SensSpec sensitivity_specificity(const std::vector<Edge>& selected, const std::vector<Edge>& truth,
                                 const std::vector<Edge>& all) {
  auto norm = [](Edge e) { return e.first < e.second ? e : Edge{e.second, e.first}; };
  std::set<Edge> sel, tru;
  for (auto e : selected) sel.insert(norm(e));
  for (auto e : truth) tru.insert(norm(e));
  std::set<Edge> universe;
  for (auto e : all) universe.insert(norm(e));
  std::vector<bool> s, t;
  for (auto e : universe) {
    s.push_back(sel.count(e) > 0);
    t.push_back(tru.count(e) > 0);
  }
  return sensitivity_specificity(s, t);
}

PosteriorSummary summarize(const Eigen::VectorXd& draws) {
  return {draws.mean(), quantile(draws, 0.025), quantile(draws, 0.975)};
}

CoverageMse coverage_and_mse(const std::vector<PosteriorSummary>& per_dataset, double truth) {
  CoverageMse out;
  out.datasets = static_cast<int>(per_dataset.size());
  if (per_dataset.empty()) return out;
  for (const auto& s : per_dataset) {
    out.coverage += (s.lower <= truth && truth <= s.upper) ? 1.0 : 0.0;
    out.mse += (s.mean - truth) * (s.mean - truth);
  }
  out.coverage /= out.datasets;
  out.mse /= out.datasets;
  return out;
}

MoranResult moran_i(const Eigen::VectorXd& x, const Eigen::MatrixXd& W) {
  const auto n = x.size();
  if (W.rows() != n || W.cols() != n) throw std::invalid_argument("weight matrix does not match the values");
  MoranResult out;
  out.weight_sum = W.sum();
  if (out.weight_sum <= 0.0) {
    out.reason = "band has no region pairs";
    return out;
  }
  const Eigen::VectorXd z = x.array() - x.mean();
  const double ss = z.squaredNorm();
  if (ss <= 0.0) {
    out.reason = "values have zero variance";
    return out;
  }
  out.I = static_cast<double>(n) / out.weight_sum * z.dot(W * z) / ss;
  return out;
}

std::vector<MoranResult> moran_correlogram(const Eigen::VectorXd& values, const std::vector<Eigen::MatrixXd>& bands) {
  std::vector<MoranResult> out;
  for (const auto& W : bands) out.push_back(moran_i(values, W));
  return out;
}

}  // namespace mardp

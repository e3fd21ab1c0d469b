#pragma once

#include "mardp/graph.hpp"
#include "mardp/likelihood.hpp"
#include "mardp/random.hpp"
#include "mardp/sampler.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace toys {

inline mardp::RegionGraph path(int n) {
  std::vector<std::string> labels;
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) labels.push_back("r" + std::to_string(i + 1));
  for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  return mardp::RegionGraph(labels, edges);
}

/// Connected graph with random extra edges on top of a path.
inline mardp::RegionGraph random_connected(int n, std::uint64_t seed, double extra = 0.3) {
  auto rng = mardp::make_rng(seed);
  std::vector<std::string> labels;
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) labels.push_back("r" + std::to_string(i + 1));
  for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  for (int i = 0; i < n; ++i)
    for (int j = i + 2; j < n; ++j)
      if (mardp::uniform01(rng) < extra) edges.emplace_back(i, j);
  return mardp::RegionGraph(labels, edges);
}

/// Gaussian or Poisson data with an intercept and one covariate.
inline mardp::Dataset dataset(const mardp::RegionGraph& g, int q, mardp::Likelihood lik, std::uint64_t seed) {
  auto rng = mardp::make_rng(seed);
  mardp::Dataset data;
  data.likelihood = lik;
  data.regions = g.labels();
  const int n = g.n_regions();
  for (int d = 0; d < q; ++d) {
    mardp::DiseaseData dd;
    dd.name = "d" + std::to_string(d + 1);
    dd.X = Eigen::MatrixXd::Ones(n, 2);
    for (int i = 0; i < n; ++i) dd.X(i, 1) = mardp::std_normal(rng);
    dd.covariate_names = {"(Intercept)", "x1"};
    dd.y.resize(n);
    if (lik == mardp::Likelihood::Poisson) {
      dd.E.resize(n);
      for (int i = 0; i < n; ++i) {
        dd.E(i) = 5.0 + 10.0 * mardp::uniform01(rng);
        dd.y(i) = static_cast<double>(mardp::poisson_variate(rng, dd.E(i) * std::exp(0.3 * dd.X(i, 1))));
      }
    } else {
      for (int i = 0; i < n; ++i) dd.y(i) = 1.0 + 2.0 * dd.X(i, 1) + 0.5 * mardp::std_normal(rng);
    }
    data.diseases.push_back(std::move(dd));
  }
  return data;
}

/// Random in-support state for ratio checks.
inline mardp::ChainState random_state(const mardp::Chain& chain, const mardp::Dataset& data, mardp::SpatialModel model, mardp::Rng& rng) {
  const int q = data.q(), n = data.n(), K = chain.K();
  mardp::ChainState s;
  for (const auto& dd : data.diseases) {
    Eigen::VectorXd b(dd.X.cols());
    for (auto& x : b) x = 0.3 * mardp::std_normal(rng);
    s.beta.push_back(b);
  }
  s.theta.resize(K);
  for (auto& x : s.theta) x = mardp::std_normal(rng);
  s.V.resize(K);
  for (auto& x : s.V) x = 0.2 + 0.6 * mardp::uniform01(rng);
  s.gamma.resize(n * q);
  for (auto& x : s.gamma) x = mardp::std_normal(rng);
  if (data.likelihood == mardp::Likelihood::Gaussian) s.tau = Eigen::VectorXd::Constant(q, 2.0 + mardp::uniform01(rng));
  s.tau_s = 0.5 + mardp::uniform01(rng);
  s.rho.resize(q);
  for (auto& x : s.rho) x = 0.1 + 0.8 * mardp::uniform01(rng);
  s.A = Eigen::MatrixXd::Zero(q, q);
  for (int d = 0; d < q; ++d) {
    s.A(d, d) = 0.5 + mardp::uniform01(rng);
    if (mardp::is_joint(model))
      for (int h = 0; h < d; ++h) s.A(d, h) = mardp::std_normal(rng);
  }
  return s;
}

}  // namespace toys

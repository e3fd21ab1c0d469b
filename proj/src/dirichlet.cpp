#include "mardp/dirichlet.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mardp {

StickBreaking stick_weights(const Eigen::VectorXd& free_v, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("DP concentration alpha must be positive");
  const auto K = free_v.size() + 1;
  StickBreaking s;
  s.alpha = alpha;
  s.V.resize(K);
  s.p.resize(K);
  s.cumulative.resize(K);
  double remaining = 1.0;
  double cum = 0.0;
  for (Eigen::Index k = 0; k < K; ++k) {
    double v = 1.0;
    if (k + 1 < K) {
      v = free_v(k);
      if (!(v > 0.0 && v < 1.0)) throw std::invalid_argument(fmt::format("stick break V_{} = {} outside (0,1)", k + 1, v));
    }
    s.V(k) = v;
    s.p(k) = v * remaining;
    remaining *= 1.0 - v;
    cum += s.p(k);
    s.cumulative(k) = cum;
  }
  s.cumulative(K - 1) = 1.0;
  return s;
}

double marginal_cdf(double gamma, double marginal_sd) {
  if (!(marginal_sd > 0.0)) throw std::invalid_argument("marginal standard deviation must be positive");
  return 0.5 * std::erfc(-gamma / (marginal_sd * std::sqrt(2.0)));
}

int cluster_of(double cdf_value, const Eigen::VectorXd& cumulative) {
  const auto* begin = cumulative.data();
  const auto* end = begin + cumulative.size();
  const auto* it = std::lower_bound(begin, end, cdf_value);
  if (it == end) --it;
  return static_cast<int>(it - begin);
}

Eigen::VectorXi assign_clusters(const Eigen::VectorXd& gamma, const Eigen::VectorXd& marginal_sds,
                                const StickBreaking& sticks) {
  if (gamma.size() != marginal_sds.size()) throw std::invalid_argument("gamma and marginal sds differ in length");
  Eigen::VectorXi u(gamma.size());
  for (Eigen::Index o = 0; o < gamma.size(); ++o) u(o) = cluster_of(marginal_cdf(gamma(o), marginal_sds(o)), sticks.cumulative);
  return u;
}

Eigen::VectorXd extract_phi(const Eigen::VectorXi& labels, const Eigen::VectorXd& theta) {
  Eigen::VectorXd phi(labels.size());
  for (Eigen::Index o = 0; o < labels.size(); ++o) {
    if (labels(o) < 0 || labels(o) >= theta.size())
      throw std::out_of_range(fmt::format("cluster label {} outside 1..{}", labels(o) + 1, theta.size()));
    phi(o) = theta(labels(o));
  }
  return phi;
}

}  // namespace mardp

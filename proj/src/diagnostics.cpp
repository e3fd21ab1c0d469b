#include "mardp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mardp {

double split_rhat(const std::vector<Eigen::VectorXd>& chains) {
  if (chains.empty()) return std::numeric_limits<double>::quiet_NaN();
  Eigen::Index len = chains.front().size();
  for (const auto& c : chains) len = std::min(len, c.size());
  const Eigen::Index half = len / 2;
  if (half < 2) return std::numeric_limits<double>::quiet_NaN();
  std::vector<Eigen::VectorXd> parts;
  for (const auto& c : chains) {
    parts.push_back(c.head(half));
    parts.push_back(c.segment(len - half, half));
  }
  const auto m = static_cast<double>(parts.size());
  const auto n = static_cast<double>(half);
  Eigen::VectorXd means(parts.size()), vars(parts.size());
  for (std::size_t k = 0; k < parts.size(); ++k) {
    means(static_cast<Eigen::Index>(k)) = parts[k].mean();
    vars(static_cast<Eigen::Index>(k)) = (parts[k].array() - parts[k].mean()).square().sum() / (n - 1.0);
  }
  const double W = vars.mean();
  const double B = n * (means.array() - means.mean()).square().sum() / (m - 1.0);
  if (W <= 0.0) return B <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double var_plus = (n - 1.0) / n * W + B / n;
  return std::sqrt(var_plus / W);
}

double quantile(Eigen::VectorXd values, double prob) {
  if (values.size() == 0) throw std::invalid_argument("quantile of an empty sample");
  if (!(prob >= 0.0 && prob <= 1.0)) throw std::invalid_argument("quantile probability must lie in [0,1]");
  std::sort(values.data(), values.data() + values.size());
  const double h = prob * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<Eigen::Index>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values(lo) + (h - static_cast<double>(lo)) * (values(hi) - values(lo));
}

}  // namespace mardp

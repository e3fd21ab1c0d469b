#pragma once

#include <Eigen/Dense>

#include <vector>

namespace mardp {

/// Split-chain potential scale reduction: each chain is halved and the
/// classical between/within variance ratio is computed over the halves.
/// Returns NaN when fewer than 4 draws per chain are available, and 1 for
/// constant draws.
double split_rhat(const std::vector<Eigen::VectorXd>& chains);

/// Equal-tail quantile with linear interpolation (type 7).
double quantile(Eigen::VectorXd values, double prob);

}  // namespace mardp

#pragma once

#include <Eigen/Dense>

#include <vector>

namespace mardp {

/// Truncated stick-breaking weights. V has K entries with V(K-1) pinned to 1,
/// so the weights sum to one.
struct StickBreaking {
  double alpha = 1.0;
  Eigen::VectorXd V;
  Eigen::VectorXd p;
  Eigen::VectorXd cumulative;  // cumulative(j) = p_0 + ... + p_j, last entry exactly 1

  int K() const noexcept { return static_cast<int>(p.size()); }
};

/// `free_v` holds the K-1 unpinned breaks, each in (0,1).
StickBreaking stick_weights(const Eigen::VectorXd& free_v, double alpha);

/// Phi(gamma / sd).
double marginal_cdf(double gamma, double marginal_sd);

/// Cluster label (0-based) of a single CDF value: the unique j with
/// c_{j-1} < F <= c_j (lower-exclusive, upper-inclusive).
int cluster_of(double cdf_value, const Eigen::VectorXd& cumulative);

/// Labels for every observation, 0-based.
Eigen::VectorXi assign_clusters(const Eigen::VectorXd& gamma, const Eigen::VectorXd& marginal_sds,
                                const StickBreaking& sticks);

/// phi_o = theta[u_o]. Throws std::out_of_range on a bad label.
Eigen::VectorXd extract_phi(const Eigen::VectorXi& labels, const Eigen::VectorXd& theta);

}  // namespace mardp

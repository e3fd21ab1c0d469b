#pragma once

#include "mardp/graph.hpp"

#include <Eigen/Dense>

#include <memory>
#include <vector>

namespace mardp {

/// DAGAR precision Q(rho) = (I - B)^T Lambda (I - B). B is stored in region
/// indexing; permuted into the DAGAR order it is strictly lower triangular.
struct DagarPrecision {
  double rho = 0.0;
  Eigen::MatrixXd B;
  Eigen::VectorXd lambda;
  Eigen::MatrixXd Q;
  double log_det = 0.0;  // log|Q| = sum log(lambda_i), since |I - B| = 1
};

/// Proper CAR precision Q = D - rho M.
struct CarPrecision {
  double rho = 0.0;
  Eigen::VectorXd D;  // neighbor counts
  Eigen::MatrixXd M;  // binary adjacency
  Eigen::MatrixXd Q;
};

DagarPrecision dagar_precision(const DirectedNeighborSets& dns, double rho);
CarPrecision car_precision(const RegionGraph& graph, double rho);

/// Lower-triangular disease-mixing matrix with positive diagonal.
class DiseaseMixer {
 public:
  DiseaseMixer() = default;
  explicit DiseaseMixer(Eigen::MatrixXd A);
  static DiseaseMixer identity(int q);

  int q() const noexcept { return static_cast<int>(A_.rows()); }
  const Eigen::MatrixXd& A() const noexcept { return A_; }
  const Eigen::MatrixXd& A_inverse() const noexcept { return A_inv_; }
  Eigen::MatrixXd AAt() const { return A_ * A_.transpose(); }
  double log_abs_det() const;  // sum log a_dd

 private:
  Eigen::MatrixXd A_;
  Eigen::MatrixXd A_inv_;
};

/// Cholesky-factored n x n precision with the pieces the sampler needs.
class PrecisionFactor {
 public:
  explicit PrecisionFactor(Eigen::MatrixXd Q);  // throws NumericalError if not PD

  const Eigen::MatrixXd& Q() const noexcept { return Q_; }
  const Eigen::LLT<Eigen::MatrixXd>& cholesky() const noexcept { return llt_; }
  const Eigen::VectorXd& inverse_diagonal() const noexcept { return inv_diag_; }
  double log_det() const noexcept { return log_det_; }
  Eigen::MatrixXd inverse() const;

 private:
  Eigen::MatrixXd Q_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd inv_diag_;
  double log_det_ = 0.0;
};

/// Sigma_gamma = (A (x) I)[diag_d Q_d^{-1}](A^T (x) I) for gamma stacked
/// disease-major: index d*n + i. Everything is evaluated through the per-disease
/// factors and the q x q mixer; dense (nq) x (nq) inverses are never formed.
class CovarianceBundle {
 public:
  CovarianceBundle(std::vector<std::shared_ptr<const PrecisionFactor>> factors, DiseaseMixer mixer);

  int n() const noexcept { return n_; }
  int q() const noexcept { return mixer_.q(); }
  int N() const noexcept { return n_ * q(); }
  const DiseaseMixer& mixer() const noexcept { return mixer_; }
  const PrecisionFactor& factor(int d) const { return *factors_.at(static_cast<std::size_t>(d)); }
  const std::shared_ptr<const PrecisionFactor>& factor_ptr(int d) const { return factors_.at(static_cast<std::size_t>(d)); }

  const Eigen::VectorXd& marginal_sds() const noexcept { return sds_; }
  /// log|Sigma_gamma| = 2n sum_d log a_dd - sum_d log|Q_d|.
  double log_det() const noexcept { return log_det_; }
  /// gamma^T Sigma_gamma^{-1} gamma via f = (A^{-1} (x) I) gamma.
  double quadratic_form(const Eigen::VectorXd& gamma) const;

  /// Sigma_gamma^{-1}, block (d,d') = sum_h Ainv(h,d) Ainv(h,d') Q_h.
  Eigen::MatrixXd precision() const;
  /// Sigma_gamma, block (d,d') = sum_h A(d,h) A(d',h) Q_h^{-1}.
  Eigen::MatrixXd covariance() const;

  CovarianceBundle with_mixer(DiseaseMixer mixer) const;
  CovarianceBundle with_factor(int d, std::shared_ptr<const PrecisionFactor> factor) const;

 private:
  void refresh();

  std::vector<std::shared_ptr<const PrecisionFactor>> factors_;
  DiseaseMixer mixer_;
  int n_ = 0;
  Eigen::VectorXd sds_;
  double log_det_ = 0.0;
};

CovarianceBundle assemble_bundle(const std::vector<Eigen::MatrixXd>& precisions, const DiseaseMixer& mixer);

struct GaussianLogDensity {
  double quadratic = 0.0;  // -1/2 gamma^T Sigma^{-1} gamma
  double log_det = 0.0;    // -1/2 log|Sigma|
  double total() const noexcept { return quadratic + log_det; }
};

/// Zero-mean Gaussian log-density of gamma, without the (2 pi) constant.
GaussianLogDensity gaussian_logdensity(const CovarianceBundle& bundle, const Eigen::VectorXd& gamma);

/// How centroid distances enter rho^d: divided by a fixed unit, or rescaled so
/// the largest pairwise distance is 1.
struct DistanceScale {
  enum class Mode { Divisor, MaxRescale };
  Mode mode = Mode::MaxRescale;
  double divisor = 1.0;

  static DistanceScale max_rescale() { return {Mode::MaxRescale, 1.0}; }
  static DistanceScale unit(double divisor) { return {Mode::Divisor, divisor}; }
};

/// Exponential correlation matrix with entries rho^{d(i,j)}.
Eigen::MatrixXd exp_covariance(const std::vector<Point>& centroids, double rho,
                               DistanceScale scale = DistanceScale::max_rescale());
/// Number of centroid pairs at distance zero (flagged, not fatal).
int count_duplicate_centroids(const std::vector<Point>& centroids);

}  // namespace mardp

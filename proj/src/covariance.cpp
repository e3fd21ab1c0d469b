#include "mardp/covariance.hpp"

#include "mardp/errors.hpp"

#include <fmt/format.h>

#include <cmath>
#include <stdexcept>

namespace mardp {

DagarPrecision dagar_precision(const DirectedNeighborSets& dns, double rho) {
  if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument(fmt::format("DAGAR rho must lie in [0,1), got {}", rho));
  const int n = dns.n_regions();
  DagarPrecision out;
  out.rho = rho;
  out.B = Eigen::MatrixXd::Zero(n, n);
  out.lambda.resize(n);
  const double rho2 = rho * rho;
  for (int i = 0; i < n; ++i) {
    const double scale = 1.0 + (dns.n_before[static_cast<std::size_t>(i)] - 1) * rho2;
    const double b = rho / scale;
    for (auto j : dns.preceding[static_cast<std::size_t>(i)]) out.B(i, j) = b;
    out.lambda(i) = scale / (1.0 - rho2);
  }
  // Q = sum_i lambda_i r_i r_i^T with r_i = e_i - b_i sum_{j in N(i)} e_j.
  out.Q = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const auto& pred = dns.preceding[static_cast<std::size_t>(i)];
    const double li = out.lambda(i);
    out.Q(i, i) += li;
    if (pred.empty()) continue;
    const double b = out.B(i, pred.front());
    for (auto j : pred) {
      out.Q(i, j) -= li * b;
      out.Q(j, i) -= li * b;
      for (auto k : pred) out.Q(j, k) += li * b * b;
    }
  }
  out.log_det = out.lambda.array().log().sum();
  return out;
}

CarPrecision car_precision(const RegionGraph& graph, double rho) {
  if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument(fmt::format("CAR rho must lie in [0,1), got {}", rho));
  const auto isolated = graph.isolated_regions();
  if (!isolated.empty())
    throw DataError(fmt::format("CAR precision undefined: region '{}' has no neighbors", graph.label(isolated.front())));
  const int n = graph.n_regions();
  CarPrecision out;
  out.rho = rho;
  out.M = Eigen::MatrixXd::Zero(n, n);
  for (auto [i, j] : graph.edges()) out.M(i, j) = out.M(j, i) = 1.0;
  out.D = out.M.rowwise().sum();
  out.Q = -rho * out.M;
  out.Q.diagonal() = out.D;
  return out;
}

DiseaseMixer::DiseaseMixer(Eigen::MatrixXd A) : A_(std::move(A)) {
  if (A_.rows() == 0 || A_.rows() != A_.cols()) throw std::invalid_argument("mixer must be a nonempty square matrix");
  for (Eigen::Index d = 0; d < A_.rows(); ++d) {
    if (!(A_(d, d) > 0.0) || !std::isfinite(A_(d, d)))
      throw std::invalid_argument(fmt::format("mixer diagonal a_{}{} must be positive", d + 1, d + 1));
    for (Eigen::Index h = d + 1; h < A_.cols(); ++h)
      if (A_(d, h) != 0.0) throw std::invalid_argument("mixer must be lower triangular");
  }
  A_inv_ = A_.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(A_.rows(), A_.cols()));
}

DiseaseMixer DiseaseMixer::identity(int q) { return DiseaseMixer(Eigen::MatrixXd::Identity(q, q)); }

double DiseaseMixer::log_abs_det() const { return A_.diagonal().array().log().sum(); }

PrecisionFactor::PrecisionFactor(Eigen::MatrixXd Q) : Q_(std::move(Q)), llt_(Q_) {
  if (llt_.info() != Eigen::Success) throw NumericalError("precision matrix is not positive definite");
  const auto& L = llt_.matrixL();
  const Eigen::Index n = Q_.rows();
  log_det_ = 2.0 * Eigen::MatrixXd(L).diagonal().array().log().sum();
  // diag(Q^{-1})_i = ||L^{-1} e_i||^2, i.e. squared column norms of L^{-1}.
  const Eigen::MatrixXd Linv = L.solve(Eigen::MatrixXd::Identity(n, n));
  inv_diag_ = Linv.colwise().squaredNorm().transpose();
}

Eigen::MatrixXd PrecisionFactor::inverse() const { return llt_.solve(Eigen::MatrixXd::Identity(Q_.rows(), Q_.cols())); }

CovarianceBundle::CovarianceBundle(std::vector<std::shared_ptr<const PrecisionFactor>> factors, DiseaseMixer mixer)
    : factors_(std::move(factors)), mixer_(std::move(mixer)) {
  if (static_cast<int>(factors_.size()) != mixer_.q())
    throw std::invalid_argument(fmt::format("{} precisions for a {}-disease mixer", factors_.size(), mixer_.q()));
  n_ = static_cast<int>(factors_.front()->Q().rows());
  for (const auto& f : factors_)
    if (f->Q().rows() != n_) throw std::invalid_argument("precision matrices differ in size");
  refresh();
}

void CovarianceBundle::refresh() {
  const int q = mixer_.q();
  const auto& A = mixer_.A();
  sds_.resize(N());
  for (int d = 0; d < q; ++d) {
    Eigen::VectorXd var = Eigen::VectorXd::Zero(n_);
    for (int h = 0; h <= d; ++h) var += A(d, h) * A(d, h) * factors_[static_cast<std::size_t>(h)]->inverse_diagonal();
    sds_.segment(d * n_, n_) = var.array().sqrt();
  }
  log_det_ = 2.0 * n_ * mixer_.log_abs_det();
  for (const auto& f : factors_) log_det_ -= f->log_det();
}

double CovarianceBundle::quadratic_form(const Eigen::VectorXd& gamma) const {
  if (gamma.size() != N()) throw std::invalid_argument(fmt::format("gamma has length {}, expected {}", gamma.size(), N()));
  const int q = mixer_.q();
  const auto& Ainv = mixer_.A_inverse();
  double total = 0.0;
  Eigen::VectorXd f(n_);
  for (int h = 0; h < q; ++h) {
    f.setZero();
    for (int d = 0; d <= h; ++d) f += Ainv(h, d) * gamma.segment(d * n_, n_);
    total += f.dot(factors_[static_cast<std::size_t>(h)]->Q() * f);
  }
  return total;
}

Eigen::MatrixXd CovarianceBundle::precision() const {
  const int q = mixer_.q();
  const auto& Ainv = mixer_.A_inverse();
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(N(), N());
  for (int d = 0; d < q; ++d) {
    for (int e = 0; e <= d; ++e) {
      auto block = P.block(d * n_, e * n_, n_, n_);
      for (int h = d; h < q; ++h) block += Ainv(h, d) * Ainv(h, e) * factors_[static_cast<std::size_t>(h)]->Q();
      if (e != d) P.block(e * n_, d * n_, n_, n_) = block.transpose();
    }
  }
  return P;
}

Eigen::MatrixXd CovarianceBundle::covariance() const {
  const int q = mixer_.q();
  const auto& A = mixer_.A();
  std::vector<Eigen::MatrixXd> inverses;
  inverses.reserve(factors_.size());
  for (const auto& f : factors_) inverses.push_back(f->inverse());
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(N(), N());
  for (int d = 0; d < q; ++d) {
    for (int e = 0; e <= d; ++e) {
      auto block = S.block(d * n_, e * n_, n_, n_);
      for (int h = 0; h <= e; ++h) block += A(d, h) * A(e, h) * inverses[static_cast<std::size_t>(h)];
      if (e != d) S.block(e * n_, d * n_, n_, n_) = block.transpose();
    }
  }
  return S;
}

CovarianceBundle CovarianceBundle::with_mixer(DiseaseMixer mixer) const { return CovarianceBundle(factors_, std::move(mixer)); }

CovarianceBundle CovarianceBundle::with_factor(int d, std::shared_ptr<const PrecisionFactor> factor) const {
  auto factors = factors_;
  factors.at(static_cast<std::size_t>(d)) = std::move(factor);
  return CovarianceBundle(std::move(factors), mixer_);
}

CovarianceBundle assemble_bundle(const std::vector<Eigen::MatrixXd>& precisions, const DiseaseMixer& mixer) {
  if (static_cast<int>(precisions.size()) != mixer.q())
    throw std::invalid_argument(fmt::format("{} precisions for a {}-disease mixer", precisions.size(), mixer.q()));
  std::vector<std::shared_ptr<const PrecisionFactor>> factors;
  factors.reserve(precisions.size());
  for (const auto& Q : precisions) factors.push_back(std::make_shared<const PrecisionFactor>(Q));
  return CovarianceBundle(std::move(factors), mixer);
}

GaussianLogDensity gaussian_logdensity(const CovarianceBundle& bundle, const Eigen::VectorXd& gamma) {
  return {-0.5 * bundle.quadratic_form(gamma), -0.5 * bundle.log_det()};
}

Eigen::MatrixXd exp_covariance(const std::vector<Point>& centroids, double rho, DistanceScale scale) {
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument(fmt::format("rho must lie in (0,1), got {}", rho));
  Eigen::MatrixXd d = centroid_distances(centroids);
  double unit = scale.divisor;
  if (scale.mode == DistanceScale::Mode::MaxRescale) unit = d.size() > 0 ? d.maxCoeff() : 1.0;
  if (!(unit > 0.0)) unit = 1.0;
  return (d.array() / unit * std::log(rho)).exp().matrix();
}

int count_duplicate_centroids(const std::vector<Point>& centroids) {
  int count = 0;
  for (std::size_t i = 0; i < centroids.size(); ++i)
    for (std::size_t j = i + 1; j < centroids.size(); ++j)
      if (centroids[i].x == centroids[j].x && centroids[i].y == centroids[j].y) ++count;
  return count;
}

}  // namespace mardp

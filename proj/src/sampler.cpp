#include "mardp/sampler.hpp"

#include "mardp/errors.hpp"

#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <thread>

namespace mardp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double logit(double p) { return std::log(p) - std::log1p(-p); }
double inv_logit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_finite(double value, const char* what) {
  if (std::isnan(value)) throw NumericalError(fmt::format("non-finite log-density in {} update", what));
}

Eigen::VectorXd free_breaks(const Eigen::VectorXd& V) { return V.head(V.size() - 1); }

}  // namespace

std::string_view to_string(SpatialModel model) {
  switch (model) {
    case SpatialModel::MDAGAR: return "MDAGAR";
    case SpatialModel::MCAR: return "MCAR";
    case SpatialModel::DAGAR_ind: return "DAGAR_ind";
    case SpatialModel::CAR_ind: return "CAR_ind";
  }
  return "?";
}

SpatialModel parse_spatial_model(std::string_view name) {
  if (name == "MDAGAR" || name == "mdagar") return SpatialModel::MDAGAR;
  if (name == "MCAR" || name == "mcar") return SpatialModel::MCAR;
  if (name == "DAGAR_ind" || name == "dagar_ind") return SpatialModel::DAGAR_ind;
  if (name == "CAR_ind" || name == "car_ind") return SpatialModel::CAR_ind;
  throw std::invalid_argument(fmt::format("unknown model '{}' (expected MDAGAR|MCAR|DAGAR_ind|CAR_ind)", name));
}

bool is_joint(SpatialModel model) { return model == SpatialModel::MDAGAR || model == SpatialModel::MCAR; }
bool uses_dagar(SpatialModel model) { return model == SpatialModel::MDAGAR || model == SpatialModel::DAGAR_ind; }

PrecisionFamily::PrecisionFamily(const RegionGraph& graph, SpatialModel model, const std::vector<RegionIndex>& order)
    : dagar_(uses_dagar(model)) {
  if (dagar_) {
    dns_ = directed_neighbors(graph, order.empty() ? identity_order(graph.n_regions()) : order);
  } else {
    const auto car = car_precision(graph, 0.0);
    adjacency_ = car.M;
    degree_ = car.D;
  }
}

Eigen::MatrixXd PrecisionFamily::operator()(double rho) const {
  if (dagar_) return dagar_precision(dns_, rho).Q;
  if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument(fmt::format("CAR rho must lie in [0,1), got {}", rho));
  Eigen::MatrixXd Q = -rho * adjacency_;
  Q.diagonal() = degree_;
  return Q;
}

void SamplerConfig::validate() const {
  if (K < 2) throw std::invalid_argument("K must be at least 2");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  if (!(iterations > burn_in && burn_in >= 0)) throw std::invalid_argument("need iterations > burn_in >= 0");
  if (thin < 1) throw std::invalid_argument("thin must be at least 1");
  if (n_chains < 1) throw std::invalid_argument("n_chains must be at least 1");
  const auto& p = priors;
  for (double v : {p.a_e, p.b_e, p.a_s, p.b_s, p.sigma2_beta, p.a_v, p.b_v})
    if (!(v > 0.0)) throw std::invalid_argument("prior hyperparameters must be positive");
  if (p.nu && !(*p.nu > 0.0)) throw std::invalid_argument("nu must be positive");
  if (p.R) {
    if (p.R->rows() != p.R->cols()) throw std::invalid_argument("R must be square");
    Eigen::LLT<Eigen::MatrixXd> llt(*p.R);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("R must be positive definite");
  }
  if (!(initial_gamma_step > 0.0)) throw std::invalid_argument("initial gamma step must be positive");
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0)) throw std::invalid_argument("target acceptance must lie in (0,1)");
}

double log_inverse_wishart(const Eigen::MatrixXd& W, double nu, const Eigen::MatrixXd& R) {
  const auto q = static_cast<double>(W.rows());
  Eigen::LLT<Eigen::MatrixXd> llt(W);
  if (llt.info() != Eigen::Success) return kNegInf;
  const Eigen::MatrixXd L = llt.matrixL();
  const double log_det_W = 2.0 * L.diagonal().array().log().sum();
  const double trace = llt.solve(R).trace();
  return -0.5 * (nu + q + 1.0) * log_det_W - 0.5 * trace;
}

double log_cholesky_jacobian(const Eigen::MatrixXd& A) {
  const auto q = A.rows();
  double out = static_cast<double>(q) * std::numbers::ln2;
  for (Eigen::Index d = 0; d < q; ++d) out += static_cast<double>(q - d) * std::log(A(d, d));
  return out;
}

Chain::Chain(const RegionGraph& graph, const Dataset& data, SpatialModel model, const SamplerConfig& config,
             std::uint64_t chain_id, std::vector<RegionIndex> order)
    : graph_(graph),
      data_(data),
      model_(model),
      config_(config),
      family_(graph, model, order),
      rng_(make_rng(config.seed, chain_id)),
      n_(data.n()),
      q_(data.q()),
      bundle_(assemble_bundle(std::vector<Eigen::MatrixXd>(static_cast<std::size_t>(data.q()),
                                                           Eigen::MatrixXd::Identity(data.n(), data.n())),
                              DiseaseMixer::identity(data.q()))) {
  config_.validate();
  data_.validate();
  if (graph.n_regions() != n_) throw DataError(fmt::format("dataset has {} regions, graph has {}", n_, graph.n_regions()));
  nu_ = config_.priors.nu.value_or(static_cast<double>(q_));
  R_ = config_.priors.R.value_or(Eigen::MatrixXd(0.1 * Eigen::MatrixXd::Identity(q_, q_)));
  if (R_.rows() != q_) throw std::invalid_argument(fmt::format("R is {}x{}, expected {}x{}", R_.rows(), R_.cols(), q_, q_));

  const int N = n_ * q_;
  y_.resize(N);
  E_ = Eigen::VectorXd::Ones(N);
  for (int d = 0; d < q_; ++d) {
    const auto& dd = data_.diseases[static_cast<std::size_t>(d)];
    y_.segment(d * n_, n_) = dd.y;
    if (data_.likelihood == Likelihood::Poisson) E_.segment(d * n_, n_) = dd.E;
  }
  log_E_ = E_.array().log();
  for (const auto& dd : data_.diseases) {
    Eigen::Index col = 0;
    while (col < dd.X.cols() && !(dd.X.col(col).array() == 1.0).all()) ++col;
    if (col == dd.X.cols()) {
      intercept_col_.clear();
      break;
    }
    intercept_col_.push_back(col);
  }
  lgamma_y1_.resize(N);
  for (int o = 0; o < N; ++o) lgamma_y1_(o) = std::lgamma(y_(o) + 1.0);

  steps_.gamma.assign(static_cast<std::size_t>(q_), config_.initial_gamma_step);
  for (const auto& dd : data_.diseases) steps_.beta.emplace_back(static_cast<std::size_t>(dd.X.cols()), 0.1);
  steps_.theta.assign(static_cast<std::size_t>(config_.K), 0.2);
  initialize();
}

void Chain::initialize() {
  const int K = config_.K;
  const bool poisson = data_.likelihood == Likelihood::Poisson;
  ChainState s;
  Eigen::MatrixXd resid(n_, q_);
  for (int d = 0; d < q_; ++d) {
    const auto& dd = data_.diseases[static_cast<std::size_t>(d)];
    const Eigen::VectorXd target =
        poisson ? Eigen::VectorXd(((dd.y.array() + 0.5) / dd.E.array()).log()) : Eigen::VectorXd(dd.y);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(dd.X.cols());
    if (!poisson && dd.X.cols() > 0) b = dd.X.colPivHouseholderQr().solve(target);
    if (!b.allFinite()) b.setZero();
    s.beta.push_back(b);
    resid.col(d) = target - dd.X * b;
  }
  s.gamma = Eigen::VectorXd::Zero(n_ * q_);
  s.V = Eigen::VectorXd::Constant(K, 0.5);
  s.V(K - 1) = 1.0;
  s.tau_s = 1.0;
  s.theta.resize(K);
  for (int j = 0; j < K; ++j) s.theta(j) = std_normal(rng_) / std::sqrt(s.tau_s);
  if (!poisson) s.tau = Eigen::VectorXd::Ones(q_);
  s.rho = Eigen::VectorXd::Constant(q_, 0.5);

  s.A = Eigen::MatrixXd::Identity(q_, q_);
  if (n_ > 1) {
    const Eigen::MatrixXd centered = resid.rowwise() - resid.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n_ - 1);
    if (is_joint(model_)) {
      Eigen::LLT<Eigen::MatrixXd> llt(cov);
      if (llt.info() == Eigen::Success) {
        const Eigen::MatrixXd L = llt.matrixL();
        if (L.allFinite() && (L.diagonal().array() > 1e-8).all()) s.A = L;
      }
    } else {
      for (int d = 0; d < q_; ++d)
        if (std::isfinite(cov(d, d)) && cov(d, d) > 1e-16) s.A(d, d) = std::sqrt(cov(d, d));
    }
  }
  set_state(std::move(s));
}

DiseaseMixer Chain::mixer_from(const Eigen::MatrixXd& A) const {
  Eigen::MatrixXd L = A.triangularView<Eigen::Lower>();
  if (!is_joint(model_)) L = Eigen::MatrixXd(L.diagonal().asDiagonal());
  return DiseaseMixer(L);
}

CovarianceBundle Chain::bundle_for_rho(const Eigen::VectorXd& rho) const {
  std::vector<std::shared_ptr<const PrecisionFactor>> factors;
  for (int d = 0; d < q_; ++d) {
    if (rho(d) == state_.rho(d) && d < bundle_.q() && bundle_.n() == n_) {
      factors.push_back(bundle_.factor_ptr(d));
    } else {
      factors.push_back(std::make_shared<const PrecisionFactor>(family_(rho(d))));
    }
  }
  return CovarianceBundle(std::move(factors), bundle_.mixer());
}

void Chain::set_state(ChainState state) {
  if (static_cast<int>(state.beta.size()) != q_ || state.theta.size() != config_.K || state.V.size() != config_.K ||
      state.gamma.size() != N() || state.rho.size() != q_ || state.A.rows() != q_ || state.A.cols() != q_)
    throw std::invalid_argument("chain state has the wrong shape");
  for (int d = 0; d < q_; ++d)
    if (state.beta[static_cast<std::size_t>(d)].size() != data_.diseases[static_cast<std::size_t>(d)].X.cols())
      throw std::invalid_argument("beta has the wrong length");
  if (data_.likelihood == Likelihood::Gaussian && state.tau.size() != q_)
    throw std::invalid_argument("tau must have one entry per disease");
  state.V(config_.K - 1) = 1.0;
  state_ = std::move(state);
  rebuild_caches();
}

void Chain::rebuild_caches() {
  std::vector<std::shared_ptr<const PrecisionFactor>> factors;
  for (int d = 0; d < q_; ++d) factors.push_back(std::make_shared<const PrecisionFactor>(family_(state_.rho(d))));
  bundle_ = CovarianceBundle(std::move(factors), mixer_from(state_.A));
  state_.A = bundle_.mixer().A();
  precision_ = bundle_.precision();
  precision_gamma_ = precision_ * state_.gamma;
  sticks_ = stick_weights(free_breaks(state_.V), config_.alpha);
  const auto& sds = bundle_.marginal_sds();
  cdf_.resize(N());
  state_.u.resize(N());
  for (int o = 0; o < N(); ++o) {
    cdf_(o) = marginal_cdf(state_.gamma(o), sds(o));
    state_.u(o) = cluster_of(cdf_(o), sticks_.cumulative);
  }
  xb_.resize(N());
  for (int d = 0; d < q_; ++d) refresh_linear_predictor(d);
}

void Chain::refresh_linear_predictor(int d) {
  const auto& X = data_.diseases[static_cast<std::size_t>(d)].X;
  xb_.segment(d * n_, n_) = X * state_.beta[static_cast<std::size_t>(d)];
}

double Chain::obs_loglik(int o, double phi) const {
  if (!config_.use_likelihood) return 0.0;
  const double eta = xb_(o) + phi;
  if (data_.likelihood == Likelihood::Gaussian) {
    const double tau = state_.tau(o / n_);
    const double r = y_(o) - eta;
    return 0.5 * std::log(tau / (2.0 * std::numbers::pi)) - 0.5 * tau * r * r;
  }
  return y_(o) * (log_E_(o) + eta) - E_(o) * std::exp(eta) - lgamma_y1_(o);
}

double Chain::total_loglik() const {
  double total = 0.0;
  for (int o = 0; o < N(); ++o) total += obs_loglik(o, state_.theta(state_.u(o)));
  return total;
}

bool Chain::accept(double log_ratio) {
  if (log_ratio >= 0.0) return true;
  if (log_ratio == kNegInf) return false;
  return std::log(uniform01(rng_)) < log_ratio;
}

double Chain::relabel_delta(const Eigen::VectorXd& cdf, const Eigen::VectorXd& cumulative,
                            Eigen::VectorXi* labels_out) const {
  double delta = 0.0;
  if (labels_out) labels_out->resize(N());
  for (int o = 0; o < N(); ++o) {
    const int u_new = cluster_of(cdf(o), cumulative);
    const int u_old = state_.u(o);
    if (labels_out) (*labels_out)(o) = u_new;
    if (u_new != u_old) delta += obs_loglik(o, state_.theta(u_new)) - obs_loglik(o, state_.theta(u_old));
  }
  return delta;
}

// ---- beta ----

Chain::NormalConditional Chain::beta_conditional(int d) const {
  const auto& X = data_.diseases[static_cast<std::size_t>(d)].X;
  const auto p = X.cols();
  Eigen::MatrixXd prec = Eigen::MatrixXd::Identity(p, p) / config_.priors.sigma2_beta;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
  if (config_.use_likelihood) {
    const double tau = state_.tau(d);
    Eigen::VectorXd r(n_);
    for (int i = 0; i < n_; ++i) r(i) = y_(d * n_ + i) - state_.theta(state_.u(d * n_ + i));
    prec += tau * X.transpose() * X;
    rhs = tau * X.transpose() * r;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success) throw NumericalError(fmt::format("beta conditional for disease {} is singular", d + 1));
  NormalConditional out;
  out.mean = llt.solve(rhs);
  out.covariance = llt.solve(Eigen::MatrixXd::Identity(p, p));
  return out;
}

double Chain::log_ratio_beta(int d, const Eigen::VectorXd& beta_star) const {
  const auto& X = data_.diseases[static_cast<std::size_t>(d)].X;
  const auto& beta = state_.beta[static_cast<std::size_t>(d)];
  const Eigen::VectorXd xb_star = X * beta_star;
  double lr = -(beta_star.squaredNorm() - beta.squaredNorm()) / (2.0 * config_.priors.sigma2_beta);
  if (!config_.use_likelihood) return lr;
  for (int i = 0; i < n_; ++i) {
    const int o = d * n_ + i;
    const double phi = state_.theta(state_.u(o));
    const double eta_old = xb_(o) + phi;
    const double eta_new = xb_star(i) + phi;
    if (data_.likelihood == Likelihood::Gaussian) {
      const double tau = state_.tau(d);
      lr += -0.5 * tau * (std::pow(y_(o) - eta_new, 2) - std::pow(y_(o) - eta_old, 2));
    } else {
      lr += y_(o) * (eta_new - eta_old) - E_(o) * (std::exp(eta_new) - std::exp(eta_old));
    }
  }
  return lr;
}

void Chain::update_beta() {
  for (int d = 0; d < q_; ++d) {
    auto& beta = state_.beta[static_cast<std::size_t>(d)];
    if (beta.size() == 0) continue;
    if (data_.likelihood == Likelihood::Gaussian) {
      const auto cond = beta_conditional(d);
      Eigen::LLT<Eigen::MatrixXd> llt(cond.covariance);
      if (llt.info() != Eigen::Success) throw NumericalError("beta conditional covariance is not positive definite");
      Eigen::VectorXd z(beta.size());
      for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = std_normal(rng_);
      beta = cond.mean + Eigen::MatrixXd(llt.matrixL()) * z;
    } else {
      auto& steps = steps_.beta[static_cast<std::size_t>(d)];
      for (Eigen::Index j = 0; j < beta.size(); ++j) {
        Eigen::VectorXd proposal = beta;
        proposal(j) += steps[static_cast<std::size_t>(j)] * std_normal(rng_);
        const double lr = log_ratio_beta(d, proposal);
        check_finite(lr, "beta");
        const bool ok = accept(lr);
        acceptance_.beta.proposed += 1.0;
        if (ok) {
          acceptance_.beta.accepted += 1.0;
          beta = proposal;
          refresh_linear_predictor(d);
        }
        if (adapting_) steps[static_cast<std::size_t>(j)] *= std::exp(adapt_gain_ * ((ok ? 1.0 : 0.0) - config_.target_acceptance));
      }
    }
    refresh_linear_predictor(d);
  }
}

// ---- theta ----

std::pair<double, double> Chain::theta_conditional(int j) const {
  double prec = state_.tau_s;
  double num = 0.0;
  if (config_.use_likelihood) {
    for (int o = 0; o < N(); ++o) {
      if (state_.u(o) != j) continue;
      const double tau = state_.tau(o / n_);
      prec += tau;
      num += tau * (y_(o) - xb_(o));
    }
  }
  return {num / prec, 1.0 / prec};
}

double Chain::log_ratio_theta(int j, double theta_star) const {
  const double theta = state_.theta(j);
  double lr = -0.5 * state_.tau_s * (theta_star * theta_star - theta * theta);
  for (int o = 0; o < N(); ++o)
    if (state_.u(o) == j) lr += obs_loglik(o, theta_star) - obs_loglik(o, theta);
  return lr;
}

void Chain::update_theta() {
  const int K = config_.K;
  std::vector<int> count(static_cast<std::size_t>(K), 0);
  for (int o = 0; o < N(); ++o) ++count[static_cast<std::size_t>(state_.u(o))];
  for (int j = 0; j < K; ++j) {
    if (data_.likelihood == Likelihood::Gaussian || count[static_cast<std::size_t>(j)] == 0 || !config_.use_likelihood) {
      const auto [mean, var] = data_.likelihood == Likelihood::Gaussian
                                   ? theta_conditional(j)
                                   : std::pair<double, double>{0.0, 1.0 / state_.tau_s};
      state_.theta(j) = mean + std::sqrt(var) * std_normal(rng_);
      continue;
    }
    double& step = steps_.theta[static_cast<std::size_t>(j)];
    const double proposal = state_.theta(j) + step * std_normal(rng_);
    const double lr = log_ratio_theta(j, proposal);
    check_finite(lr, "theta");
    const bool ok = accept(lr);
    acceptance_.theta.proposed += 1.0;
    if (ok) {
      acceptance_.theta.accepted += 1.0;
      state_.theta(j) = proposal;
    }
    if (adapting_) step *= std::exp(adapt_gain_ * ((ok ? 1.0 : 0.0) - config_.target_acceptance));
  }
}

// ---- intercept/atom translation ----

std::pair<double, double> Chain::location_conditional() const {
  const double inv_s2 = 1.0 / config_.priors.sigma2_beta;
  const double prec = q_ * inv_s2 + config_.K * state_.tau_s;
  double num = state_.tau_s * state_.theta.sum();
  for (int d = 0; d < q_; ++d) num -= inv_s2 * state_.beta[static_cast<std::size_t>(d)](intercept_col_[static_cast<std::size_t>(d)]);
  return {num / prec, 1.0 / prec};
}

void Chain::update_location() {
  if (!has_location_move()) return;
  const auto [mean, var] = location_conditional();
  const double c = mean + std::sqrt(var) * std_normal(rng_);
  for (int d = 0; d < q_; ++d) {
    state_.beta[static_cast<std::size_t>(d)](intercept_col_[static_cast<std::size_t>(d)]) += c;
    refresh_linear_predictor(d);
  }
  state_.theta.array() -= c;
}

// ---- gamma ----

double Chain::log_ratio_gamma(int o, double gamma_star) const {
  const double delta = gamma_star - state_.gamma(o);
  const double dquad = 2.0 * delta * precision_gamma_(o) + delta * delta * precision_(o, o);
  const double F = marginal_cdf(gamma_star, bundle_.marginal_sds()(o));
  const int u_new = cluster_of(F, sticks_.cumulative);
  double lr = -0.5 * dquad;
  const int u_old = state_.u(o);
  if (u_new != u_old) lr += obs_loglik(o, state_.theta(u_new)) - obs_loglik(o, state_.theta(u_old));
  return lr;
}

void Chain::update_gamma() {
  if (config_.gamma_gibbs) update_gamma_gibbs();
  else update_gamma_random_walk();
}

std::pair<double, double> Chain::gamma_prior_conditional(int o) const {
  const double poo = precision_(o, o);
  return {state_.gamma(o) - precision_gamma_(o) / poo, 1.0 / poo};
}

void Chain::update_gamma_gibbs() {
  precision_gamma_ = precision_ * state_.gamma;
  const auto& sds = bundle_.marginal_sds();
  const int K = config_.K;
  // Cut points on the standard-normal scale: label j covers (z_{j-1}, z_j].
  Eigen::VectorXd cut(K + 1);
  cut(0) = -INFINITY;
  for (int j = 0; j < K; ++j) {
    const double c = sticks_.cumulative(j);
    cut(j + 1) = j == K - 1 || c >= 1.0 ? INFINITY : boost::math::quantile(boost::math::normal(), std::max(c, 1e-300));
  }
  Eigen::VectorXd logw(K);
  for (int o = 0; o < N(); ++o) {
    const auto [m, var] = gamma_prior_conditional(o);
    const double s = std::sqrt(var);
    auto z = [&](int k) { return std::isfinite(cut(k)) ? (sds(o) * cut(k) - m) / s : cut(k); };
    for (int j = 0; j < K; ++j) logw(j) = log_normal_mass(z(j), z(j + 1)) + obs_loglik(o, state_.theta(j));
    const double top = logw.maxCoeff();
    check_finite(top, "gamma");
    double total = 0.0;
    for (int j = 0; j < K; ++j) total += std::exp(logw(j) - top);
    double pick = uniform01(rng_) * total;
    int j = 0;
    for (; j < K - 1; ++j) {
      pick -= std::exp(logw(j) - top);
      if (pick < 0.0) break;
    }
    while (!std::isfinite(logw(j))) --j;
    const double g = m + s * truncated_std_normal(rng_, z(j), z(j + 1));
    acceptance_.gamma.proposed += 1.0;
    acceptance_.gamma.accepted += 1.0;
    precision_gamma_ += (g - state_.gamma(o)) * precision_.col(o);
    state_.gamma(o) = g;
    cdf_(o) = marginal_cdf(g, sds(o));
    state_.u(o) = cluster_of(cdf_(o), sticks_.cumulative);
  }
}

void Chain::update_gamma_random_walk() {
  precision_gamma_ = precision_ * state_.gamma;
  const auto& sds = bundle_.marginal_sds();
  std::vector<double> accepted(static_cast<std::size_t>(q_), 0.0);
  for (int o = 0; o < N(); ++o) {
    const int d = o / n_;
    const double proposal = state_.gamma(o) + steps_.gamma[static_cast<std::size_t>(d)] * std_normal(rng_);
    const double lr = log_ratio_gamma(o, proposal);
    check_finite(lr, "gamma");
    acceptance_.gamma.proposed += 1.0;
    if (!accept(lr)) continue;
    acceptance_.gamma.accepted += 1.0;
    accepted[static_cast<std::size_t>(d)] += 1.0;
    const double delta = proposal - state_.gamma(o);
    precision_gamma_ += delta * precision_.col(o);
    state_.gamma(o) = proposal;
    cdf_(o) = marginal_cdf(proposal, sds(o));
    state_.u(o) = cluster_of(cdf_(o), sticks_.cumulative);
  }
  if (adapting_)
    for (int d = 0; d < q_; ++d)
      steps_.gamma[static_cast<std::size_t>(d)] *=
          std::exp(adapt_gain_ * (accepted[static_cast<std::size_t>(d)] / n_ - config_.target_acceptance));
}

// ---- sticks ----

double Chain::log_ratio_stick(int k, double v_star) const {
  if (k < 0 || k >= config_.K - 1) throw std::out_of_range("stick index out of range");
  if (!(v_star > 0.0 && v_star < 1.0)) return kNegInf;
  Eigen::VectorXd free = free_breaks(state_.V);
  const double v = free(k);
  free(k) = v_star;
  const auto proposal = stick_weights(free, config_.alpha);
  double lr = (config_.alpha - 1.0) * (std::log1p(-v_star) - std::log1p(-v));
  lr += relabel_delta(cdf_, proposal.cumulative, nullptr);
  return lr;
}

void Chain::update_sticks() {
  double accepted = 0.0;
  for (int k = 0; k < config_.K - 1; ++k) {
    const double proposal = state_.V(k) + steps_.stick * std_normal(rng_);
    const double lr = log_ratio_stick(k, proposal);
    check_finite(lr, "stick");
    acceptance_.stick.proposed += 1.0;
    if (!accept(lr)) continue;
    accepted += 1.0;
    acceptance_.stick.accepted += 1.0;
    state_.V(k) = proposal;
    sticks_ = stick_weights(free_breaks(state_.V), config_.alpha);
    for (int o = 0; o < N(); ++o) state_.u(o) = cluster_of(cdf_(o), sticks_.cumulative);
  }
  if (adapting_) steps_.stick *= std::exp(adapt_gain_ * (accepted / (config_.K - 1) - config_.target_acceptance));
}

// ---- tau, tau_s ----

Chain::GammaConditional Chain::tau_conditional(int d) const {
  if (data_.likelihood != Likelihood::Gaussian) throw std::logic_error("tau is defined only for Gaussian outcomes");
  if (!config_.use_likelihood) return {config_.priors.a_e, config_.priors.b_e};
  double ssr = 0.0;
  for (int i = 0; i < n_; ++i) {
    const int o = d * n_ + i;
    const double r = y_(o) - xb_(o) - state_.theta(state_.u(o));
    ssr += r * r;
  }
  return {0.5 * n_ + config_.priors.a_e, 0.5 * ssr + config_.priors.b_e};
}

Chain::GammaConditional Chain::tau_s_conditional() const {
  return {0.5 * config_.K + config_.priors.a_s, 0.5 * state_.theta.squaredNorm() + config_.priors.b_s};
}

void Chain::update_tau() {
  if (data_.likelihood != Likelihood::Gaussian) return;
  for (int d = 0; d < q_; ++d) {
    const auto c = tau_conditional(d);
    state_.tau(d) = gamma_shape_rate(rng_, c.shape, c.rate);
  }
}

void Chain::update_tau_s() {
  const auto c = tau_s_conditional();
  state_.tau_s = gamma_shape_rate(rng_, c.shape, c.rate);
}

// ---- rho ----

double Chain::log_ratio_rho(const Eigen::VectorXd& rho_star) const {
  for (int d = 0; d < q_; ++d)
    if (!(rho_star(d) > 0.0 && rho_star(d) < 1.0)) return kNegInf;
  const auto proposal = bundle_for_rho(rho_star);
  return rho_ratio_from(proposal, rho_star, nullptr);
}

double Chain::rho_proposal_terms(const Eigen::VectorXd& rho_star) const {
  double lr = 0.0;
  for (int d = 0; d < q_; ++d) {
    lr += std::log(rho_star(d)) + std::log1p(-rho_star(d));
    lr -= std::log(state_.rho(d)) + std::log1p(-state_.rho(d));
  }
  return lr;
}

double Chain::rho_ratio_from(const CovarianceBundle& proposal, const Eigen::VectorXd& rho_star,
                             Eigen::VectorXi* labels_out) const {
  double lr = -0.5 * (proposal.quadratic_form(state_.gamma) - bundle_.quadratic_form(state_.gamma));
  lr += -0.5 * (proposal.log_det() - bundle_.log_det());
  lr += rho_proposal_terms(rho_star);
  Eigen::VectorXd cdf(N());
  const auto& sds = proposal.marginal_sds();
  for (int o = 0; o < N(); ++o) cdf(o) = marginal_cdf(state_.gamma(o), sds(o));
  lr += relabel_delta(cdf, sticks_.cumulative, labels_out);
  return lr;
}

void Chain::commit_bundle(CovarianceBundle bundle, const Eigen::VectorXi& labels) {
  bundle_ = std::move(bundle);
  precision_ = bundle_.precision();
  precision_gamma_ = precision_ * state_.gamma;
  const auto& sds = bundle_.marginal_sds();
  for (int o = 0; o < N(); ++o) cdf_(o) = marginal_cdf(state_.gamma(o), sds(o));
  state_.u = labels;
}

void Chain::update_rho() {
  std::vector<std::vector<int>> groups;
  if (config_.joint_rho) {
    groups.emplace_back();
    for (int d = 0; d < q_; ++d) groups.back().push_back(d);
  } else {
    for (int d = 0; d < q_; ++d) groups.push_back({d});
  }
  double accepted = 0.0;
  for (const auto& group : groups) {
    Eigen::VectorXd rho_star = state_.rho;
    for (int d : group) rho_star(d) = inv_logit(logit(state_.rho(d)) + steps_.rho * std_normal(rng_));
    acceptance_.rho.proposed += 1.0;
    bool valid = true;
    for (int d : group) valid = valid && rho_star(d) > 0.0 && rho_star(d) < 1.0;
    if (!valid) continue;
    auto proposal = bundle_for_rho(rho_star);
    Eigen::VectorXi labels;
    const double lr = rho_ratio_from(proposal, rho_star, &labels);
    check_finite(lr, "rho");
    if (!accept(lr)) continue;
    accepted += 1.0;
    acceptance_.rho.accepted += 1.0;
    state_.rho = rho_star;
    commit_bundle(std::move(proposal), labels);
  }
  if (adapting_)
    steps_.rho *= std::exp(adapt_gain_ * (accepted / static_cast<double>(groups.size()) - config_.target_acceptance));
}

// ---- whitened rho and A ----

Eigen::VectorXd Chain::transport_to(const CovarianceBundle& proposal) const {
  const Eigen::MatrixXd W = Eigen::Map<const Eigen::MatrixXd>(state_.gamma.data(), n_, q_) *
                            bundle_.mixer().A_inverse().transpose();
  Eigen::MatrixXd W_star(n_, q_);
  for (int d = 0; d < q_; ++d) {
    const Eigen::VectorXd z = bundle_.factor(d).cholesky().matrixU() * W.col(d);
    W_star.col(d) = proposal.factor(d).cholesky().matrixU().solve(z);
  }
  const Eigen::MatrixXd G = W_star * proposal.mixer().A().transpose();
  return Eigen::Map<const Eigen::VectorXd>(G.data(), N());
}

Eigen::VectorXd Chain::transport_gamma(const Eigen::VectorXd& rho_star, const Eigen::MatrixXd& A_star) const {
  return transport_to(bundle_for_rho(rho_star).with_mixer(mixer_from(A_star)));
}

// The Gaussian density ratio of gamma and the Jacobian of the transport cancel.
double Chain::transported_relabel_delta(const CovarianceBundle& proposal, const Eigen::VectorXd& gamma_star,
                                        Eigen::VectorXi* labels_out) const {
  Eigen::VectorXd cdf(N());
  const auto& sds = proposal.marginal_sds();
  for (int o = 0; o < N(); ++o) cdf(o) = marginal_cdf(gamma_star(o), sds(o));
  double delta = 0.0;
  if (labels_out) labels_out->resize(N());
  for (int o = 0; o < N(); ++o) {
    const int u_new = cluster_of(cdf(o), sticks_.cumulative);
    if (labels_out) (*labels_out)(o) = u_new;
    delta += obs_loglik(o, state_.theta(u_new)) - obs_loglik(o, state_.theta(state_.u(o)));
  }
  return delta;
}

double Chain::log_ratio_rho_whitened(const Eigen::VectorXd& rho_star) const {
  for (int d = 0; d < q_; ++d)
    if (!(rho_star(d) > 0.0 && rho_star(d) < 1.0)) return kNegInf;
  const auto proposal = bundle_for_rho(rho_star);
  return rho_proposal_terms(rho_star) + transported_relabel_delta(proposal, transport_to(proposal), nullptr);
}

double Chain::log_ratio_mixer_whitened(const Eigen::MatrixXd& A_star) const {
  for (int d = 0; d < q_; ++d)
    if (!(A_star(d, d) > 0.0) || !std::isfinite(A_star(d, d))) return kNegInf;
  const auto proposal = bundle_.with_mixer(mixer_from(A_star));
  double lr = log_mixer_prior(proposal.mixer().A()) - log_mixer_prior(state_.A);
  for (int d = 0; d < q_; ++d) lr += std::log(proposal.mixer().A()(d, d)) - std::log(state_.A(d, d));
  return lr + transported_relabel_delta(proposal, transport_to(proposal), nullptr);
}

void Chain::update_rho_whitened() {
  Eigen::VectorXd rho_star = state_.rho;
  for (int d = 0; d < q_; ++d) rho_star(d) = inv_logit(logit(state_.rho(d)) + steps_.rho_whitened * std_normal(rng_));
  acceptance_.rho_whitened.proposed += 1.0;
  bool ok = false;
  if ((rho_star.array() > 0.0).all() && (rho_star.array() < 1.0).all()) {
    auto proposal = bundle_for_rho(rho_star);
    Eigen::VectorXd gamma_star = transport_to(proposal);
    Eigen::VectorXi labels;
    const double lr = rho_proposal_terms(rho_star) + transported_relabel_delta(proposal, gamma_star, &labels);
    check_finite(lr, "rho (whitened)");
    ok = accept(lr);
    if (ok) {
      acceptance_.rho_whitened.accepted += 1.0;
      state_.rho = rho_star;
      state_.gamma = std::move(gamma_star);
      commit_bundle(std::move(proposal), labels);
    }
  }
  if (adapting_)
    steps_.rho_whitened *= std::exp(adapt_gain_ * ((ok ? 1.0 : 0.0) - config_.target_acceptance));
}

void Chain::update_mixer_whitened() {
  Eigen::MatrixXd A_star = state_.A;
  for (int d = 0; d < q_; ++d) {
    A_star(d, d) = std::exp(std::log(state_.A(d, d)) + steps_.mixer_whitened * std_normal(rng_));
    if (is_joint(model_))
      for (int h = 0; h < d; ++h) A_star(d, h) = state_.A(d, h) + steps_.mixer_whitened * std_normal(rng_);
  }
  acceptance_.mixer_whitened.proposed += 1.0;
  auto proposal = bundle_.with_mixer(mixer_from(A_star));
  const Eigen::MatrixXd& A_new = proposal.mixer().A();
  Eigen::VectorXd gamma_star = transport_to(proposal);
  Eigen::VectorXi labels;
  double lr = log_mixer_prior(A_new) - log_mixer_prior(state_.A);
  for (int d = 0; d < q_; ++d) lr += std::log(A_new(d, d)) - std::log(state_.A(d, d));
  lr += transported_relabel_delta(proposal, gamma_star, &labels);
  check_finite(lr, "A (whitened)");
  const bool ok = accept(lr);
  if (ok) {
    acceptance_.mixer_whitened.accepted += 1.0;
    state_.A = A_new;
    state_.gamma = std::move(gamma_star);
    commit_bundle(std::move(proposal), labels);
  }
  if (adapting_)
    steps_.mixer_whitened *= std::exp(adapt_gain_ * ((ok ? 1.0 : 0.0) - config_.target_acceptance));
}

// ---- A ----

double Chain::log_mixer_prior(const Eigen::MatrixXd& A) const {
  if (is_joint(model_)) {
    const Eigen::MatrixXd L = A.triangularView<Eigen::Lower>();
    return log_inverse_wishart(L * L.transpose(), nu_, R_) + log_cholesky_jacobian(L);
  }
  // a_dd^2 ~ IG(a_v, b_v), expressed as a density on a_dd.
  double lp = 0.0;
  for (int d = 0; d < q_; ++d) {
    const double v = A(d, d) * A(d, d);
    lp += -(config_.priors.a_v + 1.0) * std::log(v) - config_.priors.b_v / v + std::log(2.0 * A(d, d));
  }
  return lp;
}

double Chain::log_ratio_mixer(const Eigen::MatrixXd& A_star) const {
  for (int d = 0; d < q_; ++d)
    if (!(A_star(d, d) > 0.0) || !std::isfinite(A_star(d, d))) return kNegInf;
  return mixer_ratio_from(bundle_.with_mixer(mixer_from(A_star)), nullptr);
}

double Chain::mixer_ratio_from(const CovarianceBundle& proposal, Eigen::VectorXi* labels_out) const {
  const auto& A_star = proposal.mixer().A();
  const auto& A = state_.A;
  double lr = -0.5 * (proposal.quadratic_form(state_.gamma) - bundle_.quadratic_form(state_.gamma));
  lr += -0.5 * (proposal.log_det() - bundle_.log_det());
  lr += log_mixer_prior(A_star) - log_mixer_prior(A);
  for (int d = 0; d < q_; ++d) lr += std::log(A_star(d, d)) - std::log(A(d, d));
  Eigen::VectorXd cdf(N());
  const auto& sds = proposal.marginal_sds();
  for (int o = 0; o < N(); ++o) cdf(o) = marginal_cdf(state_.gamma(o), sds(o));
  lr += relabel_delta(cdf, sticks_.cumulative, labels_out);
  return lr;
}

void Chain::update_mixer() {
  Eigen::MatrixXd A_star = state_.A;
  for (int d = 0; d < q_; ++d) {
    A_star(d, d) = std::exp(std::log(state_.A(d, d)) + steps_.mixer_diag * std_normal(rng_));
    if (is_joint(model_))
      for (int h = 0; h < d; ++h) A_star(d, h) = state_.A(d, h) + steps_.mixer_offdiag * std_normal(rng_);
  }
  acceptance_.mixer.proposed += 1.0;
  auto proposal = bundle_.with_mixer(mixer_from(A_star));
  Eigen::VectorXi labels;
  const double lr = mixer_ratio_from(proposal, &labels);
  check_finite(lr, "A");
  const bool ok = accept(lr);
  if (ok) {
    acceptance_.mixer.accepted += 1.0;
    state_.A = proposal.mixer().A();
    commit_bundle(std::move(proposal), labels);
  }
  if (adapting_) {
    const double factor = std::exp(adapt_gain_ * ((ok ? 1.0 : 0.0) - config_.target_acceptance));
    steps_.mixer_diag *= factor;
    steps_.mixer_offdiag *= factor;
  }
}

void Chain::sweep(int iteration) {
  adapting_ = config_.adapt && iteration < config_.burn_in;
  adapt_gain_ = std::pow(static_cast<double>(iteration) + 1.0, -0.6);
  update_beta();
  update_theta();
  if (config_.location_shift) update_location();
  update_gamma();
  update_sticks();
  update_tau();
  update_tau_s();
  update_rho();
  update_mixer();
  if (config_.whitened_moves) {
    update_rho_whitened();
    update_mixer_whitened();
  }
  if (!std::isfinite(state_.tau_s) || (state_.tau.size() > 0 && !state_.tau.allFinite()) || !state_.theta.allFinite() ||
      !state_.gamma.allFinite())
    throw NumericalError(fmt::format("non-finite chain state after iteration {}", iteration));
}

// ---- driver ----

int PosteriorSamples::total_draws() const {
  int total = 0;
  for (const auto& c : chains) total += c.draws();
  return total;
}

int PosteriorSamples::n_coefficients() const {
  int total = 0;
  for (const auto& c : covariates) total += static_cast<int>(c.size());
  return total;
}

int PosteriorSamples::coefficient_offset(int d) const {
  int offset = 0;
  for (int e = 0; e < d; ++e) offset += static_cast<int>(covariates.at(static_cast<std::size_t>(e)).size());
  return offset;
}

Eigen::VectorXd PosteriorSamples::phi(int chain, int draw) const {
  const auto& c = chains.at(static_cast<std::size_t>(chain));
  const Eigen::VectorXi labels = c.labels.row(draw).transpose();
  return extract_phi(labels, c.theta.row(draw).transpose());
}

namespace {
Eigen::VectorXd column_of(const ChainSamples& c, std::string_view block, int column) {
  const Eigen::MatrixXd* m = nullptr;
  if (block == "beta") m = &c.beta;
  else if (block == "theta") m = &c.theta;
  else if (block == "tau") m = &c.tau;
  else if (block == "rho") m = &c.rho;
  else if (block == "A") m = &c.A;
  else if (block == "tau_s") {
    if (column != 0) throw std::out_of_range("tau_s has a single column");
    return c.tau_s;
  } else {
    throw std::invalid_argument(fmt::format("unknown parameter block '{}'", block));
  }
  if (column < 0 || column >= m->cols()) throw std::out_of_range(fmt::format("{} has no column {}", block, column));
  return m->col(column);
}
}  // namespace

Eigen::VectorXd PosteriorSamples::pooled(std::string_view block, int column) const {
  Eigen::VectorXd out(total_draws());
  Eigen::Index at = 0;
  for (const auto& c : chains) {
    const auto col = column_of(c, block, column);
    out.segment(at, col.size()) = col;
    at += col.size();
  }
  return out;
}

std::vector<Eigen::VectorXd> PosteriorSamples::per_chain(std::string_view block, int column) const {
  std::vector<Eigen::VectorXd> out;
  for (const auto& c : chains) out.push_back(column_of(c, block, column));
  return out;
}

ChainSamples run_chain(const RegionGraph& graph, const Dataset& data, SpatialModel model, const SamplerConfig& config,
                       std::uint64_t chain_id, const std::vector<RegionIndex>& order) {
  const auto start = std::chrono::steady_clock::now();
  Chain chain(graph, data, model, config, chain_id, order);
  const int q = data.q();
  const int draws = config.draws_per_chain();
  int p_total = 0;
  for (const auto& dd : data.diseases) p_total += static_cast<int>(dd.X.cols());
  ChainSamples out;
  out.iterations.reserve(static_cast<std::size_t>(draws));
  out.beta.resize(draws, p_total);
  out.theta.resize(draws, config.K);
  out.labels.resize(draws, data.N());
  out.tau.resize(draws, data.likelihood == Likelihood::Gaussian ? q : 0);
  out.tau_s.resize(draws);
  out.rho.resize(draws, q);
  out.A.resize(draws, q * (q + 1) / 2);

  int row = 0;
  for (int it = 0; it < config.iterations; ++it) {
    if (it == config.burn_in) chain.reset_acceptance();
    chain.sweep(it);
    if (it < config.burn_in || (it - config.burn_in) % config.thin != 0 || row >= draws) continue;
    const auto& s = chain.state();
    out.iterations.push_back(it + 1);
    int col = 0;
    for (const auto& b : s.beta)
      for (Eigen::Index j = 0; j < b.size(); ++j) out.beta(row, col++) = b(j);
    out.theta.row(row) = s.theta.transpose();
    out.labels.row(row) = s.u.transpose();
    if (out.tau.cols() > 0) out.tau.row(row) = s.tau.transpose();
    out.tau_s(row) = s.tau_s;
    out.rho.row(row) = s.rho.transpose();
    col = 0;
    for (int d = 0; d < q; ++d)
      for (int h = 0; h <= d; ++h) out.A(row, col++) = s.A(d, h);
    ++row;
  }
  out.acceptance = chain.acceptance();
  out.final_steps = chain.steps();
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

PosteriorSamples run_chains(const RegionGraph& graph, const Dataset& data, SpatialModel model,
                            const SamplerConfig& config, int workers, const std::vector<RegionIndex>& order) {
  config.validate();
  data.validate();
  PosteriorSamples post;
  post.model = model;
  post.likelihood = data.likelihood;
  post.n = data.n();
  post.q = data.q();
  post.K = config.K;
  post.regions = data.regions;
  for (const auto& dd : data.diseases) {
    post.diseases.push_back(dd.name);
    post.covariates.push_back(dd.covariate_names);
  }
  post.chains.resize(static_cast<std::size_t>(config.n_chains));

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (int c = next++; c < config.n_chains; c = next++) {
      try {
        post.chains[static_cast<std::size_t>(c)] = run_chain(graph, data, model, config, static_cast<std::uint64_t>(c), order);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min(workers, config.n_chains));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  return post;
}

}  // namespace mardp

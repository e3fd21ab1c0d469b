#pragma once

#include "mardp/covariance.hpp"
#include "mardp/dirichlet.hpp"
#include "mardp/graph.hpp"
#include "mardp/likelihood.hpp"
#include "mardp/random.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mardp {

/// How Sigma_gamma is specified: joint (full lower-triangular mixer) or
/// independent-disease (diagonal mixer), with DAGAR or proper-CAR precisions.
enum class SpatialModel { MDAGAR, MCAR, DAGAR_ind, CAR_ind };

std::string_view to_string(SpatialModel model);
SpatialModel parse_spatial_model(std::string_view name);
bool is_joint(SpatialModel model);
bool uses_dagar(SpatialModel model);

/// Builds Q(rho) for one spatial family on a fixed graph.
class PrecisionFamily {
 public:
  PrecisionFamily(const RegionGraph& graph, SpatialModel model, const std::vector<RegionIndex>& order);
  Eigen::MatrixXd operator()(double rho) const;

 private:
  bool dagar_;
  DirectedNeighborSets dns_;
  Eigen::MatrixXd adjacency_;
  Eigen::VectorXd degree_;
};

struct Priors {
  double a_e = 2.0, b_e = 0.1;  // 1/tau_d ~ IG(a_e, b_e)
  double a_s = 2.0, b_s = 0.1;  // 1/tau_s ~ IG(a_s, b_s)
  double sigma2_beta = 1000.0;  // beta_d ~ N(0, sigma2_beta I)
  std::optional<double> nu;     // IW degrees of freedom; default q
  std::optional<Eigen::MatrixXd> R;  // IW scale; default 0.1 I_q
  double a_v = 2.0, b_v = 0.1;  // a_dd^2 ~ IG(a_v, b_v), independent-disease models
};

/// Random-walk scales. gamma has one scale per disease; beta and theta scales
/// are used only by the Poisson random-walk updates.
struct StepSizes {
  std::vector<double> gamma;
  double stick = 0.05;
  double rho = 0.5;
  double mixer_diag = 0.1;
  double mixer_offdiag = 0.1;
  double rho_whitened = 0.5;
  double mixer_whitened = 0.1;
  std::vector<std::vector<double>> beta;
  std::vector<double> theta;
};

struct SamplerConfig {
  int K = 15;
  double alpha = 1.0;
  Priors priors;
  int iterations = 10000;  // total per chain, burn-in included
  int burn_in = 5000;
  int thin = 1;
  int n_chains = 2;
  std::uint64_t seed = 1;
  double initial_gamma_step = 0.5;
  double target_acceptance = 0.35;
  bool adapt = true;           // Robbins-Monro scaling, burn-in only
  bool joint_rho = true;       // one accept/reject for all rho_d
  bool location_shift = true;  // exact draw along intercepts + c, atoms - c
  bool gamma_gibbs = true;     // exact interval-mixture draw of gamma_o; false: random walk
  bool whitened_moves = true;  // extra rho and A moves that carry gamma along
  bool use_likelihood = true;  // false samples the prior (testing)

  int draws_per_chain() const { return (iterations - burn_in) / thin; }
  void validate() const;  // throws std::invalid_argument
};

struct ChainState {
  std::vector<Eigen::VectorXd> beta;
  Eigen::VectorXd theta;  // K atoms
  Eigen::VectorXd V;      // K breaks, V(K-1) = 1
  Eigen::VectorXd gamma;  // N latent values, disease-major
  Eigen::VectorXi u;      // N labels, 0-based
  Eigen::VectorXd tau;    // q noise precisions (Gaussian), empty for Poisson
  double tau_s = 1.0;
  Eigen::VectorXd rho;    // q
  Eigen::MatrixXd A;      // q x q lower triangular
};

struct BlockAcceptance {
  double accepted = 0.0;
  double proposed = 0.0;
  double rate() const { return proposed > 0.0 ? accepted / proposed : 0.0; }
};

struct AcceptanceRates {
  BlockAcceptance gamma, stick, rho, mixer, beta, theta, rho_whitened, mixer_whitened;
};

/// One MCMC chain over the MARDP posterior. The blocks follow the
/// Gibbs/Metropolis scheme: beta, theta, gamma, V, tau, tau_s, rho, A.
class Chain {
 public:
  Chain(const RegionGraph& graph, const Dataset& data, SpatialModel model, const SamplerConfig& config,
        std::uint64_t chain_id, std::vector<RegionIndex> order = {});

  const ChainState& state() const noexcept { return state_; }
  /// Replaces the state; labels are recomputed from gamma and the caches rebuilt.
  void set_state(ChainState state);

  const CovarianceBundle& bundle() const noexcept { return bundle_; }
  const StickBreaking& sticks() const noexcept { return sticks_; }
  StepSizes& steps() noexcept { return steps_; }
  const StepSizes& steps() const noexcept { return steps_; }
  const AcceptanceRates& acceptance() const noexcept { return acceptance_; }
  void reset_acceptance() { acceptance_ = {}; }
  Rng& rng() noexcept { return rng_; }
  SpatialModel model() const noexcept { return model_; }
  int n() const noexcept { return n_; }
  int q() const noexcept { return q_; }
  int N() const noexcept { return n_ * q_; }
  int K() const noexcept { return config_.K; }

  /// One full sweep; `iteration` < burn_in enables step-size adaptation.
  void sweep(int iteration);

  void update_beta();
  void update_theta();
  void update_gamma();  // dispatches on config.gamma_gibbs
  void update_gamma_gibbs();
  void update_gamma_random_walk();
  void update_sticks();
  void update_tau();
  void update_tau_s();
  void update_rho();
  void update_mixer();
  /// Adds c to every intercept and subtracts it from every atom; the
  /// likelihood is unchanged, so c is drawn from its normal conditional.
  /// No-op unless every disease has a column of ones.
  void update_location();
  /// rho and A moves that hold the whitened field z fixed, where
  /// gamma = (A (x) I) blockdiag(L_d^{-T}) z and Q_d = L_d L_d^T.
  void update_rho_whitened();
  void update_mixer_whitened();
  /// gamma mapped to the same z under the proposed rho and A.
  Eigen::VectorXd transport_gamma(const Eigen::VectorXd& rho_star, const Eigen::MatrixXd& A_star) const;

  // Log Metropolis-Hastings ratios for a proposed value, proposal-density
  // corrections included; acceptance probability is min(1, exp(.)).
  double log_ratio_gamma(int o, double gamma_star) const;
  double log_ratio_stick(int k, double v_star) const;
  double log_ratio_rho(const Eigen::VectorXd& rho_star) const;
  double log_ratio_mixer(const Eigen::MatrixXd& A_star) const;
  double log_ratio_beta(int d, const Eigen::VectorXd& beta_star) const;  // Poisson random walk
  double log_ratio_theta(int j, double theta_star) const;                // Poisson random walk
  // Whitened moves; gamma moves to transport_gamma(...).
  double log_ratio_rho_whitened(const Eigen::VectorXd& rho_star) const;
  double log_ratio_mixer_whitened(const Eigen::MatrixXd& A_star) const;

  struct NormalConditional {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
  };
  struct GammaConditional {
    double shape;
    double rate;
  };
  // Full conditionals of the conjugate Gaussian-likelihood blocks.
  NormalConditional beta_conditional(int d) const;
  std::pair<double, double> theta_conditional(int j) const;  // mean, variance
  GammaConditional tau_conditional(int d) const;
  GammaConditional tau_s_conditional() const;
  std::pair<double, double> location_conditional() const;  // mean, variance of c
  /// Prior conditional of gamma_o given the rest: mean, variance.
  std::pair<double, double> gamma_prior_conditional(int o) const;
  bool has_location_move() const noexcept { return !intercept_col_.empty(); }

  /// Log prior of the mixer (IW on AA^T with Cholesky Jacobian, or the
  /// independent IG prior on a_dd^2), up to a constant.
  double log_mixer_prior(const Eigen::MatrixXd& A) const;
  /// Log-likelihood of observation o at spatial effect phi.
  double obs_loglik(int o, double phi) const;
  double total_loglik() const;

 private:
  void initialize();
  void rebuild_caches();
  void refresh_linear_predictor(int d);
  double rho_ratio_from(const CovarianceBundle& proposal, const Eigen::VectorXd& rho_star, Eigen::VectorXi* labels_out) const;
  double mixer_ratio_from(const CovarianceBundle& proposal, Eigen::VectorXi* labels_out) const;
  void commit_bundle(CovarianceBundle bundle, const Eigen::VectorXi& labels);
  Eigen::VectorXd transport_to(const CovarianceBundle& proposal) const;
  double transported_relabel_delta(const CovarianceBundle& proposal, const Eigen::VectorXd& gamma_star,
                                   Eigen::VectorXi* labels_out) const;
  double rho_proposal_terms(const Eigen::VectorXd& rho_star) const;
  double relabel_delta(const Eigen::VectorXd& cdf, const Eigen::VectorXd& cumulative, Eigen::VectorXi* labels_out) const;
  CovarianceBundle bundle_for_rho(const Eigen::VectorXd& rho) const;
  DiseaseMixer mixer_from(const Eigen::MatrixXd& A) const;
  bool accept(double log_ratio);

  const RegionGraph& graph_;
  const Dataset& data_;
  SpatialModel model_;
  SamplerConfig config_;
  PrecisionFamily family_;
  Rng rng_;
  int n_ = 0, q_ = 0;
  Eigen::MatrixXd R_;
  double nu_ = 2.0;
  std::vector<Eigen::Index> intercept_col_;  // per disease; empty when some disease lacks one

  ChainState state_;
  StepSizes steps_;
  AcceptanceRates acceptance_;
  bool adapting_ = false;
  double adapt_gain_ = 0.0;

  // Flattened data and caches.
  Eigen::VectorXd y_, E_, log_E_, lgamma_y1_;
  Eigen::VectorXd xb_;   // x_id^T beta_d
  CovarianceBundle bundle_;
  Eigen::MatrixXd precision_;
  Eigen::VectorXd precision_gamma_;
  Eigen::VectorXd cdf_;  // F(gamma_o / sd_o)
  StickBreaking sticks_;
};

struct ChainSamples {
  std::vector<int> iterations;
  Eigen::MatrixXd beta;  // draws x sum_d p_d
  Eigen::MatrixXd theta;  // draws x K
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> labels;  // draws x N, 0-based
  Eigen::MatrixXd tau;    // draws x q (0 columns for Poisson)
  Eigen::VectorXd tau_s;
  Eigen::MatrixXd rho;  // draws x q
  Eigen::MatrixXd A;    // draws x q(q+1)/2, lower triangle row by row
  AcceptanceRates acceptance;  // post burn-in
  StepSizes final_steps;
  double wall_seconds = 0.0;

  int draws() const { return static_cast<int>(iterations.size()); }
};

struct PosteriorSamples {
  SpatialModel model = SpatialModel::MDAGAR;
  Likelihood likelihood = Likelihood::Gaussian;
  int n = 0, q = 0, K = 0;
  std::vector<std::string> regions;
  std::vector<std::string> diseases;
  std::vector<std::vector<std::string>> covariates;  // per disease
  std::vector<ChainSamples> chains;

  int total_draws() const;
  int n_coefficients() const;
  int coefficient_offset(int d) const;  // column of beta_d[0] in ChainSamples::beta
  /// Spatial effects of one draw: phi_o = theta[u_o].
  Eigen::VectorXd phi(int chain, int draw) const;
  /// One column of a parameter block pooled over chains. Blocks: beta, theta,
  /// tau, tau_s, rho, A.
  Eigen::VectorXd pooled(std::string_view block, int column) const;
  /// Same column, one vector per chain.
  std::vector<Eigen::VectorXd> per_chain(std::string_view block, int column) const;
};

ChainSamples run_chain(const RegionGraph& graph, const Dataset& data, SpatialModel model, const SamplerConfig& config,
                       std::uint64_t chain_id, const std::vector<RegionIndex>& order = {});

/// Runs config.n_chains independent chains on up to `workers` threads.
PosteriorSamples run_chains(const RegionGraph& graph, const Dataset& data, SpatialModel model,
                            const SamplerConfig& config, int workers = 1, const std::vector<RegionIndex>& order = {});

/// log-density of the inverse-Wishart IW(W | nu, R) up to a constant.
double log_inverse_wishart(const Eigen::MatrixXd& W, double nu, const Eigen::MatrixXd& R);
/// log of the Jacobian 2^q prod_d a_dd^{q-d+1} of W = A A^T.
double log_cholesky_jacobian(const Eigen::MatrixXd& A);

}  // namespace mardp

#pragma once

#include "mardp/likelihood.hpp"
#include "mardp/sampler.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mardp {

struct DScore {
  Eigen::VectorXd G, P, D;  // per disease
  double G_sum = 0.0, P_sum = 0.0, D_sum = 0.0;
  int draws = 0;
  bool few_draws = false;  // fewer than 100 replicates
};

/// G and P from replicate draws (L x N) against observations y (N), grouped
/// into q disease blocks of equal length. Variance uses the 1/(L-1) divisor.
DScore d_score_from_replicates(const Eigen::VectorXd& y, const Eigen::MatrixXd& replicates, int q);

/// Draws one replicate per retained draw. Gaussian: N(x'beta + phi, 1/tau);
/// Poisson: Y_rep / E with Y_rep ~ Poisson(E exp(x'beta + phi)), compared
/// against y / E. Replicates use stream kReplicateStream + chain of `seed`.
DScore d_score(const PosteriorSamples& samples, const Dataset& data, std::uint64_t seed);
inline constexpr std::uint64_t kReplicateStream = 1'000'003;

/// Mean vector x'beta + phi of one draw, disease-major.
Eigen::VectorXd draw_mean(const PosteriorSamples& samples, const Dataset& data, int chain, int draw);

/// KL(N(m0, diag v0) || N(m1, diag v1)).
double gaussian_kl(const Eigen::VectorXd& mean0, const Eigen::VectorXd& var0, const Eigen::VectorXd& mean1,
                   const Eigen::VectorXd& var1);

/// KL from the true Gaussian model to each retained draw's model (pooled over
/// chains). `true_tau` has one precision per disease.
Eigen::VectorXd posterior_kl(const PosteriorSamples& samples, const Dataset& data, const Eigen::VectorXd& true_mean,
                             const Eigen::VectorXd& true_tau);

struct SensSpec {
  double sensitivity = 0.0;
  double specificity = 0.0;
};

/// Flags aligned with a common item list.
SensSpec sensitivity_specificity(const std::vector<bool>& selected, const std::vector<bool>& truth);
/// Edge-set form; order of the lists is irrelevant.
using Edge = std::pair<int, int>;
SensSpec sensitivity_specificity(const std::vector<Edge>& selected, const std::vector<Edge>& truth,
                                 const std::vector<Edge>& all);

struct PosteriorSummary {
  double mean = 0.0;
  double lower = 0.0;  // 2.5%
  double upper = 0.0;  // 97.5%
};
PosteriorSummary summarize(const Eigen::VectorXd& draws);

struct CoverageMse {
  double coverage = 0.0;  // fraction of intervals containing the truth
  double mse = 0.0;       // mean squared error of posterior means
  int datasets = 0;
};
CoverageMse coverage_and_mse(const std::vector<PosteriorSummary>& per_dataset, double truth);

struct MoranResult {
  std::optional<double> I;
  std::string reason;  // set when I is missing
  double weight_sum = 0.0;
};
/// Moran's I with a symmetric binary weight matrix.
MoranResult moran_i(const Eigen::VectorXd& values, const Eigen::MatrixXd& weights);
std::vector<MoranResult> moran_correlogram(const Eigen::VectorXd& values, const std::vector<Eigen::MatrixXd>& bands);

}  // namespace mardp

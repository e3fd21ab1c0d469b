#pragma once

#include "mardp/graph.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mardp {

enum class Likelihood { Gaussian, Poisson };

std::string_view to_string(Likelihood likelihood);
Likelihood parse_likelihood(std::string_view name);

inline constexpr std::string_view kInterceptName = "(Intercept)";

struct DiseaseData {
  std::string name;
  Eigen::VectorXd y;  // outcome per region
  Eigen::VectorXd E;  // expected counts (Poisson only; empty otherwise)
  Eigen::MatrixXd X;  // n x p_d design, intercept column first when present
  std::vector<std::string> covariate_names;
};

/// Outcomes for q diseases over n regions. Observation index o = d*n + i.
struct Dataset {
  Likelihood likelihood = Likelihood::Gaussian;
  std::vector<std::string> regions;
  std::vector<DiseaseData> diseases;

  int n() const noexcept { return static_cast<int>(regions.size()); }
  int q() const noexcept { return static_cast<int>(diseases.size()); }
  int N() const noexcept { return n() * q(); }
  int disease_index(std::string_view name) const;  // throws DataError

  /// Throws DataError on shape mismatch, nonpositive E, or negative/non-integer counts.
  void validate() const;
};

double gaussian_loglik(double y, double mean, double tau);
double gaussian_loglik(double y, std::span<const double> x, std::span<const double> beta, double phi, double tau);
/// log Poisson(y | E exp(eta)), including -log(y!).
double poisson_loglik(double y, double E, double eta);
double poisson_loglik(double y, double E, std::span<const double> x, std::span<const double> beta, double phi);

/// Case counts per (region, stratum) for each disease, and population per (region, stratum).
struct StratifiedCounts {
  std::vector<std::string> regions;
  std::vector<std::string> diseases;
  std::vector<std::string> strata;
  std::vector<Eigen::MatrixXd> cases;  // per disease: n x m
  Eigen::MatrixXd population;          // n x m

  int n() const noexcept { return static_cast<int>(regions.size()); }
  int q() const noexcept { return static_cast<int>(diseases.size()); }
  int m() const noexcept { return static_cast<int>(strata.size()); }
};

/// Indirect standardisation: c_d^k = sum_i Y_id^k / sum_i N_i^k and
/// E_id = sum_k c_d^k N_i^k. Returns an n x q matrix.
Eigen::MatrixXd expected_counts(const StratifiedCounts& strata);

/// Observed totals Y_id = sum_k Y_id^k, n x q.
Eigen::MatrixXd observed_counts(const StratifiedCounts& strata);

/// Dataset CSV with header `region,disease,y[,E][,x1,...]`. Rows may come in
/// any order but every (region, disease) pair must appear exactly once.
Dataset read_dataset(const std::filesystem::path& path, const RegionGraph& graph, Likelihood likelihood,
                     bool add_intercept = true);
void write_dataset(const std::filesystem::path& path, const Dataset& data);

/// Strata CSVs: `region,disease,stratum,cases` and `region,stratum,population`.
StratifiedCounts read_strata(const std::filesystem::path& cases, const std::filesystem::path& population,
                             const RegionGraph& graph);

}  // namespace mardp

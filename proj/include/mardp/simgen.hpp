#pragma once

#include "mardp/boundary.hpp"
#include "mardp/covariance.hpp"
#include "mardp/graph.hpp"
#include "mardp/likelihood.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace mardp {

/// Seed of the reference truth shipped with the examples.
inline constexpr std::uint64_t kCanonicalSeed = 93422;

struct SimulationConfig {
  int K = 15;
  double alpha = 1.0;
  double tau_s = 0.25;
  Eigen::MatrixXd A = (Eigen::MatrixXd(2, 2) << 1.0, 0.0, 1.0, 1.0).finished();
  Eigen::VectorXd rho = Eigen::Vector2d(0.2, 0.8);
  std::vector<Eigen::VectorXd> beta = {Eigen::Vector2d(2.0, 5.0), Eigen::Vector2d(1.0, 6.0)};  // intercept first
  Eigen::VectorXd tau = Eigen::Vector2d(10.0, 10.0);
  DistanceScale scale = DistanceScale::unit(1000.0);  // projected metres -> km
  std::vector<std::string> diseases = {"disease1", "disease2"};

  int q() const { return static_cast<int>(A.rows()); }
  void validate() const;  // throws std::invalid_argument
};

struct SimulationTruth {
  SimulationConfig config;
  std::uint64_t seed = 0;
  std::vector<std::string> regions;
  std::vector<Eigen::MatrixXd> X;  // per disease n x p, intercept column first
  Eigen::VectorXd V, p, theta;
  Eigen::VectorXd gamma;   // disease-major
  Eigen::VectorXi labels;  // 0-based
  Eigen::VectorXd phi;

  int n() const { return static_cast<int>(regions.size()); }
  int q() const { return config.q(); }
  /// x'beta + phi, disease-major.
  Eigen::VectorXd mean() const;
  int n_levels() const;  // distinct atoms in use
};

/// Draw order from stream 0 of `seed`: covariates, sticks, atoms, gamma.
SimulationTruth generate_truth(const RegionGraph& graph, const SimulationConfig& config, std::uint64_t seed);

/// Replicate r (0-based) uses stream r + 1 of the truth seed.
Dataset generate_dataset(const SimulationTruth& truth, int replicate);
std::vector<Dataset> generate_datasets(const SimulationTruth& truth, int replicates);

/// True flags for a query, aligned with edge_probabilities items.
std::vector<bool> true_boundaries(const SimulationTruth& truth, const RegionGraph& graph, BoundaryQuery query);

nlohmann::json truth_json(const SimulationTruth& truth, const RegionGraph& graph);
SimulationTruth truth_from_json(const nlohmann::json& j);
void write_truth(const std::filesystem::path& path, const SimulationTruth& truth, const RegionGraph& graph);
SimulationTruth read_truth(const std::filesystem::path& path);

}  // namespace mardp

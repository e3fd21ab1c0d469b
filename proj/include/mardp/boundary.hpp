#pragma once

#include "mardp/graph.hpp"
#include "mardp/sampler.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mardp {

/// Label-inequality events, for an edge i ~ j with i < j unless noted.
///   Within(d):          u_id != u_jd
///   Shared(d,e):        u_id != u_jd and u_ie != u_je
///   Cross(d,e):         u_id != u_je and u_ie != u_jd   (mutual)
///   DirectedCross(d,e): u_id != u_je
///   WithinRegion(d,e):  u_id != u_ie, one item per region
enum class QueryKind { Within, Shared, Cross, DirectedCross, WithinRegion };

std::string_view to_string(QueryKind kind);
QueryKind parse_query_kind(std::string_view name);

struct BoundaryQuery {
  QueryKind kind = QueryKind::Within;
  int d = 0;
  int e = 0;  // ignored for Within

  static BoundaryQuery within(int d) { return {QueryKind::Within, d, d}; }
};

struct BoundaryItem {
  int i = 0;
  int j = -1;  // -1 for within-region items
  double v = 0.0;
};

struct BoundaryProbabilities {
  BoundaryQuery query;
  int draws = 0;
  std::vector<BoundaryItem> items;  // edges in graph order, or regions 0..n-1

  int m() const noexcept { return static_cast<int>(items.size()); }
  std::vector<double> values() const;
};

/// Label draws as a list of (draws x N) matrices, N = q*n disease-major.
using LabelMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

BoundaryProbabilities edge_probabilities(const std::vector<const LabelMatrix*>& labels, int n, int q,
                                         const RegionGraph& graph, BoundaryQuery query);
BoundaryProbabilities edge_probabilities(const PosteriorSamples& samples, const RegionGraph& graph,
                                         BoundaryQuery query);

/// Posterior expected false discovery rate of the rule v > t (0 if nothing is selected).
double estimated_fdr(const std::vector<double>& v, double t);
/// Posterior expected false non-discovery rate of the rule v > t (0 if everything is selected).
double estimated_fnr(const std::vector<double>& v, double t);

struct ThresholdDecision {
  double threshold = 0.0;
  double delta = 0.0;
  double fdr = 0.0;
  double fnr = 0.0;
  std::vector<bool> selected;
  int n_selected = 0;
  bool empty = false;  // no candidate threshold admits a nonempty selection with FDR <= delta
};

/// Candidate thresholds are 0 and the distinct values of v. t* is the
/// smallest candidate whose rule has FDR <= delta, i.e. the largest
/// selection within the FDR budget.
ThresholdDecision select_threshold(const std::vector<double>& v, double delta);

/// Indices of the T largest v. Ties keep item order (disease, i, j).
std::vector<std::size_t> top_T(const std::vector<double>& v, int T);

struct BoundaryReport {
  BoundaryProbabilities probs;
  ThresholdDecision decision;
  std::vector<std::string> regions;
  std::vector<std::string> diseases;
};

BoundaryReport make_report(const BoundaryProbabilities& probs, const ThresholdDecision& decision,
                           std::vector<std::string> regions, std::vector<std::string> diseases);
/// Columns: query,disease_a,disease_b,region_i,region_j,probability,selected;
/// rows sorted by probability descending, ties in item order.
void write_report_csv(const std::filesystem::path& path, const BoundaryReport& report);
nlohmann::json report_json(const BoundaryReport& report);

}  // namespace mardp

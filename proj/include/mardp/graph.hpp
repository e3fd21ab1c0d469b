#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mardp {

using RegionIndex = int;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Undirected areal adjacency. Edges are stored once with i < j, sorted
/// lexicographically; neighbor lists are sorted and mirror the edge set.
class RegionGraph {
 public:
  RegionGraph() = default;
  RegionGraph(std::vector<std::string> labels, std::vector<std::pair<RegionIndex, RegionIndex>> edges);

  int n_regions() const noexcept { return static_cast<int>(labels_.size()); }
  int n_edges() const noexcept { return static_cast<int>(edges_.size()); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::string& label(RegionIndex i) const { return labels_.at(static_cast<std::size_t>(i)); }
  const std::vector<std::pair<RegionIndex, RegionIndex>>& edges() const noexcept { return edges_; }
  const std::vector<RegionIndex>& neighbors(RegionIndex i) const { return neighbors_.at(static_cast<std::size_t>(i)); }
  int degree(RegionIndex i) const { return static_cast<int>(neighbors(i).size()); }
  bool adjacent(RegionIndex i, RegionIndex j) const;

  std::optional<RegionIndex> find(const std::string& label) const;
  RegionIndex index_of(const std::string& label) const;  // throws DataError

  bool has_centroids() const noexcept { return centroids_.has_value(); }
  const std::vector<Point>& centroids() const;
  void set_centroids(std::vector<Point> centroids);

  int n_components() const;
  std::vector<RegionIndex> isolated_regions() const;

 private:
  std::vector<std::string> labels_;
  std::vector<std::pair<RegionIndex, RegionIndex>> edges_;
  std::vector<std::vector<RegionIndex>> neighbors_;
  std::optional<std::vector<Point>> centroids_;
};

/// Builds a graph from label pairs. With an explicit label list the indices
/// follow that list (and isolated labels are kept); otherwise indices are
/// assigned by first appearance. Reversed and repeated records collapse to
/// one edge.
RegionGraph build_graph(const std::vector<std::pair<std::string, std::string>>& records,
                        const std::optional<std::vector<std::string>>& labels = std::nullopt);

/// Predecessor neighbor sets N(i) for a fixed region ordering.
struct DirectedNeighborSets {
  std::vector<RegionIndex> order;                     // order[k] = region at position k
  std::vector<int> position;                          // position[i] = k with order[k] == i
  std::vector<std::vector<RegionIndex>> preceding;    // N(i), sorted by region index
  std::vector<int> n_before;                          // |N(i)|

  int n_regions() const noexcept { return static_cast<int>(order.size()); }
};

/// `order` lists every region exactly once, first region first.
DirectedNeighborSets directed_neighbors(const RegionGraph& graph, const std::vector<RegionIndex>& order);
std::vector<RegionIndex> identity_order(int n);

/// Pairwise Euclidean distances between centroids.
Eigen::MatrixXd centroid_distances(const std::vector<Point>& centroids);

/// Binary symmetric indicator matrices, one per band (d_{r-1}, d_r] with
/// d_0 = 0. Pairs beyond the last break belong to no band.
std::vector<Eigen::MatrixXd> distance_band_neighbors(const RegionGraph& graph, const std::vector<double>& breaks);
std::vector<Eigen::MatrixXd> distance_band_neighbors(const std::vector<Point>& centroids,
                                                     const std::vector<double>& breaks);

// File formats: edge list `label_i,label_j`; label file one label per line;
// centroid CSV `label,x,y`. Blank lines and lines starting with '#' are skipped.
std::vector<std::pair<std::string, std::string>> read_edge_list(const std::filesystem::path& path);
std::vector<std::string> read_label_file(const std::filesystem::path& path);
std::vector<Point> read_centroids(const std::filesystem::path& path, const RegionGraph& graph);
std::vector<RegionIndex> read_order_file(const std::filesystem::path& path, const RegionGraph& graph);

/// Convenience: labels (optional), edge list and optional centroid file.
RegionGraph load_graph(const std::filesystem::path& adjacency, const std::optional<std::filesystem::path>& labels,
                       const std::optional<std::filesystem::path>& centroids);

}  // namespace mardp

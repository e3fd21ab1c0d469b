#include "mardp/graph.hpp"

#include "mardp/errors.hpp"
#include "mardp/text_io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace mardp {

RegionGraph::RegionGraph(std::vector<std::string> labels, std::vector<std::pair<RegionIndex, RegionIndex>> edges)
    : labels_(std::move(labels)) {
  const int n = n_regions();
  if (n == 0) throw DataError("graph has no regions");
  std::set<std::pair<RegionIndex, RegionIndex>> unique;
  for (auto [i, j] : edges) {
    if (i < 0 || j < 0 || i >= n || j >= n)
      throw DataError(fmt::format("edge ({}, {}) references a region outside 0..{}", i, j, n - 1));
    if (i == j) throw DataError(fmt::format("self-loop on region '{}'", labels_[static_cast<std::size_t>(i)]));
    unique.emplace(std::min(i, j), std::max(i, j));
  }
  edges_.assign(unique.begin(), unique.end());
  neighbors_.assign(static_cast<std::size_t>(n), {});
  for (auto [i, j] : edges_) {
    neighbors_[static_cast<std::size_t>(i)].push_back(j);
    neighbors_[static_cast<std::size_t>(j)].push_back(i);
  }
  for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());
}

bool RegionGraph::adjacent(RegionIndex i, RegionIndex j) const {
  const auto& nb = neighbors(i);
  return std::binary_search(nb.begin(), nb.end(), j);
}

std::optional<RegionIndex> RegionGraph::find(const std::string& label) const {
  const auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) return std::nullopt;
  return static_cast<RegionIndex>(it - labels_.begin());
}

RegionIndex RegionGraph::index_of(const std::string& label) const {
  if (auto i = find(label)) return *i;
  throw DataError("unknown region label '" + label + "'");
}

const std::vector<Point>& RegionGraph::centroids() const {
  if (!centroids_) throw DataError("graph has no centroids");
  return *centroids_;
}

void RegionGraph::set_centroids(std::vector<Point> centroids) {
  if (static_cast<int>(centroids.size()) != n_regions())
    throw DataError(fmt::format("expected {} centroids, got {}", n_regions(), centroids.size()));
  centroids_ = std::move(centroids);
}

int RegionGraph::n_components() const {
  const int n = n_regions();
  std::vector<int> seen(static_cast<std::size_t>(n), 0);
  int components = 0;
  std::vector<RegionIndex> stack;
  for (RegionIndex s = 0; s < n; ++s) {
    if (seen[static_cast<std::size_t>(s)]) continue;
    ++components;
    stack.push_back(s);
    seen[static_cast<std::size_t>(s)] = 1;
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      for (auto w : neighbors(v)) {
        if (!seen[static_cast<std::size_t>(w)]) {
          seen[static_cast<std::size_t>(w)] = 1;
          stack.push_back(w);
        }
      }
    }
  }
  return components;
}

std::vector<RegionIndex> RegionGraph::isolated_regions() const {
  std::vector<RegionIndex> out;
  for (RegionIndex i = 0; i < n_regions(); ++i)
    if (neighbors(i).empty()) out.push_back(i);
  return out;
}

RegionGraph build_graph(const std::vector<std::pair<std::string, std::string>>& records,
                        const std::optional<std::vector<std::string>>& labels) {
  std::vector<std::string> names;
  std::unordered_map<std::string, RegionIndex> index;
  auto add_label = [&](const std::string& name) {
    if (name.empty()) throw DataError("empty region label");
    if (index.emplace(name, static_cast<RegionIndex>(names.size())).second) names.push_back(name);
  };
  if (labels) {
    for (const auto& name : *labels) {
      if (index.count(name)) throw DataError("duplicate label '" + name + "' in label list");
      add_label(name);
    }
  }
  std::vector<std::pair<RegionIndex, RegionIndex>> edges;
  edges.reserve(records.size());
  for (const auto& [a, b] : records) {
    if (a == b) throw DataError("self-loop record for region '" + a + "'");
    if (labels) {
      if (!index.count(a)) throw DataError("unknown label '" + a + "' in adjacency records");
      if (!index.count(b)) throw DataError("unknown label '" + b + "' in adjacency records");
    } else {
      add_label(a);
      add_label(b);
    }
    edges.emplace_back(index.at(a), index.at(b));
  }
  if (names.empty()) throw DataError("empty graph: no regions");
  return RegionGraph(std::move(names), std::move(edges));
}

std::vector<RegionIndex> identity_order(int n) {
  std::vector<RegionIndex> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  return order;
}

DirectedNeighborSets directed_neighbors(const RegionGraph& graph, const std::vector<RegionIndex>& order) {
  const int n = graph.n_regions();
  if (static_cast<int>(order.size()) != n)
    throw std::invalid_argument(fmt::format("order has {} entries, graph has {} regions", order.size(), n));
  DirectedNeighborSets dns;
  dns.order = order;
  dns.position.assign(static_cast<std::size_t>(n), -1);
  for (int k = 0; k < n; ++k) {
    const auto r = order[static_cast<std::size_t>(k)];
    if (r < 0 || r >= n || dns.position[static_cast<std::size_t>(r)] != -1)
      throw std::invalid_argument("order is not a permutation of the regions");
    dns.position[static_cast<std::size_t>(r)] = k;
  }
  dns.preceding.assign(static_cast<std::size_t>(n), {});
  dns.n_before.assign(static_cast<std::size_t>(n), 0);
  for (RegionIndex i = 0; i < n; ++i) {
    auto& pred = dns.preceding[static_cast<std::size_t>(i)];
    for (auto j : graph.neighbors(i))
      if (dns.position[static_cast<std::size_t>(j)] < dns.position[static_cast<std::size_t>(i)]) pred.push_back(j);
    dns.n_before[static_cast<std::size_t>(i)] = static_cast<int>(pred.size());
  }
  return dns;
}

Eigen::MatrixXd centroid_distances(const std::vector<Point>& centroids) {
  const auto n = static_cast<Eigen::Index>(centroids.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const auto& a = centroids[static_cast<std::size_t>(i)];
      const auto& b = centroids[static_cast<std::size_t>(j)];
      d(i, j) = d(j, i) = std::hypot(a.x - b.x, a.y - b.y);
    }
  }
  return d;
}

std::vector<Eigen::MatrixXd> distance_band_neighbors(const std::vector<Point>& centroids,
                                                     const std::vector<double>& breaks) {
  if (breaks.empty()) throw std::invalid_argument("at least one distance break is required");
  for (std::size_t r = 0; r < breaks.size(); ++r) {
    if (!(breaks[r] > 0.0)) throw std::invalid_argument("distance breaks must be positive");
    if (r > 0 && !(breaks[r] > breaks[r - 1])) throw std::invalid_argument("distance breaks must be strictly increasing");
  }
  const auto dist = centroid_distances(centroids);
  const auto n = dist.rows();
  std::vector<Eigen::MatrixXd> bands(breaks.size(), Eigen::MatrixXd::Zero(n, n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = dist(i, j);
      double lower = 0.0;
      for (std::size_t r = 0; r < breaks.size(); ++r) {
        if (d > lower && d <= breaks[r]) {
          bands[r](i, j) = bands[r](j, i) = 1.0;
          break;
        }
        lower = breaks[r];
      }
    }
  }
  return bands;
}

std::vector<Eigen::MatrixXd> distance_band_neighbors(const RegionGraph& graph, const std::vector<double>& breaks) {
  return distance_band_neighbors(graph.centroids(), breaks);
}

std::vector<std::pair<std::string, std::string>> read_edge_list(const std::filesystem::path& path) {
  std::vector<std::pair<std::string, std::string>> records;
  for (const auto& line : text::read_lines(path)) {
    const auto f = text::split_csv(line);
    if (f.size() != 2) throw DataError(fmt::format("{}: expected 'label_i,label_j', got '{}'", path.string(), line));
    records.emplace_back(f[0], f[1]);
  }
  return records;
}

std::vector<std::string> read_label_file(const std::filesystem::path& path) { return text::read_lines(path); }

std::vector<Point> read_centroids(const std::filesystem::path& path, const RegionGraph& graph) {
  std::vector<Point> pts(static_cast<std::size_t>(graph.n_regions()));
  std::vector<int> seen(pts.size(), 0);
  for (const auto& line : text::read_lines(path)) {
    const auto f = text::split_csv(line);
    if (f.size() != 3) throw DataError(fmt::format("{}: expected 'label,x,y', got '{}'", path.string(), line));
    if (f[1] == "x" && f[2] == "y") continue;  // header
    const auto i = static_cast<std::size_t>(graph.index_of(f[0]));
    pts[i] = {text::parse_double(f[1], "centroid x"), text::parse_double(f[2], "centroid y")};
    seen[i] = 1;
  }
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (!seen[i]) throw DataError("missing centroid for region '" + graph.labels()[i] + "'");
  return pts;
}

std::vector<RegionIndex> read_order_file(const std::filesystem::path& path, const RegionGraph& graph) {
  std::vector<RegionIndex> order;
  for (const auto& line : text::read_lines(path)) order.push_back(graph.index_of(line));
  if (static_cast<int>(order.size()) != graph.n_regions())
    throw DataError(fmt::format("order file lists {} regions, graph has {}", order.size(), graph.n_regions()));
  return order;
}

RegionGraph load_graph(const std::filesystem::path& adjacency, const std::optional<std::filesystem::path>& labels,
                       const std::optional<std::filesystem::path>& centroids) {
  std::optional<std::vector<std::string>> names;
  if (labels) names = read_label_file(*labels);
  auto graph = build_graph(read_edge_list(adjacency), names);
  if (centroids) graph.set_centroids(read_centroids(*centroids, graph));
  return graph;
}

}  // namespace mardp

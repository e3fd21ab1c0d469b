#include "mardp/errors.hpp"
#include "mardp/graph.hpp"
#include "support/toys.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace mardp;

TEST_CASE("edge records collapse and index by label list") {
  const auto g = build_graph({{"b", "a"}, {"a", "b"}, {"b", "c"}}, std::vector<std::string>{"a", "b", "c", "d"});
  CHECK(g.n_regions() == 4);
  CHECK(g.n_edges() == 2);
  CHECK(g.adjacent(0, 1));
  CHECK(g.adjacent(1, 0));
  CHECK_FALSE(g.adjacent(0, 2));
  CHECK(g.isolated_regions() == std::vector<RegionIndex>{3});
  CHECK(g.n_components() == 2);
}

TEST_CASE("graph construction errors") {
  CHECK_THROWS_AS(build_graph({{"a", "a"}}), DataError);
  CHECK_THROWS_AS(build_graph({{"a", "z"}}, std::vector<std::string>{"a", "b"}), DataError);
  CHECK_THROWS_AS(build_graph({}, std::vector<std::string>{"a", "a"}), DataError);
  CHECK_THROWS_AS(toys::path(3).index_of("nope"), DataError);
}

TEST_CASE("neighbor lists mirror the edge set") {
  const auto g = toys::random_connected(12, 5);
  int degree_sum = 0;
  for (int i = 0; i < g.n_regions(); ++i) {
    degree_sum += g.degree(i);
    for (int j : g.neighbors(i)) CHECK(g.adjacent(j, i));
  }
  CHECK(degree_sum == 2 * g.n_edges());
}

TEST_CASE("directed neighbor sets follow the order") {
  const auto g = toys::path(4);
  const auto dns = directed_neighbors(g, {2, 0, 1, 3});
  CHECK(dns.preceding[2].empty());
  CHECK(dns.preceding[0].empty());
  CHECK(dns.preceding[1] == std::vector<RegionIndex>{0, 2});
  CHECK(dns.preceding[3] == std::vector<RegionIndex>{2});
  CHECK_THROWS_AS(directed_neighbors(g, {0, 1, 2}), std::invalid_argument);
  CHECK_THROWS_AS(directed_neighbors(g, {0, 1, 1, 3}), std::invalid_argument);
}

TEST_CASE("distance bands partition pairs by break") {
  std::vector<Point> pts = {{0, 0}, {1, 0}, {3, 0}, {10, 0}};
  const auto bands = distance_band_neighbors(pts, {1.0, 3.0});
  REQUIRE(bands.size() == 2);
  CHECK(bands[0](0, 1) == 1.0);
  CHECK(bands[0](0, 2) == 0.0);
  CHECK(bands[1](0, 2) == 1.0);
  CHECK(bands[1](1, 2) == 1.0);
  CHECK(bands[0](0, 3) + bands[1](0, 3) == 0.0);
  CHECK(bands[0].diagonal().sum() == 0.0);
  CHECK_THROWS_AS(distance_band_neighbors(pts, {2.0, 1.0}), std::invalid_argument);
}

TEST_CASE("bundled California graph") {
  const auto g = load_graph(MARDP_DATA_DIR "/adjacency.csv", std::filesystem::path(MARDP_DATA_DIR "/labels.txt"),
                            std::filesystem::path(MARDP_DATA_DIR "/centroids.csv"));
  CHECK(g.n_regions() == 58);
  CHECK(g.n_edges() == 139);
  CHECK(g.n_components() == 1);
  CHECK(g.isolated_regions().empty());
  CHECK(g.has_centroids());
}

TEST_CASE("order file must list every region once") {
  const auto g = toys::path(3);
  const auto path = std::filesystem::temp_directory_path() / "mardp_order_test.txt";
  {
    std::ofstream out(path);
    out << "r3\nr1\nr2\n";
  }
  CHECK(read_order_file(path, g) == std::vector<RegionIndex>{2, 0, 1});
  {
    std::ofstream out(path);
    out << "r3\nr1\n";
  }
  CHECK_THROWS_AS(read_order_file(path, g), DataError);
  std::filesystem::remove(path);
}

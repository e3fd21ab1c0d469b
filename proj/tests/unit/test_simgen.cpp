#include "mardp/random.hpp"
#include "mardp/simgen.hpp"

#include <doctest.h>

#include <cmath>

using namespace mardp;

namespace {

const RegionGraph& california() {
  static const RegionGraph g =
      load_graph(MARDP_DATA_DIR "/adjacency.csv", std::filesystem::path(MARDP_DATA_DIR "/labels.txt"),
                 std::filesystem::path(MARDP_DATA_DIR "/centroids.csv"));
  return g;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const auto m = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ma += a[k] / m;
    mb += b[k] / m;
  }
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    sab += (a[k] - ma) * (b[k] - mb);
    saa += (a[k] - ma) * (a[k] - ma);
    sbb += (b[k] - mb) * (b[k] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("truth generation is deterministic per seed") {
  const auto& g = california();
  const SimulationConfig cfg;
  const auto a = generate_truth(g, cfg, 17);
  const auto b = generate_truth(g, cfg, 17);
  const auto c = generate_truth(g, cfg, 18);
  CHECK(a.gamma == b.gamma);
  CHECK(a.labels == b.labels);
  CHECK(a.phi == b.phi);
  CHECK(a.gamma != c.gamma);
  CHECK(a.n() == 58);
  CHECK(a.V(cfg.K - 1) == 1.0);
  CHECK(a.p.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("true boundaries equal a brute-force scan of phi") {
  const auto& g = california();
  for (std::uint64_t seed : {3u, 11u, 93422u}) {
    const auto t = generate_truth(g, SimulationConfig{}, seed);
    const int n = t.n();
    const auto& edges = g.edges();
    auto phi = [&](int d, int i) { return t.phi(d * n + i); };
    const auto within0 = true_boundaries(t, g, {QueryKind::Within, 0, 0});
    const auto within1 = true_boundaries(t, g, {QueryKind::Within, 1, 1});
    const auto shared = true_boundaries(t, g, {QueryKind::Shared, 0, 1});
    const auto cross = true_boundaries(t, g, {QueryKind::Cross, 0, 1});
    const auto directed = true_boundaries(t, g, {QueryKind::DirectedCross, 0, 1});
    REQUIRE(within0.size() == edges.size());
    for (std::size_t k = 0; k < edges.size(); ++k) {
      const auto [i, j] = edges[k];
      CHECK(within0[k] == (phi(0, i) != phi(0, j)));
      CHECK(within1[k] == (phi(1, i) != phi(1, j)));
      CHECK(shared[k] == (phi(0, i) != phi(0, j) && phi(1, i) != phi(1, j)));
      CHECK(cross[k] == (phi(0, i) != phi(1, j) && phi(1, i) != phi(0, j)));
      CHECK(directed[k] == (phi(0, i) != phi(1, j)));
    }
    const auto region = true_boundaries(t, g, {QueryKind::WithinRegion, 0, 1});
    REQUIRE(static_cast<int>(region.size()) == n);
    for (int i = 0; i < n; ++i) CHECK(region[static_cast<std::size_t>(i)] == (phi(0, i) != phi(1, i)));
  }
}

TEST_CASE("replicates share the truth and carry noise of variance 1/tau") {
  const auto& g = california();
  const auto t = generate_truth(g, SimulationConfig{}, 5);
  const int R = 400;
  const auto reps = generate_datasets(t, R);
  const auto mean = t.mean();
  double sum_sq = 0.0;
  for (const auto& data : reps) {
    CHECK(data.diseases[0].X == t.X[0]);
    for (int d = 0; d < 2; ++d)
      for (int i = 0; i < t.n(); ++i) sum_sq += std::pow(data.diseases[d].y(i) - mean(d * t.n() + i), 2);
  }
  CHECK(sum_sq / (R * 2.0 * t.n()) == doctest::Approx(0.1).epsilon(0.03));
  CHECK(generate_dataset(t, 7).diseases[1].y == reps[7].diseases[1].y);
  CHECK_THROWS_AS(generate_dataset(t, -1), std::invalid_argument);
}

TEST_CASE("mixer controls the cross-disease latent correlation") {
  const auto& g = california();
  SimulationConfig cfg;
  std::vector<double> g1, g2, i1, i2;
  SimulationConfig ind = cfg;
  ind.A = Eigen::Matrix2d::Identity();
  const int n = g.n_regions();
  for (std::uint64_t s = 0; s < 300; ++s) {
    const auto t = generate_truth(g, cfg, 1000 + s);
    const auto u = generate_truth(g, ind, 1000 + s);
    for (int i = 0; i < n; ++i) {
      g1.push_back(t.gamma(i));
      g2.push_back(t.gamma(n + i));
      i1.push_back(u.gamma(i));
      i2.push_back(u.gamma(n + i));
    }
  }
  CHECK(std::abs(correlation(g1, g2) - std::sqrt(0.5)) < 0.05);
  CHECK(std::abs(correlation(i1, i2)) < 0.05);
}

TEST_CASE("a vanishing concentration collapses to a single level") {
  SimulationConfig cfg;
  cfg.alpha = 1e-6;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto t = generate_truth(california(), cfg, s);
    CHECK(t.n_levels() == 1);
    const auto b = true_boundaries(t, california(), {QueryKind::Within, 0, 0});
    CHECK(std::count(b.begin(), b.end(), true) == 0);
  }
}

TEST_CASE("truth JSON round trip") {
  const auto& g = california();
  const auto t = generate_truth(g, SimulationConfig{}, 21);
  const auto path = std::filesystem::temp_directory_path() / "mardp_truth_test.json";
  write_truth(path, t, g);
  const auto r = read_truth(path);
  CHECK(r.seed == t.seed);
  CHECK(r.regions == t.regions);
  CHECK(r.labels == t.labels);
  CHECK((r.phi - t.phi).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((r.gamma - t.gamma).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((r.X[1] - t.X[1]).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(r.config.K == t.config.K);
  CHECK((r.config.rho - t.config.rho).cwiseAbs().maxCoeff() == 0.0);
  const auto a = generate_dataset(t, 3), b = generate_dataset(r, 3);
  CHECK((a.diseases[0].y - b.diseases[0].y).cwiseAbs().maxCoeff() < 1e-9);
  std::filesystem::remove(path);
}

TEST_CASE("invalid simulation settings are rejected") {
  SimulationConfig cfg;
  cfg.rho(0) = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.K = 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.diseases.pop_back();
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

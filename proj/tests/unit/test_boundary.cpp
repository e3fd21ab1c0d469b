#include "mardp/boundary.hpp"
#include "mardp/random.hpp"
#include "support/oracles.hpp"
#include "support/toys.hpp"

#include <doctest.h>

using namespace mardp;

namespace {
std::vector<double> dyadic_values(Rng& rng, int m) {
  std::vector<double> v;
  for (int k = 0; k < m; ++k) v.push_back(std::floor(uniform01(rng) * 65.0) / 64.0);
  return v;
}
}  // namespace

TEST_CASE("FDR and FNR estimators by definition") {
  const std::vector<double> v = {0.9, 0.5, 0.2};
  CHECK(estimated_fdr(v, 0.4) == doctest::Approx((0.1 + 0.5) / 2));
  CHECK(estimated_fnr(v, 0.4) == doctest::Approx(0.2));
  CHECK(estimated_fdr(v, 0.95) == 0.0);
  CHECK(estimated_fnr(v, 0.0) == 0.0);
}

TEST_CASE("threshold selection matches the grid oracle exactly") {
  auto rng = make_rng(31);
  for (int rep = 0; rep < 300; ++rep) {
    const auto v = dyadic_values(rng, 5 + rep % 60);
    for (double delta : {0.01, 0.05, 0.1, 0.2}) {
      const auto ours = select_threshold(v, delta);
      const auto grid = oracle::grid_threshold(v, delta);
      REQUIRE(ours.empty == grid.empty);
      if (grid.empty) {
        CHECK(ours.n_selected == 0);
        continue;
      }
      CHECK(ours.selected == grid.selected);
      CHECK(ours.fdr == grid.fdr);
      CHECK(ours.fnr == grid.fnr);
      CHECK(ours.fdr <= delta);
    }
  }
}

TEST_CASE("selection is tight and monotone in delta") {
  auto rng = make_rng(32);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> v;
    for (int k = 0; k < 80; ++k) v.push_back(uniform01(rng));
    int previous = -1;
    for (double delta : {0.3, 0.2, 0.1, 0.05, 0.02, 0.01}) {
      const auto d = select_threshold(v, delta);
      if (previous >= 0) CHECK(d.n_selected <= previous);
      previous = d.n_selected;
      if (d.empty) continue;
      // the next item in line would break the budget
      double next = -1.0;
      for (double x : v)
        if (!(x > d.threshold)) next = std::max(next, x);
      if (next > 0.0) {
        double num = 0.0;
        int count = 0;
        for (double x : v)
          if (x >= next) {
            num += 1.0 - x;
            ++count;
          }
        CHECK(num / count > delta);
      }
    }
  }
}

TEST_CASE("empty selection is flagged") {
  const auto d = select_threshold({0.1, 0.3, 0.2}, 0.05);
  CHECK(d.empty);
  CHECK(d.n_selected == 0);
  CHECK_THROWS_AS(select_threshold({0.5}, 0.0), std::invalid_argument);
}

TEST_CASE("top T keeps item order on ties") {
  const std::vector<double> v = {0.5, 0.9, 0.5, 0.5, 0.1};
  CHECK(top_T(v, 2) == std::vector<std::size_t>{0, 1});
  CHECK(top_T(v, 3) == std::vector<std::size_t>{0, 1, 2});
  CHECK_THROWS_AS(top_T(v, 6), std::out_of_range);
}

TEST_CASE("edge probabilities match a brute-force count") {
  const auto g = toys::random_connected(7, 4, 0.4);
  const int n = 7, q = 3;
  auto rng = make_rng(8);
  LabelMatrix a(50, n * q), b(30, n * q);
  for (auto* m : {&a, &b})
    for (auto& x : m->reshaped()) x = static_cast<int>(uniform01(rng) * 3);
  const std::vector<const LabelMatrix*> both = {&a, &b};
  for (auto kind : {QueryKind::Within, QueryKind::Shared, QueryKind::Cross, QueryKind::DirectedCross, QueryKind::WithinRegion}) {
    const BoundaryQuery query{kind, 2, 0};
    const auto p = edge_probabilities(both, n, q, g, query);
    CHECK(p.draws == 80);
    CHECK(p.m() == (kind == QueryKind::WithinRegion ? n : g.n_edges()));
    for (const auto& item : p.items) {
      int hits = 0;
      for (const auto* m : both)
        for (int r = 0; r < m->rows(); ++r) {
          auto u = [&](int d, int i) { return (*m)(r, d * n + i); };
          const int i = item.i, j = item.j;
          bool ev = false;
          switch (kind) {
            case QueryKind::Within: ev = u(2, i) != u(2, j); break;
            case QueryKind::Shared: ev = u(2, i) != u(2, j) && u(0, i) != u(0, j); break;
            case QueryKind::Cross: ev = u(2, i) != u(0, j) && u(0, i) != u(2, j); break;
            case QueryKind::DirectedCross: ev = u(2, i) != u(0, j); break;
            case QueryKind::WithinRegion: ev = u(2, i) != u(0, i); break;
          }
          hits += ev;
        }
      CHECK(item.v == static_cast<double>(hits) / 80.0);
    }
  }
  CHECK_THROWS_AS(edge_probabilities(both, n, q, g, {QueryKind::Cross, 1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(parse_query_kind("diagonal"), std::invalid_argument);
}

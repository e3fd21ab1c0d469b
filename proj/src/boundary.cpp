#include "mardp/boundary.hpp"

#include "mardp/errors.hpp"
#include "mardp/text_io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace mardp {

std::string_view to_string(QueryKind kind) {
  switch (kind) {
    case QueryKind::Within: return "within";
    case QueryKind::Shared: return "shared";
    case QueryKind::Cross: return "cross";
    case QueryKind::DirectedCross: return "directed-cross";
    case QueryKind::WithinRegion: return "within-region";
  }
  return "?";
}

QueryKind parse_query_kind(std::string_view name) {
  if (name == "within") return QueryKind::Within;
  if (name == "shared") return QueryKind::Shared;
  if (name == "cross") return QueryKind::Cross;
  if (name == "directed-cross") return QueryKind::DirectedCross;
  if (name == "within-region") return QueryKind::WithinRegion;
  throw std::invalid_argument(
      fmt::format("unknown query '{}' (expected within|shared|cross|directed-cross|within-region)", name));
}

std::vector<double> BoundaryProbabilities::values() const {
  std::vector<double> v;
  v.reserve(items.size());
  for (const auto& it : items) v.push_back(it.v);
  return v;
}

BoundaryProbabilities edge_probabilities(const std::vector<const LabelMatrix*>& labels, int n, int q,
                                         const RegionGraph& graph, BoundaryQuery query) {
  const int d = query.d;
  const int e = query.kind == QueryKind::Within ? query.d : query.e;
  if (d < 0 || d >= q || e < 0 || e >= q)
    throw std::out_of_range(fmt::format("disease index out of range for {} diseases", q));
  if (query.kind != QueryKind::Within && d == e) throw std::invalid_argument("cross-disease queries need two different diseases");
  if (graph.n_regions() != n) throw DataError("label draws and graph disagree on the number of regions");

  BoundaryProbabilities out;
  out.query = query;
  if (query.kind == QueryKind::WithinRegion) {
    for (int i = 0; i < n; ++i) out.items.push_back({i, -1, 0.0});
  } else {
    for (auto [i, j] : graph.edges()) out.items.push_back({i, j, 0.0});
  }
  std::vector<long long> hits(out.items.size(), 0);
  long long draws = 0;
  for (const auto* m : labels) {
    if (m->cols() != static_cast<Eigen::Index>(n) * q) throw DataError("label draws have the wrong width");
    for (Eigen::Index r = 0; r < m->rows(); ++r) {
      auto u = [&](int disease, int region) { return (*m)(r, disease * n + region); };
      for (std::size_t k = 0; k < out.items.size(); ++k) {
        const int i = out.items[k].i;
        const int j = out.items[k].j;
        bool event = false;
        switch (query.kind) {
          case QueryKind::Within: event = u(d, i) != u(d, j); break;
          case QueryKind::Shared: event = u(d, i) != u(d, j) && u(e, i) != u(e, j); break;
          case QueryKind::Cross: event = u(d, i) != u(e, j) && u(e, i) != u(d, j); break;
          case QueryKind::DirectedCross: event = u(d, i) != u(e, j); break;
          case QueryKind::WithinRegion: event = u(d, i) != u(e, i); break;
        }
        hits[k] += event ? 1 : 0;
      }
      ++draws;
    }
  }
  if (draws == 0) throw DataError("no posterior draws");
  out.draws = static_cast<int>(draws);
  for (std::size_t k = 0; k < out.items.size(); ++k)
    out.items[k].v = static_cast<double>(hits[k]) / static_cast<double>(draws);
  return out;
}

BoundaryProbabilities edge_probabilities(const PosteriorSamples& samples, const RegionGraph& graph,
                                         BoundaryQuery query) {
  std::vector<const LabelMatrix*> labels;
  for (const auto& c : samples.chains) labels.push_back(&c.labels);
  return edge_probabilities(labels, samples.n, samples.q, graph, query);
}

double estimated_fdr(const std::vector<double>& v, double t) {
  double num = 0.0;
  int count = 0;
  for (double x : v)
    if (x > t) {
      num += 1.0 - x;
      ++count;
    }
  return count == 0 ? 0.0 : num / count;
}

double estimated_fnr(const std::vector<double>& v, double t) {
  double num = 0.0;
  int unselected = 0;
  for (double x : v)
    if (!(x > t)) {
      num += x;
      ++unselected;
    }
  return unselected == 0 ? 0.0 : num / unselected;
}

ThresholdDecision select_threshold(const std::vector<double>& v, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0,1)");
  std::vector<double> candidates(v);
  candidates.push_back(0.0);
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  ThresholdDecision out;
  out.delta = delta;
  out.empty = true;
  out.threshold = candidates.back();
  for (double t : candidates) {
    const bool any = std::any_of(v.begin(), v.end(), [t](double x) { return x > t; });
    if (!any) break;
    if (estimated_fdr(v, t) <= delta) {
      out.threshold = t;
      out.empty = false;
      break;
    }
  }
  out.selected.resize(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    out.selected[k] = v[k] > out.threshold;
    out.n_selected += out.selected[k] ? 1 : 0;
  }
  out.fdr = estimated_fdr(v, out.threshold);
  out.fnr = estimated_fnr(v, out.threshold);
  return out;
}

std::vector<std::size_t> top_T(const std::vector<double>& v, int T) {
  if (T < 1 || T > static_cast<int>(v.size()))
    throw std::out_of_range(fmt::format("T = {} outside 1..{}", T, v.size()));
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  idx.resize(static_cast<std::size_t>(T));
  std::sort(idx.begin(), idx.end());
  return idx;
}

BoundaryReport make_report(const BoundaryProbabilities& probs, const ThresholdDecision& decision,
                           std::vector<std::string> regions, std::vector<std::string> diseases) {
  if (decision.selected.size() != probs.items.size()) throw std::invalid_argument("decision does not match probabilities");
  return {probs, decision, std::move(regions), std::move(diseases)};
}

void write_report_csv(const std::filesystem::path& path, const BoundaryReport& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  const auto& items = r.probs.items;
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return items[a].v > items[b].v; });
  const auto& q = r.probs.query;
  const auto& da = r.diseases.at(static_cast<std::size_t>(q.d));
  const auto& db = q.kind == QueryKind::Within ? da : r.diseases.at(static_cast<std::size_t>(q.e));
  out << "query,disease_a,disease_b,region_i,region_j,probability,selected\n";
  for (auto k : order) {
    const auto& it = items[k];
    const auto& ri = r.regions.at(static_cast<std::size_t>(it.i));
    const std::string rj = it.j >= 0 ? r.regions.at(static_cast<std::size_t>(it.j)) : "";
    out << to_string(q.kind) << ',' << da << ',' << db << ',' << ri << ',' << rj << ',' << text::format_double(it.v) << ','
        << (r.decision.selected[k] ? 1 : 0) << '\n';
  }
}

nlohmann::json report_json(const BoundaryReport& r) {
  const auto& q = r.probs.query;
  nlohmann::json j;
  j["query"] = std::string(to_string(q.kind));
  j["disease_a"] = r.diseases.at(static_cast<std::size_t>(q.d));
  j["disease_b"] = q.kind == QueryKind::Within ? j["disease_a"] : nlohmann::json(r.diseases.at(static_cast<std::size_t>(q.e)));
  j["delta"] = r.decision.delta;
  j["threshold"] = r.decision.threshold;
  j["fdr"] = r.decision.fdr;
  j["fnr"] = r.decision.fnr;
  j["m"] = r.probs.m();
  j["n_selected"] = r.decision.n_selected;
  j["empty_selection"] = r.decision.empty;
  j["draws"] = r.probs.draws;
  return j;
}

}  // namespace mardp

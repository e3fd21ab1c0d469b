#include "mardp/simgen.hpp"

#include "mardp/dirichlet.hpp"
#include "mardp/errors.hpp"
#include "mardp/random.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

namespace mardp {

namespace {

using json = nlohmann::json;

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd mat_from(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c)).get<double>();
  return m;
}

json mat_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec_json(m.row(r).transpose()));
  return rows;
}

}  // namespace

void SimulationConfig::validate() const {
  const int nq = q();
  if (nq < 1 || A.cols() != nq) throw std::invalid_argument("A must be square");
  DiseaseMixer check(A);
  if (rho.size() != nq || tau.size() != nq || static_cast<int>(beta.size()) != nq ||
      static_cast<int>(diseases.size()) != nq)
    throw std::invalid_argument("rho, tau, beta and disease names need one entry per disease");
  for (int d = 0; d < nq; ++d) {
    if (!(rho(d) > 0.0 && rho(d) < 1.0)) throw std::invalid_argument("rho must lie in (0,1)");
    if (!(tau(d) > 0.0)) throw std::invalid_argument("tau must be positive");
    if (beta[static_cast<std::size_t>(d)].size() < 1) throw std::invalid_argument("beta needs at least an intercept");
  }
  if (K < 2 || !(alpha > 0.0) || !(tau_s > 0.0)) throw std::invalid_argument("need K >= 2, alpha > 0, tau_s > 0");
}

Eigen::VectorXd SimulationTruth::mean() const {
  const int nn = n();
  Eigen::VectorXd m = phi;
  for (int d = 0; d < q(); ++d)
    m.segment(d * nn, nn) += X[static_cast<std::size_t>(d)] * config.beta[static_cast<std::size_t>(d)];
  return m;
}

int SimulationTruth::n_levels() const {
  std::set<int> used(labels.data(), labels.data() + labels.size());
  return static_cast<int>(used.size());
}

SimulationTruth generate_truth(const RegionGraph& graph, const SimulationConfig& config, std::uint64_t seed) {
  config.validate();
  const int n = graph.n_regions();
  const int q = config.q();
  auto rng = make_rng(seed, 0);
  SimulationTruth t;
  t.config = config;
  t.seed = seed;
  t.regions = graph.labels();

  for (int d = 0; d < q; ++d) {
    const auto p = config.beta[static_cast<std::size_t>(d)].size();
    Eigen::MatrixXd X(n, p);
    X.col(0).setOnes();
    for (Eigen::Index j = 1; j < p; ++j)
      for (int i = 0; i < n; ++i) X(i, j) = std_normal(rng);
    t.X.push_back(X);
  }

  t.V.resize(config.K);
  for (int k = 0; k < config.K - 1; ++k)
    t.V(k) = std::clamp(beta_variate(rng, 1.0, config.alpha), DBL_MIN, std::nextafter(1.0, 0.0));
  t.V(config.K - 1) = 1.0;
  const auto sticks = stick_weights(t.V.head(config.K - 1), config.alpha);
  t.p = sticks.p;
  t.theta.resize(config.K);
  for (int k = 0; k < config.K; ++k) t.theta(k) = std_normal(rng) / std::sqrt(config.tau_s);

  const auto& pts = graph.centroids();
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n * q, n * q);
  std::vector<Eigen::MatrixXd> C;
  for (int d = 0; d < q; ++d) C.push_back(exp_covariance(pts, config.rho(d), config.scale));
  for (int d = 0; d < q; ++d)
    for (int e = 0; e < q; ++e)
      for (int h = 0; h <= std::min(d, e); ++h)
        S.block(d * n, e * n, n, n) += config.A(d, h) * config.A(e, h) * C[static_cast<std::size_t>(h)];
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success)
    throw NumericalError("latent covariance is not positive definite (duplicate centroids?)");
  Eigen::VectorXd z(n * q);
  for (int o = 0; o < n * q; ++o) z(o) = std_normal(rng);
  t.gamma = llt.matrixL() * z;
  const Eigen::VectorXd sds = S.diagonal().array().sqrt();
  t.labels.resize(n * q);
  for (int o = 0; o < n * q; ++o) t.labels(o) = cluster_of(marginal_cdf(t.gamma(o), sds(o)), sticks.cumulative);
  t.phi = extract_phi(t.labels, t.theta);
  return t;
}

Dataset generate_dataset(const SimulationTruth& t, int replicate) {
  if (replicate < 0) throw std::invalid_argument("replicate index must be nonnegative");
  auto rng = make_rng(t.seed, static_cast<std::uint64_t>(replicate) + 1);
  const int n = t.n();
  const auto mean = t.mean();
  Dataset data;
  data.likelihood = Likelihood::Gaussian;
  data.regions = t.regions;
  for (int d = 0; d < t.q(); ++d) {
    DiseaseData dd;
    dd.name = t.config.diseases[static_cast<std::size_t>(d)];
    dd.X = t.X[static_cast<std::size_t>(d)];
    dd.covariate_names.emplace_back(kInterceptName);
    for (Eigen::Index j = 1; j < dd.X.cols(); ++j) dd.covariate_names.push_back(fmt::format("x{}", j));
    dd.y.resize(n);
    const double sd = 1.0 / std::sqrt(t.config.tau(d));
    for (int i = 0; i < n; ++i) dd.y(i) = mean(d * n + i) + sd * std_normal(rng);
    data.diseases.push_back(std::move(dd));
  }
  return data;
}

std::vector<Dataset> generate_datasets(const SimulationTruth& truth, int replicates) {
  if (replicates < 1) throw std::invalid_argument("need at least one replicate");
  std::vector<Dataset> out;
  for (int r = 0; r < replicates; ++r) out.push_back(generate_dataset(truth, r));
  return out;
}

std::vector<bool> true_boundaries(const SimulationTruth& truth, const RegionGraph& graph, BoundaryQuery query) {
  LabelMatrix one(1, truth.labels.size());
  one.row(0) = truth.labels.transpose();
  const auto probs = edge_probabilities({&one}, truth.n(), truth.q(), graph, query);
  std::vector<bool> flags;
  for (const auto& it : probs.items) flags.push_back(it.v > 0.5);
  return flags;
}

json truth_json(const SimulationTruth& t, const RegionGraph& graph) {
  const auto& c = t.config;
  json j;
  j["seed"] = t.seed;
  j["regions"] = t.regions;
  j["diseases"] = c.diseases;
  json cfg;
  cfg["K"] = c.K;
  cfg["alpha"] = c.alpha;
  cfg["tau_s"] = c.tau_s;
  cfg["A"] = mat_json(c.A);
  cfg["rho"] = vec_json(c.rho);
  json betas = json::array();
  for (const auto& b : c.beta) betas.push_back(vec_json(b));
  cfg["beta"] = betas;
  cfg["tau"] = vec_json(c.tau);
  cfg["distance_unit"] = c.scale.mode == DistanceScale::Mode::MaxRescale ? json("max") : json(c.scale.divisor);
  j["config"] = cfg;
  json X = json::array();
  for (const auto& m : t.X) X.push_back(mat_json(m));
  j["X"] = X;
  j["V"] = vec_json(t.V);
  j["p"] = vec_json(t.p);
  j["theta"] = vec_json(t.theta);
  j["gamma"] = vec_json(t.gamma);
  std::vector<int> labels(t.labels.data(), t.labels.data() + t.labels.size());
  for (auto& l : labels) ++l;
  j["labels"] = labels;
  j["phi"] = vec_json(t.phi);
  std::set<double> levels;
  for (Eigen::Index o = 0; o < t.phi.size(); ++o) levels.insert(t.phi(o));
  j["levels"] = std::vector<double>(levels.begin(), levels.end());

  json bounds = json::object();
  auto edge_list = [&](const std::vector<bool>& flags, bool regions_only) {
    json list = json::array();
    std::size_t k = 0;
    if (regions_only) {
      for (int i = 0; i < t.n(); ++i, ++k)
        if (flags[k]) list.push_back(t.regions[static_cast<std::size_t>(i)]);
    } else {
      for (auto [a, b] : graph.edges()) {
        if (flags[k++]) list.push_back({t.regions[static_cast<std::size_t>(a)], t.regions[static_cast<std::size_t>(b)]});
      }
    }
    return list;
  };
  for (int d = 0; d < t.q(); ++d) {
    const auto f = true_boundaries(t, graph, BoundaryQuery::within(d));
    bounds[fmt::format("within_{}", d + 1)] = edge_list(f, false);
  }
  for (int d = 0; d < t.q(); ++d)
    for (int e = 0; e < t.q(); ++e) {
      if (d == e) continue;
      bounds[fmt::format("directed-cross_{}_{}", d + 1, e + 1)] =
          edge_list(true_boundaries(t, graph, {QueryKind::DirectedCross, d, e}), false);
      if (d < e) {
        bounds[fmt::format("cross_{}_{}", d + 1, e + 1)] = edge_list(true_boundaries(t, graph, {QueryKind::Cross, d, e}), false);
        bounds[fmt::format("shared_{}_{}", d + 1, e + 1)] = edge_list(true_boundaries(t, graph, {QueryKind::Shared, d, e}), false);
        bounds[fmt::format("within-region_{}_{}", d + 1, e + 1)] =
            edge_list(true_boundaries(t, graph, {QueryKind::WithinRegion, d, e}), true);
      }
    }
  j["boundaries"] = bounds;
  json counts = json::object();
  for (const auto& [key, list] : bounds.items()) counts[key] = list.size();
  counts["levels"] = t.n_levels();
  counts["edges"] = graph.n_edges();
  j["counts"] = counts;
  return j;
}

SimulationTruth truth_from_json(const json& j) {
  try {
    SimulationTruth t;
    t.seed = j.at("seed").get<std::uint64_t>();
    t.regions = j.at("regions").get<std::vector<std::string>>();
    auto& c = t.config;
    c.diseases = j.at("diseases").get<std::vector<std::string>>();
    const auto& cfg = j.at("config");
    c.K = cfg.at("K").get<int>();
    c.alpha = cfg.at("alpha").get<double>();
    c.tau_s = cfg.at("tau_s").get<double>();
    c.A = mat_from(cfg.at("A"));
    c.rho = vec_from(cfg.at("rho"));
    c.beta.clear();
    for (const auto& b : cfg.at("beta")) c.beta.push_back(vec_from(b));
    c.tau = vec_from(cfg.at("tau"));
    const auto& unit = cfg.at("distance_unit");
    c.scale = unit.is_string() ? DistanceScale::max_rescale() : DistanceScale::unit(unit.get<double>());
    for (const auto& m : j.at("X")) t.X.push_back(mat_from(m));
    t.V = vec_from(j.at("V"));
    t.p = vec_from(j.at("p"));
    t.theta = vec_from(j.at("theta"));
    t.gamma = vec_from(j.at("gamma"));
    const auto labels = j.at("labels").get<std::vector<int>>();
    t.labels.resize(static_cast<Eigen::Index>(labels.size()));
    for (std::size_t o = 0; o < labels.size(); ++o) t.labels(static_cast<Eigen::Index>(o)) = labels[o] - 1;
    t.phi = vec_from(j.at("phi"));
    return t;
  } catch (const json::exception& e) {
    throw DataError(fmt::format("malformed truth file: {}", e.what()));
  }
}

void write_truth(const std::filesystem::path& path, const SimulationTruth& truth, const RegionGraph& graph) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << truth_json(truth, graph).dump(2) << '\n';
}

SimulationTruth read_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return truth_from_json(j);
}

}  // namespace mardp

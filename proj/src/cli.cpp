#include "mardp/cli.hpp"

#include "mardp/boundary.hpp"
#include "mardp/diagnostics.hpp"
#include "mardp/errors.hpp"
#include "mardp/metrics.hpp"
#include "mardp/posterior_io.hpp"
#include "mardp/sampler.hpp"
#include "mardp/simgen.hpp"
#include "mardp/text_io.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <thread>

#ifndef MARDP_DATA_DIR
#define MARDP_DATA_DIR "data/california"
#endif

namespace mardp::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

fs::path default_output_dir() {
  if (const char* env = std::getenv("MARDP_OUTPUT_DIR"); env && *env) return env;
  return "mardp_out";
}

json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// Copies a value from the config file unless the flag was given.
template <typename T>
void merge(const json& cfg, const char* key, const CLI::Option* opt, T& value) {
  if (opt->count() > 0 || !cfg.contains(key) || cfg.at(key).is_null()) return;
  try {
    value = cfg.at(key).get<T>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(fmt::format("config key '{}': {}", key, e.what()));
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto& f : text::split_csv(s))
    if (!f.empty()) out.push_back(f);
  return out;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (const auto& f : split_list(s)) out.push_back(static_cast<int>(text::parse_int(f, "integer list")));
  return out;
}

DistanceScale parse_distance_unit(const std::string& s) {
  if (s == "km") return DistanceScale::unit(1000.0);
  if (s == "max") return DistanceScale::max_rescale();
  double v = 0.0;
  try {
    v = text::parse_double(s, "distance unit");
  } catch (const DataError&) {
    throw std::invalid_argument(fmt::format("distance unit must be km, max or a positive divisor, got '{}'", s));
  }
  if (!(v > 0.0)) throw std::invalid_argument("distance unit divisor must be positive");
  return DistanceScale::unit(v);
}

struct GraphArgs {
  std::string adjacency = std::string(MARDP_DATA_DIR) + "/adjacency.csv";
  std::string labels = std::string(MARDP_DATA_DIR) + "/labels.txt";
  std::string centroids = std::string(MARDP_DATA_DIR) + "/centroids.csv";
  CLI::Option *adjacency_opt = nullptr, *labels_opt = nullptr, *centroids_opt = nullptr;

  void add(CLI::App* app) {
    adjacency_opt = app->add_option("--adjacency", adjacency, "Edge list CSV (label_i,label_j)");
    labels_opt = app->add_option("--labels", labels, "Region label file, one per line (fixes region order)");
    centroids_opt = app->add_option("--centroids", centroids, "Centroid CSV (label,x,y)");
  }
  void merge_config(const json& cfg) {
    merge(cfg, "adjacency", adjacency_opt, adjacency);
    merge(cfg, "labels", labels_opt, labels);
    merge(cfg, "centroids", centroids_opt, centroids);
  }
  RegionGraph load(bool with_centroids) const {
    std::optional<fs::path> lab;
    if (!labels.empty()) lab = labels;
    std::optional<fs::path> cen;
    if (with_centroids) cen = centroids;
    auto g = load_graph(adjacency, lab, cen);
    if (g.n_components() > 1) fmt::print(stderr, "warning: adjacency graph has {} connected components\n", g.n_components());
    return g;
  }
  json to_json() const { return {{"adjacency", fs::absolute(adjacency).string()}, {"labels", labels.empty() ? "" : fs::absolute(labels).string()}}; }
};

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  GraphArgs graph;
  std::string config;
  std::uint64_t seed = kCanonicalSeed;
  int replicates = 50;
  std::string distance_unit = "km";
  std::string out;
  CLI::Option *seed_opt, *rep_opt, *unit_opt, *out_opt;
};

int cmd_simulate(SimulateArgs& a) {
  json cfg = a.config.empty() ? json::object() : load_json(a.config);
  a.graph.merge_config(cfg);
  merge(cfg, "seed", a.seed_opt, a.seed);
  merge(cfg, "replicates", a.rep_opt, a.replicates);
  merge(cfg, "distance_unit", a.unit_opt, a.distance_unit);
  merge(cfg, "out", a.out_opt, a.out);
  if (a.replicates < 1) throw std::invalid_argument("--replicates must be at least 1");
  const fs::path out = a.out.empty() ? default_output_dir() / "simulation" : fs::path(a.out);

  const auto graph = a.graph.load(true);
  if (int dup = count_duplicate_centroids(graph.centroids()); dup > 0)
    fmt::print(stderr, "warning: {} centroid pairs coincide\n", dup);
  SimulationConfig sc;
  sc.scale = parse_distance_unit(a.distance_unit);
  const auto truth = generate_truth(graph, sc, a.seed);
  fs::create_directories(out / "data");
  write_truth(out / "truth.json", truth, graph);
  json files = json::array();
  for (int r = 0; r < a.replicates; ++r) {
    const auto name = fmt::format("dataset_{:03d}.csv", r + 1);
    write_dataset(out / "data" / name, generate_dataset(truth, r));
    files.push_back("data/" + name);
  }
  json manifest;
  manifest["command"] = "simulate";
  manifest["seed"] = a.seed;
  manifest["replicates"] = a.replicates;
  manifest["distance_unit"] = a.distance_unit;
  manifest["graph"] = a.graph.to_json();
  manifest["datasets"] = files;
  manifest["counts"] = truth_json(truth, graph).at("counts");
  write_json(out / "manifest.json", manifest);
  fmt::print("wrote truth and {} datasets to {}\n", a.replicates, out.string());
  fmt::print("truth: {}\n", manifest["counts"].dump());
  return 0;
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  GraphArgs graph;
  std::string config, data, cases, population, order, out;
  std::string model = "MDAGAR";
  std::string likelihood = "gaussian";
  std::uint64_t seed = 1;
  int iterations = 10000, burn_in = 5000, thin = 1, chains = 2, K = 15;
  double alpha = 1.0;
  int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  bool no_intercept = false, per_disease_rho = false;
  std::optional<double> delta;
  std::map<std::string, CLI::Option*> opt;
};

Dataset dataset_from_strata(const fs::path& cases, const fs::path& population, const RegionGraph& graph) {
  const auto strata = read_strata(cases, population, graph);
  const auto E = expected_counts(strata);
  const auto Y = observed_counts(strata);
  Dataset data;
  data.likelihood = Likelihood::Poisson;
  data.regions = graph.labels();
  for (int d = 0; d < strata.q(); ++d) {
    DiseaseData dd;
    dd.name = strata.diseases[static_cast<std::size_t>(d)];
    dd.y = Y.col(d);
    dd.E = E.col(d);
    dd.X = Eigen::MatrixXd::Ones(graph.n_regions(), 1);
    dd.covariate_names = {std::string(kInterceptName)};
    data.diseases.push_back(std::move(dd));
  }
  data.validate();
  return data;
}

void write_boundary_outputs(const fs::path& dir, const BoundaryReport& report, const std::string& stem,
                            const json& extra = json::object()) {
  write_report_csv(dir / (stem + ".csv"), report);
  auto j = report_json(report);
  for (const auto& [k, v] : extra.items()) j[k] = v;
  write_json(dir / (stem + ".json"), j);
}

int cmd_fit(FitArgs& a) {
  json cfg = a.config.empty() ? json::object() : load_json(a.config);
  a.graph.merge_config(cfg);
  merge(cfg, "data", a.opt["data"], a.data);
  merge(cfg, "cases", a.opt["cases"], a.cases);
  merge(cfg, "population", a.opt["population"], a.population);
  merge(cfg, "order", a.opt["order"], a.order);
  merge(cfg, "out", a.opt["out"], a.out);
  merge(cfg, "model", a.opt["model"], a.model);
  merge(cfg, "likelihood", a.opt["likelihood"], a.likelihood);
  merge(cfg, "workers", a.opt["workers"], a.workers);
  merge(cfg, "no_intercept", a.opt["no-intercept"], a.no_intercept);
  if (a.opt["delta"]->count() == 0 && cfg.contains("delta") && !cfg["delta"].is_null()) a.delta = cfg["delta"].get<double>();

  SamplerConfig sc = cfg.contains("sampler") ? sampler_config_from_json(cfg.at("sampler")) : SamplerConfig{};
  auto flag = [&](const char* name, auto& target, auto value) {
    if (a.opt[name]->count() > 0) target = value;
  };
  flag("seed", sc.seed, a.seed);
  flag("iterations", sc.iterations, a.iterations);
  flag("burn-in", sc.burn_in, a.burn_in);
  flag("thin", sc.thin, a.thin);
  flag("chains", sc.n_chains, a.chains);
  flag("K", sc.K, a.K);
  flag("alpha", sc.alpha, a.alpha);
  if (a.per_disease_rho) sc.joint_rho = false;
  sc.validate();

  const auto model = parse_spatial_model(a.model);
  const auto likelihood = parse_likelihood(a.likelihood);
  const auto graph = a.graph.load(false);
  Dataset data;
  json data_source;
  if (!a.cases.empty() || !a.population.empty()) {
    if (a.cases.empty() || a.population.empty()) throw std::invalid_argument("--cases and --population go together");
    if (likelihood != Likelihood::Poisson) throw std::invalid_argument("stratified counts require --likelihood poisson");
    data = dataset_from_strata(a.cases, a.population, graph);
    data_source = {{"cases", fs::absolute(a.cases).string()}, {"population", fs::absolute(a.population).string()}};
  } else {
    if (a.data.empty()) throw std::invalid_argument("fit needs --data or --cases/--population");
    data = read_dataset(a.data, graph, likelihood, !a.no_intercept);
    data_source = fs::absolute(a.data).string();
  }
  std::vector<RegionIndex> order;
  if (!a.order.empty()) order = read_order_file(a.order, graph);

  const fs::path out = a.out.empty() ? default_output_dir() / "fit" : fs::path(a.out);
  const auto samples = run_chains(graph, data, model, sc, a.workers, order);
  json extra;
  extra["command"] = "fit";
  extra["data"] = data_source;
  extra["intercept"] = !a.no_intercept;
  extra["graph"] = a.graph.to_json();
  if (!a.order.empty()) extra["order"] = fs::absolute(a.order).string();
  write_posterior(out, samples, sc, extra);

  if (likelihood == Likelihood::Poisson && !a.cases.empty()) {
    // Standardised counts used by the fit, for downstream scoring.
    write_dataset(out / "standardized_data.csv", data);
  }
  if (a.delta) {
    for (int d = 0; d < data.q(); ++d) {
      const auto probs = edge_probabilities(samples, graph, BoundaryQuery::within(d));
      const auto decision = select_threshold(probs.values(), *a.delta);
      const auto report = make_report(probs, decision, samples.regions, samples.diseases);
      write_boundary_outputs(out, report, fmt::format("boundaries_within_{}", samples.diseases[static_cast<std::size_t>(d)]));
    }
  }
  fmt::print("{} chains x {} draws written to {}\n", sc.n_chains, sc.draws_per_chain(), out.string());
  for (std::size_t c = 0; c < samples.chains.size(); ++c) {
    const auto& acc = samples.chains[c].acceptance;
    fmt::print("chain {}: acceptance gamma {:.3f} stick {:.3f} rho {:.3f} A {:.3f}\n", c + 1, acc.gamma.rate(),
               acc.stick.rate(), acc.rho.rate(), acc.mixer.rate());
  }
  return 0;
}

// ---------------------------------------------------------------- boundaries

struct BoundaryArgs {
  GraphArgs graph;
  std::string config, posterior, query = "within", disease, pair, out;
  double delta = 0.05;
  int top = 0;
  std::map<std::string, CLI::Option*> opt;
};

RegionGraph graph_for_posterior(GraphArgs& g, const json& manifest) {
  if (g.adjacency_opt->count() == 0 && manifest.contains("graph")) {
    const auto& mg = manifest.at("graph");
    g.adjacency = mg.value("adjacency", g.adjacency);
    g.labels = mg.value("labels", g.labels);
  }
  return g.load(false);
}

int disease_index(const std::vector<std::string>& names, const std::string& name) {
  for (std::size_t d = 0; d < names.size(); ++d)
    if (names[d] == name) return static_cast<int>(d);
  throw DataError(fmt::format("unknown disease '{}'", name));
}

int cmd_boundaries(BoundaryArgs& a) {
  json cfg = a.config.empty() ? json::object() : load_json(a.config);
  a.graph.merge_config(cfg);
  merge(cfg, "posterior", a.opt["posterior"], a.posterior);
  merge(cfg, "query", a.opt["query"], a.query);
  merge(cfg, "disease", a.opt["disease"], a.disease);
  merge(cfg, "pair", a.opt["pair"], a.pair);
  merge(cfg, "delta", a.opt["delta"], a.delta);
  merge(cfg, "top", a.opt["top"], a.top);
  merge(cfg, "out", a.opt["out"], a.out);
  if (a.posterior.empty()) throw std::invalid_argument("boundaries needs --posterior");
  const auto kind = parse_query_kind(a.query);
  if (!(a.delta > 0.0 && a.delta < 1.0)) throw std::invalid_argument("--delta must lie in (0,1)");

  const auto manifest = read_manifest(a.posterior);
  const auto graph = graph_for_posterior(a.graph, manifest);
  const auto samples = read_posterior(a.posterior);
  const fs::path out = a.out.empty() ? fs::path(a.posterior) : fs::path(a.out);
  fs::create_directories(out);

  std::vector<BoundaryQuery> queries;
  if (kind == QueryKind::Within) {
    if (!a.pair.empty()) throw std::invalid_argument("--pair applies to two-disease queries");
    if (a.disease.empty()) {
      for (int d = 0; d < samples.q; ++d) queries.push_back(BoundaryQuery::within(d));
    } else {
      queries.push_back(BoundaryQuery::within(disease_index(samples.diseases, a.disease)));
    }
  } else {
    std::vector<std::pair<int, int>> pairs;
    if (a.pair.empty()) {
      for (int d = 0; d < samples.q; ++d)
        for (int e = 0; e < samples.q; ++e)
          if (d < e || (kind == QueryKind::DirectedCross && d != e)) pairs.emplace_back(d, e);
    } else {
      const auto names = split_list(a.pair);
      if (names.size() != 2) throw std::invalid_argument("--pair takes two disease names, e.g. lung,colorectal");
      pairs.emplace_back(disease_index(samples.diseases, names[0]), disease_index(samples.diseases, names[1]));
    }
    for (auto [d, e] : pairs) queries.push_back({kind, d, e});
  }

  for (const auto& q : queries) {
    const auto probs = edge_probabilities(samples, graph, q);
    auto stem = fmt::format("boundaries_{}_{}", to_string(kind), samples.diseases[static_cast<std::size_t>(q.d)]);
    if (kind != QueryKind::Within) stem += "_" + samples.diseases[static_cast<std::size_t>(q.e)];
    ThresholdDecision decision;
    json extra = json::object();
    if (a.top > 0) {
      const auto v = probs.values();
      const auto idx = top_T(v, a.top);
      decision.delta = a.delta;
      decision.selected.assign(v.size(), false);
      for (auto k : idx) decision.selected[k] = true;
      decision.n_selected = a.top;
      extra["top"] = a.top;
      stem += fmt::format("_top{}", a.top);
    } else {
      decision = select_threshold(probs.values(), a.delta);
    }
    const auto report = make_report(probs, decision, samples.regions, samples.diseases);
    write_boundary_outputs(out, report, stem, extra);
    fmt::print("{}: {} of {} selected{}\n", stem, decision.n_selected, probs.m(),
               a.top > 0 ? "" : fmt::format(" (t* = {:.4f}, FDR = {:.4f})", decision.threshold, decision.fdr));
  }
  return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  GraphArgs graph;
  std::string config, truth, out;
  std::vector<std::string> fits;
  std::string within_T = "60,65,70,75,80,85";
  std::string cross12_T = "60,65,70,75,80,85";
  std::string cross21_T = "70,75,80,85,90,95";
  std::string region_T = "15,20,22,25,30";
  std::map<std::string, CLI::Option*> opt;
};

int cmd_evaluate(EvaluateArgs& a) {
  json cfg = a.config.empty() ? json::object() : load_json(a.config);
  a.graph.merge_config(cfg);
  merge(cfg, "truth", a.opt["truth"], a.truth);
  merge(cfg, "fit", a.opt["fit"], a.fits);
  merge(cfg, "out", a.opt["out"], a.out);
  merge(cfg, "within_T", a.opt["within-T"], a.within_T);
  merge(cfg, "cross12_T", a.opt["cross12-T"], a.cross12_T);
  merge(cfg, "cross21_T", a.opt["cross21-T"], a.cross21_T);
  merge(cfg, "region_T", a.opt["region-T"], a.region_T);
  if (a.truth.empty() || a.fits.empty()) throw std::invalid_argument("evaluate needs --truth and at least one --fit");
  const auto truth = read_truth(a.truth);
  const auto graph = a.graph.load(false);
  if (graph.labels() != truth.regions) throw DataError("truth regions do not match the graph");
  const fs::path out = a.out.empty() ? default_output_dir() / "evaluation" : fs::path(a.out);
  fs::create_directories(out);
  const int q = truth.q();

  struct RateKey {
    std::string model, query;
    int T;
    bool operator<(const RateKey& o) const { return std::tie(model, query, T) < std::tie(o.model, o.query, o.T); }
  };
  std::map<RateKey, std::vector<SensSpec>> rates;
  std::map<std::pair<std::string, std::string>, std::vector<PosteriorSummary>> params;
  std::ofstream dscore(out / "dscore.csv"), kl(out / "kl.csv");
  if (!dscore || !kl) throw DataError("cannot write evaluation tables in " + out.string());
  dscore << "model,fit,disease,G,P,D\n";
  kl << "model,fit,posterior_mean_kl\n";

  const auto true_mean = truth.mean();
  std::vector<std::pair<std::string, double>> truths;
  for (int d = 0; d < q; ++d)
    for (Eigen::Index j = 0; j < truth.config.beta[static_cast<std::size_t>(d)].size(); ++j)
      truths.emplace_back(fmt::format("beta_{}_{}", d + 1, j + 1), truth.config.beta[static_cast<std::size_t>(d)](j));
  for (int d = 0; d < q; ++d) truths.emplace_back(fmt::format("tau_{}", d + 1), truth.config.tau(d));
  for (int d = 0; d < q; ++d) truths.emplace_back(fmt::format("rho_{}", d + 1), truth.config.rho(d));

  for (const auto& dir : a.fits) {
    const auto manifest = read_manifest(dir);
    const auto samples = read_posterior(dir);
    const std::string model(to_string(samples.model));
    if (!manifest.contains("data") || !manifest.at("data").is_string())
      throw DataError(dir + ": manifest does not name a dataset file");
    const auto data = read_dataset(manifest.at("data").get<std::string>(), graph, samples.likelihood,
                                   manifest.value("intercept", true));

    auto score = [&](BoundaryQuery query, const std::string& name, const std::vector<int>& Ts) {
      const auto probs = edge_probabilities(samples, graph, query);
      const auto flags = true_boundaries(truth, graph, query);
      const auto v = probs.values();
      for (int T : Ts) {
        if (T > static_cast<int>(v.size())) continue;
        std::vector<bool> sel(v.size(), false);
        for (auto k : top_T(v, T)) sel[k] = true;
        rates[{model, name, T}].push_back(sensitivity_specificity(sel, flags));
      }
    };
    for (int d = 0; d < q; ++d) score(BoundaryQuery::within(d), fmt::format("within_{}", d + 1), parse_int_list(a.within_T));
    for (int d = 0; d < q; ++d)
      for (int e = 0; e < q; ++e) {
        if (d == e) continue;
        score({QueryKind::DirectedCross, d, e}, fmt::format("cross_{}_{}", d + 1, e + 1),
              parse_int_list(d < e ? a.cross12_T : a.cross21_T));
        if (d < e)
          score({QueryKind::WithinRegion, d, e}, fmt::format("within-region_{}_{}", d + 1, e + 1), parse_int_list(a.region_T));
      }

    const auto seed = manifest.at("config").at("seed").get<std::uint64_t>();
    const auto ds = d_score(samples, data, seed);
    for (int d = 0; d < q; ++d)
      dscore << model << ',' << dir << ',' << samples.diseases[static_cast<std::size_t>(d)] << ','
             << text::format_double(ds.G(d)) << ',' << text::format_double(ds.P(d)) << ',' << text::format_double(ds.D(d)) << '\n';
    dscore << model << ',' << dir << ",all," << text::format_double(ds.G_sum) << ',' << text::format_double(ds.P_sum) << ','
           << text::format_double(ds.D_sum) << '\n';
    if (samples.likelihood == Likelihood::Gaussian)
      kl << model << ',' << dir << ',' << text::format_double(posterior_kl(samples, data, true_mean, truth.config.tau).mean()) << '\n';

    for (const auto& [name, value] : truths) {
      Eigen::VectorXd draws;
      if (name.rfind("beta_", 0) == 0) {
        int d = 0, j = 0;
        std::sscanf(name.c_str(), "beta_%d_%d", &d, &j);
        draws = samples.pooled("beta", samples.coefficient_offset(d - 1) + j - 1);
      } else if (name.rfind("tau_", 0) == 0) {
        if (samples.likelihood != Likelihood::Gaussian) continue;
        draws = samples.pooled("tau", std::stoi(name.substr(4)) - 1);
      } else {
        draws = samples.pooled("rho", std::stoi(name.substr(4)) - 1);
      }
      params[{model, name}].push_back(summarize(draws));
    }
  }

  std::ofstream rate_csv(out / "boundary_rates.csv");
  rate_csv << "model,query,T,specificity,sensitivity,fits\n";
  for (const auto& [key, list] : rates) {
    double spec = 0.0, sens = 0.0;
    for (const auto& s : list) {
      spec += s.specificity;
      sens += s.sensitivity;
    }
    rate_csv << key.model << ',' << key.query << ',' << key.T << ',' << text::format_double(spec / list.size()) << ','
             << text::format_double(sens / list.size()) << ',' << list.size() << '\n';
  }
  std::ofstream param_csv(out / "parameters.csv");
  param_csv << "model,parameter,truth,mean,lower,upper,coverage,mse,fits\n";
  std::map<std::string, double> truth_of(truths.begin(), truths.end());
  for (const auto& [key, list] : params) {
    const double t = truth_of.at(key.second);
    const auto cm = coverage_and_mse(list, t);
    double mean = 0, lo = 0, hi = 0;
    for (const auto& s : list) {
      mean += s.mean;
      lo += s.lower;
      hi += s.upper;
    }
    const double k = static_cast<double>(list.size());
    param_csv << key.first << ',' << key.second << ',' << text::format_double(t) << ',' << text::format_double(mean / k) << ','
              << text::format_double(lo / k) << ',' << text::format_double(hi / k) << ',' << text::format_double(cm.coverage)
              << ',' << text::format_double(cm.mse) << ',' << cm.datasets << '\n';
  }
  fmt::print("evaluated {} fits; tables in {}\n", a.fits.size(), out.string());
  return 0;
}

// ---------------------------------------------------------------- moran

struct MoranArgs {
  GraphArgs graph;
  std::string config, values, data, disease, likelihood = "poisson", breaks = "50,100,150,200,250", out;
  std::string distance_unit = "km";
  std::map<std::string, CLI::Option*> opt;
};

int cmd_moran(MoranArgs& a) {
  json cfg = a.config.empty() ? json::object() : load_json(a.config);
  a.graph.merge_config(cfg);
  merge(cfg, "values", a.opt["values"], a.values);
  merge(cfg, "data", a.opt["data"], a.data);
  merge(cfg, "disease", a.opt["disease"], a.disease);
  merge(cfg, "likelihood", a.opt["likelihood"], a.likelihood);
  merge(cfg, "breaks", a.opt["breaks"], a.breaks);
  merge(cfg, "distance_unit", a.opt["distance-unit"], a.distance_unit);
  merge(cfg, "out", a.opt["out"], a.out);
  const auto graph = a.graph.load(true);
  const int n = graph.n_regions();

  std::vector<std::pair<std::string, Eigen::VectorXd>> series;
  if (!a.values.empty()) {
    Eigen::VectorXd v = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
    for (const auto& line : text::read_lines(a.values)) {
      const auto f = text::split_csv(line);
      if (f.size() != 2) throw DataError(a.values + ": expected region,value");
      if (f[1] == "value") continue;
      v(graph.index_of(f[0])) = text::parse_double(f[1], "value");
    }
    if (!v.allFinite()) throw DataError(a.values + ": missing values for some regions");
    series.emplace_back("values", v);
  } else if (!a.data.empty()) {
    const auto lik = parse_likelihood(a.likelihood);
    const auto data = read_dataset(a.data, graph, lik);
    for (const auto& dd : data.diseases) {
      if (!a.disease.empty() && dd.name != a.disease) continue;
      series.emplace_back(dd.name, lik == Likelihood::Poisson ? Eigen::VectorXd(dd.y.cwiseQuotient(dd.E)) : dd.y);
    }
    if (series.empty()) throw DataError(fmt::format("disease '{}' not found", a.disease));
  } else {
    throw std::invalid_argument("moran needs --values or --data");
  }

  const auto scale = parse_distance_unit(a.distance_unit);
  std::vector<Point> pts = graph.centroids();
  double unit = scale.divisor;
  if (scale.mode == DistanceScale::Mode::MaxRescale) unit = centroid_distances(pts).maxCoeff();
  for (auto& p : pts) {
    p.x /= unit;
    p.y /= unit;
  }
  std::vector<double> breaks;
  for (const auto& f : split_list(a.breaks)) breaks.push_back(text::parse_double(f, "distance break"));
  const auto bands = distance_band_neighbors(pts, breaks);

  const fs::path out = a.out.empty() ? default_output_dir() / "moran.csv" : fs::path(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream csv(out);
  if (!csv) throw DataError("cannot write " + out.string());
  csv << "series,band,lower,upper,pairs,moran_i,note\n";
  for (const auto& [name, v] : series) {
    const auto res = moran_correlogram(v, bands);
    for (std::size_t r = 0; r < res.size(); ++r) {
      csv << name << ',' << r + 1 << ',' << text::format_double(r == 0 ? 0.0 : breaks[r - 1]) << ','
          << text::format_double(breaks[r]) << ',' << static_cast<long long>(res[r].weight_sum / 2) << ','
          << (res[r].I ? text::format_double(*res[r].I) : "NA") << ',' << res[r].reason << '\n';
    }
  }
  fmt::print("wrote {}\n", out.string());
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Multivariate difference-boundary detection with MARDP models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "mardp 1.0.0");

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Generate a synthetic truth and replicate datasets");
  sim.graph.add(s);
  s->add_option("--config", sim.config, "JSON run configuration");
  sim.seed_opt = s->add_option("--seed", sim.seed, "Master seed");
  sim.rep_opt = s->add_option("--replicates", sim.replicates, "Number of datasets");
  sim.unit_opt = s->add_option("--distance-unit", sim.distance_unit, "km, max, or a divisor for centroid units");
  sim.out_opt = s->add_option("--out", sim.out, "Output directory");

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Run the MCMC sampler and write posterior samples");
  fit.graph.add(f);
  f->add_option("--config", fit.config, "JSON run configuration");
  fit.opt["data"] = f->add_option("--data", fit.data, "Dataset CSV (region,disease,y[,E],x...)");
  fit.opt["cases"] = f->add_option("--cases", fit.cases, "Stratified case counts (region,disease,stratum,cases)");
  fit.opt["population"] = f->add_option("--population", fit.population, "Stratified population (region,stratum,population)");
  fit.opt["model"] = f->add_option("--model", fit.model, "MDAGAR | MCAR | DAGAR_ind | CAR_ind");
  fit.opt["likelihood"] = f->add_option("--likelihood", fit.likelihood, "gaussian | poisson");
  fit.opt["seed"] = f->add_option("--seed", fit.seed, "Master seed");
  fit.opt["iterations"] = f->add_option("--iterations", fit.iterations, "Iterations per chain, burn-in included");
  fit.opt["burn-in"] = f->add_option("--burn-in", fit.burn_in, "Burn-in iterations");
  fit.opt["thin"] = f->add_option("--thin", fit.thin, "Thinning interval");
  fit.opt["chains"] = f->add_option("--chains", fit.chains, "Number of chains");
  fit.opt["K"] = f->add_option("--K", fit.K, "Stick-breaking truncation");
  fit.opt["alpha"] = f->add_option("--alpha", fit.alpha, "DP concentration");
  fit.opt["workers"] = f->add_option("--workers", fit.workers, "Parallel chains");
  fit.opt["order"] = f->add_option("--order", fit.order, "DAGAR region order file");
  fit.opt["out"] = f->add_option("--out", fit.out, "Output directory");
  fit.opt["no-intercept"] = f->add_flag("--no-intercept", fit.no_intercept, "Do not prepend an intercept column");
  f->add_flag("--per-disease-rho", fit.per_disease_rho, "Update each rho_d separately");
  fit.opt["delta"] = f->add_option("--delta", fit.delta, "Also write within-disease boundary reports at this FDR level");

  BoundaryArgs bnd;
  auto* b = app.add_subcommand("boundaries", "Boundary probabilities and FDR-controlled selection");
  bnd.graph.add(b);
  b->add_option("--config", bnd.config, "JSON run configuration");
  bnd.opt["posterior"] = b->add_option("--posterior", bnd.posterior, "Posterior directory written by fit");
  bnd.opt["query"] = b->add_option("--query", bnd.query, "within | shared | cross | directed-cross | within-region");
  bnd.opt["disease"] = b->add_option("--disease", bnd.disease, "Disease for within queries (default: all)");
  bnd.opt["pair"] = b->add_option("--pair", bnd.pair, "Disease pair a,b for two-disease queries (default: all)");
  bnd.opt["delta"] = b->add_option("--delta", bnd.delta, "Target FDR level");
  bnd.opt["top"] = b->add_option("--top", bnd.top, "Select the T most probable edges instead");
  bnd.opt["out"] = b->add_option("--out", bnd.out, "Output directory (default: posterior directory)");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Score fits against a simulation truth");
  ev.graph.add(e);
  e->add_option("--config", ev.config, "JSON run configuration");
  ev.opt["truth"] = e->add_option("--truth", ev.truth, "truth.json from simulate");
  ev.opt["fit"] = e->add_option("--fit", ev.fits, "Posterior directories (repeatable)");
  ev.opt["within-T"] = e->add_option("--within-T", ev.within_T, "T values for within-disease rates");
  ev.opt["cross12-T"] = e->add_option("--cross12-T", ev.cross12_T, "T values for disease d vs e, d < e");
  ev.opt["cross21-T"] = e->add_option("--cross21-T", ev.cross21_T, "T values for disease d vs e, d > e");
  ev.opt["region-T"] = e->add_option("--region-T", ev.region_T, "T values for within-region differences");
  ev.opt["out"] = e->add_option("--out", ev.out, "Output directory");

  MoranArgs mo;
  auto* m = app.add_subcommand("moran", "Moran's I correlogram over distance bands");
  mo.graph.add(m);
  m->add_option("--config", mo.config, "JSON run configuration");
  mo.opt["values"] = m->add_option("--values", mo.values, "CSV region,value");
  mo.opt["data"] = m->add_option("--data", mo.data, "Dataset CSV; Poisson data use y/E");
  mo.opt["disease"] = m->add_option("--disease", mo.disease, "Restrict to one disease");
  mo.opt["likelihood"] = m->add_option("--likelihood", mo.likelihood, "gaussian | poisson");
  mo.opt["breaks"] = m->add_option("--breaks", mo.breaks, "Band upper limits, comma separated");
  mo.opt["distance-unit"] = m->add_option("--distance-unit", mo.distance_unit, "km, max, or a divisor");
  mo.opt["out"] = m->add_option("--out", mo.out, "Output CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (s->parsed()) return cmd_simulate(sim);
    if (f->parsed()) return cmd_fit(fit);
    if (b->parsed()) return cmd_boundaries(bnd);
    if (e->parsed()) return cmd_evaluate(ev);
    if (m->parsed()) return cmd_moran(mo);
  } catch (const DataError& err) {
    fmt::print(stderr, "data error: {}\n", err.what());
    return 3;
  } catch (const NumericalError& err) {
    fmt::print(stderr, "numerical failure: {}\n", err.what());
    return 4;
  } catch (const std::invalid_argument& err) {
    fmt::print(stderr, "usage error: {}\n", err.what());
    return 2;
  } catch (const std::out_of_range& err) {
    fmt::print(stderr, "usage error: {}\n", err.what());
    return 2;
  } catch (const std::exception& err) {
    fmt::print(stderr, "error: {}\n", err.what());
    return 1;
  }
  return 2;
}

}  // namespace mardp::cli

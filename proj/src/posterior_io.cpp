#include "mardp/posterior_io.hpp"

#include "mardp/errors.hpp"
#include "mardp/text_io.hpp"

#include <fmt/format.h>

#include <fstream>
#include <map>

namespace mardp {

namespace {

using json = nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j.at(static_cast<std::size_t>(r)).size()) != cols)
      throw std::invalid_argument("ragged matrix in config");
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = j.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

json block_json(const BlockAcceptance& b) { return {{"accepted", b.accepted}, {"proposed", b.proposed}, {"rate", b.rate()}}; }

class BlockWriter {
 public:
  explicit BlockWriter(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw DataError("cannot write " + path.string());
    buf_.append(std::string_view("chain,iter,name,value\n"));
  }
  ~BlockWriter() { flush(); }
  BlockWriter(const BlockWriter&) = delete;
  BlockWriter& operator=(const BlockWriter&) = delete;

  template <typename T>
  void row(int chain, int iter, std::string_view name, T value) {
    fmt::format_to(std::back_inserter(buf_), "{},{},{},{}\n", chain, iter, name, value);
    if (buf_.size() > (1 << 20)) flush();
  }

 private:
  void flush() {
    out_.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    buf_.clear();
  }
  std::ofstream out_;
  fmt::memory_buffer buf_;
};

}  // namespace

json to_json(const SamplerConfig& c) {
  json j;
  j["K"] = c.K;
  j["alpha"] = c.alpha;
  j["iterations"] = c.iterations;
  j["burn_in"] = c.burn_in;
  j["thin"] = c.thin;
  j["n_chains"] = c.n_chains;
  j["seed"] = c.seed;
  j["initial_gamma_step"] = c.initial_gamma_step;
  j["target_acceptance"] = c.target_acceptance;
  j["adapt"] = c.adapt;
  j["joint_rho"] = c.joint_rho;
  j["location_shift"] = c.location_shift;
  j["gamma_gibbs"] = c.gamma_gibbs;
  j["whitened_moves"] = c.whitened_moves;
  j["use_likelihood"] = c.use_likelihood;
  json p;
  p["a_e"] = c.priors.a_e;
  p["b_e"] = c.priors.b_e;
  p["a_s"] = c.priors.a_s;
  p["b_s"] = c.priors.b_s;
  p["sigma2_beta"] = c.priors.sigma2_beta;
  p["a_v"] = c.priors.a_v;
  p["b_v"] = c.priors.b_v;
  p["nu"] = c.priors.nu ? json(*c.priors.nu) : json(nullptr);
  p["R"] = c.priors.R ? matrix_to_json(*c.priors.R) : json(nullptr);
  j["priors"] = p;
  return j;
}

SamplerConfig sampler_config_from_json(const json& j, SamplerConfig c) {
  auto take = [&](const json& src, const char* key, auto& field) {
    if (src.contains(key) && !src.at(key).is_null()) field = src.at(key).get<std::decay_t<decltype(field)>>();
  };
  take(j, "K", c.K);
  take(j, "alpha", c.alpha);
  take(j, "iterations", c.iterations);
  take(j, "burn_in", c.burn_in);
  take(j, "thin", c.thin);
  take(j, "n_chains", c.n_chains);
  take(j, "seed", c.seed);
  take(j, "initial_gamma_step", c.initial_gamma_step);
  take(j, "target_acceptance", c.target_acceptance);
  take(j, "adapt", c.adapt);
  take(j, "joint_rho", c.joint_rho);
  take(j, "location_shift", c.location_shift);
  take(j, "gamma_gibbs", c.gamma_gibbs);
  take(j, "whitened_moves", c.whitened_moves);
  take(j, "use_likelihood", c.use_likelihood);
  if (j.contains("priors")) {
    const auto& p = j.at("priors");
    take(p, "a_e", c.priors.a_e);
    take(p, "b_e", c.priors.b_e);
    take(p, "a_s", c.priors.a_s);
    take(p, "b_s", c.priors.b_s);
    take(p, "sigma2_beta", c.priors.sigma2_beta);
    take(p, "a_v", c.priors.a_v);
    take(p, "b_v", c.priors.b_v);
    if (p.contains("nu") && !p.at("nu").is_null()) c.priors.nu = p.at("nu").get<double>();
    if (p.contains("R") && !p.at("R").is_null()) c.priors.R = matrix_from_json(p.at("R"));
  }
  return c;
}

json to_json(const AcceptanceRates& r) {
  return {{"gamma", block_json(r.gamma)}, {"stick", block_json(r.stick)}, {"rho", block_json(r.rho)},
          {"A", block_json(r.mixer)},     {"beta", block_json(r.beta)},   {"theta", block_json(r.theta)},
          {"rho_whitened", block_json(r.rho_whitened)}, {"A_whitened", block_json(r.mixer_whitened)}};
}

void write_posterior(const std::filesystem::path& dir, const PosteriorSamples& s, const SamplerConfig& config,
                     const json& extra) {
  std::filesystem::create_directories(dir);
  const int q = s.q;
  {
    BlockWriter w(dir / "beta.csv");
    std::vector<std::string> names;
    for (int d = 0; d < q; ++d)
      for (std::size_t j = 0; j < s.covariates[static_cast<std::size_t>(d)].size(); ++j)
        names.push_back(fmt::format("beta_{}_{}", d + 1, j + 1));
    for (std::size_t c = 0; c < s.chains.size(); ++c) {
      const auto& ch = s.chains[c];
      for (int r = 0; r < ch.draws(); ++r)
        for (std::size_t k = 0; k < names.size(); ++k)
          w.row(static_cast<int>(c) + 1, ch.iterations[static_cast<std::size_t>(r)], names[k], ch.beta(r, static_cast<Eigen::Index>(k)));
    }
  }
  auto write_simple = [&](const char* file, const Eigen::MatrixXd ChainSamples::*block, auto name_of) {
    BlockWriter w(dir / file);
    for (std::size_t c = 0; c < s.chains.size(); ++c) {
      const auto& ch = s.chains[c];
      const auto& m = ch.*block;
      for (int r = 0; r < ch.draws(); ++r)
        for (Eigen::Index k = 0; k < m.cols(); ++k)
          w.row(static_cast<int>(c) + 1, ch.iterations[static_cast<std::size_t>(r)], name_of(static_cast<int>(k)), m(r, k));
    }
  };
  write_simple("theta.csv", &ChainSamples::theta, [](int k) { return fmt::format("theta_{}", k + 1); });
  if (s.likelihood == Likelihood::Gaussian)
    write_simple("tau.csv", &ChainSamples::tau, [](int d) { return fmt::format("tau_{}", d + 1); });
  write_simple("rho.csv", &ChainSamples::rho, [](int d) { return fmt::format("rho_{}", d + 1); });
  std::vector<std::string> a_names;
  for (int d = 0; d < q; ++d)
    for (int h = 0; h <= d; ++h) a_names.push_back(fmt::format("A_{}_{}", d + 1, h + 1));
  write_simple("A.csv", &ChainSamples::A, [&](int k) { return a_names[static_cast<std::size_t>(k)]; });
  {
    BlockWriter w(dir / "tau_s.csv");
    for (std::size_t c = 0; c < s.chains.size(); ++c) {
      const auto& ch = s.chains[c];
      for (int r = 0; r < ch.draws(); ++r) w.row(static_cast<int>(c) + 1, ch.iterations[static_cast<std::size_t>(r)], "tau_s", ch.tau_s(r));
    }
  }
  {
    BlockWriter w(dir / "labels.csv");
    std::vector<std::string> names;
    for (int d = 0; d < q; ++d)
      for (int i = 0; i < s.n; ++i) names.push_back(fmt::format("u_{}_{}", d + 1, i + 1));
    for (std::size_t c = 0; c < s.chains.size(); ++c) {
      const auto& ch = s.chains[c];
      for (int r = 0; r < ch.draws(); ++r)
        for (std::size_t o = 0; o < names.size(); ++o)
          w.row(static_cast<int>(c) + 1, ch.iterations[static_cast<std::size_t>(r)], names[o],
                ch.labels(r, static_cast<Eigen::Index>(o)) + 1);
    }
  }

  json m;
  m["model"] = std::string(to_string(s.model));
  m["likelihood"] = std::string(to_string(s.likelihood));
  m["n"] = s.n;
  m["q"] = s.q;
  m["K"] = s.K;
  m["regions"] = s.regions;
  m["diseases"] = s.diseases;
  m["covariates"] = s.covariates;
  m["config"] = to_json(config);
  m["seed"] = config.seed;
  json chains = json::array();
  for (const auto& ch : s.chains) {
    json steps;
    steps["gamma"] = ch.final_steps.gamma;
    steps["stick"] = ch.final_steps.stick;
    steps["rho"] = ch.final_steps.rho;
    steps["mixer_diag"] = ch.final_steps.mixer_diag;
    steps["mixer_offdiag"] = ch.final_steps.mixer_offdiag;
    steps["rho_whitened"] = ch.final_steps.rho_whitened;
    steps["mixer_whitened"] = ch.final_steps.mixer_whitened;
    chains.push_back({{"draws", ch.draws()},
                      {"acceptance", to_json(ch.acceptance)},
                      {"final_steps", steps},
                      {"wall_seconds", ch.wall_seconds}});
  }
  m["chains"] = chains;
  for (const auto& [key, value] : extra.items()) m[key] = value;
  std::ofstream out(dir / "manifest.json");
  if (!out) throw DataError("cannot write " + (dir / "manifest.json").string());
  out << m.dump(2) << '\n';
}

json read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw DataError("cannot open " + (dir / "manifest.json").string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(fmt::format("{}: {}", (dir / "manifest.json").string(), e.what()));
  }
}

namespace {

// Reads a long-format block file into per-chain, per-iteration rows keyed by name.
struct LongTable {
  std::vector<std::vector<int>> iterations;                    // per chain
  std::vector<std::map<std::string, std::vector<double>>> values;  // per chain: name -> column
};

LongTable read_long(const std::filesystem::path& path, int n_chains) {
  LongTable t;
  t.iterations.resize(static_cast<std::size_t>(n_chains));
  t.values.resize(static_cast<std::size_t>(n_chains));
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (text::trim(line) != "chain,iter,name,value") throw DataError(path.string() + ": unexpected header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = text::split_csv(line);
    if (f.size() != 4) throw DataError(path.string() + ": malformed row '" + line + "'");
    const auto c = text::parse_int(f[0], "chain") - 1;
    if (c < 0 || c >= n_chains) throw DataError(path.string() + ": chain index out of range");
    const auto it = static_cast<int>(text::parse_int(f[1], "iter"));
    auto& iters = t.iterations[static_cast<std::size_t>(c)];
    if (iters.empty() || iters.back() != it) iters.push_back(it);
    t.values[static_cast<std::size_t>(c)][f[2]].push_back(text::parse_double(f[3], "value"));
  }
  return t;
}

Eigen::MatrixXd gather(const LongTable& t, std::size_t chain, const std::vector<std::string>& names, int draws,
                       const std::filesystem::path& path) {
  Eigen::MatrixXd m(draws, static_cast<Eigen::Index>(names.size()));
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto it = t.values[chain].find(names[k]);
    if (it == t.values[chain].end() || static_cast<int>(it->second.size()) != draws)
      throw DataError(fmt::format("{}: column {} missing or incomplete", path.string(), names[k]));
    for (int r = 0; r < draws; ++r) m(r, static_cast<Eigen::Index>(k)) = it->second[static_cast<std::size_t>(r)];
  }
  return m;
}

}  // namespace

PosteriorSamples read_posterior(const std::filesystem::path& dir) {
  const auto m = read_manifest(dir);
  PosteriorSamples s;
  try {
    s.model = parse_spatial_model(m.at("model").get<std::string>());
    s.likelihood = parse_likelihood(m.at("likelihood").get<std::string>());
    s.n = m.at("n").get<int>();
    s.q = m.at("q").get<int>();
    s.K = m.at("K").get<int>();
    s.regions = m.at("regions").get<std::vector<std::string>>();
    s.diseases = m.at("diseases").get<std::vector<std::string>>();
    s.covariates = m.at("covariates").get<std::vector<std::vector<std::string>>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("{}: {}", (dir / "manifest.json").string(), e.what()));
  }
  const auto& chain_meta = m.at("chains");
  const int n_chains = static_cast<int>(chain_meta.size());
  s.chains.resize(static_cast<std::size_t>(n_chains));

  auto names = [](auto fmt_name, int count) {
    std::vector<std::string> out;
    for (int k = 0; k < count; ++k) out.push_back(fmt_name(k));
    return out;
  };
  std::vector<std::string> beta_names, a_names, u_names;
  for (int d = 0; d < s.q; ++d)
    for (std::size_t j = 0; j < s.covariates[static_cast<std::size_t>(d)].size(); ++j)
      beta_names.push_back(fmt::format("beta_{}_{}", d + 1, j + 1));
  for (int d = 0; d < s.q; ++d)
    for (int h = 0; h <= d; ++h) a_names.push_back(fmt::format("A_{}_{}", d + 1, h + 1));
  for (int d = 0; d < s.q; ++d)
    for (int i = 0; i < s.n; ++i) u_names.push_back(fmt::format("u_{}_{}", d + 1, i + 1));
  const auto theta_names = names([](int k) { return fmt::format("theta_{}", k + 1); }, s.K);
  const auto tau_names = names([](int d) { return fmt::format("tau_{}", d + 1); }, s.q);
  const auto rho_names = names([](int d) { return fmt::format("rho_{}", d + 1); }, s.q);

  const auto beta = read_long(dir / "beta.csv", n_chains);
  const auto theta = read_long(dir / "theta.csv", n_chains);
  const auto labels = read_long(dir / "labels.csv", n_chains);
  const auto tau_s = read_long(dir / "tau_s.csv", n_chains);
  const auto rho = read_long(dir / "rho.csv", n_chains);
  const auto A = read_long(dir / "A.csv", n_chains);
  std::optional<LongTable> tau;
  if (s.likelihood == Likelihood::Gaussian) tau = read_long(dir / "tau.csv", n_chains);

  for (int c = 0; c < n_chains; ++c) {
    const auto cc = static_cast<std::size_t>(c);
    auto& ch = s.chains[cc];
    ch.iterations = theta.iterations[cc];
    const int draws = ch.draws();
    ch.beta = gather(beta, cc, beta_names, draws, dir / "beta.csv");
    ch.theta = gather(theta, cc, theta_names, draws, dir / "theta.csv");
    const Eigen::MatrixXd u = gather(labels, cc, u_names, draws, dir / "labels.csv");
    ch.labels = (u.array() - 1.0).cast<int>().matrix();
    ch.tau = tau ? gather(*tau, cc, tau_names, draws, dir / "tau.csv") : Eigen::MatrixXd(draws, 0);
    ch.tau_s = gather(tau_s, cc, {"tau_s"}, draws, dir / "tau_s.csv").col(0);
    ch.rho = gather(rho, cc, rho_names, draws, dir / "rho.csv");
    ch.A = gather(A, cc, a_names, draws, dir / "A.csv");
    const auto& meta = chain_meta.at(cc);
    if (meta.contains("wall_seconds")) ch.wall_seconds = meta.at("wall_seconds").get<double>();
  }
  return s;
}

}  // namespace mardp

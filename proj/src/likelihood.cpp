#include "mardp/likelihood.hpp"

#include "mardp/errors.hpp"
#include "mardp/text_io.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <stdexcept>

namespace mardp {

std::string_view to_string(Likelihood likelihood) {
  return likelihood == Likelihood::Gaussian ? "gaussian" : "poisson";
}

Likelihood parse_likelihood(std::string_view name) {
  if (name == "gaussian") return Likelihood::Gaussian;
  if (name == "poisson") return Likelihood::Poisson;
  throw std::invalid_argument(fmt::format("unknown likelihood '{}' (expected gaussian|poisson)", name));
}

int Dataset::disease_index(std::string_view name) const {
  for (int d = 0; d < q(); ++d)
    if (diseases[static_cast<std::size_t>(d)].name == name) return d;
  throw DataError(fmt::format("unknown disease '{}'", name));
}

void Dataset::validate() const {
  if (regions.empty() || diseases.empty()) throw DataError("dataset has no regions or no diseases");
  for (const auto& dd : diseases) {
    if (dd.y.size() != n()) throw DataError(fmt::format("disease '{}': {} outcomes for {} regions", dd.name, dd.y.size(), n()));
    if (dd.X.rows() != n()) throw DataError(fmt::format("disease '{}': design has {} rows", dd.name, dd.X.rows()));
    if (static_cast<Eigen::Index>(dd.covariate_names.size()) != dd.X.cols())
      throw DataError(fmt::format("disease '{}': covariate names do not match design columns", dd.name));
    if (!dd.y.allFinite() || !dd.X.allFinite()) throw DataError(fmt::format("disease '{}': non-finite data", dd.name));
    if (likelihood == Likelihood::Poisson) {
      if (dd.E.size() != n()) throw DataError(fmt::format("disease '{}': missing expected counts", dd.name));
      for (Eigen::Index i = 0; i < n(); ++i) {
        if (!(dd.E(i) > 0.0)) throw DataError(fmt::format("disease '{}': nonpositive expected count", dd.name));
        if (dd.y(i) < 0.0 || dd.y(i) != std::floor(dd.y(i)))
          throw DataError(fmt::format("disease '{}': count {} is not a nonnegative integer", dd.name, dd.y(i)));
      }
    }
  }
}

double gaussian_loglik(double y, double mean, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("Gaussian precision must be positive");
  const double r = y - mean;
  return 0.5 * std::log(tau / (2.0 * std::numbers::pi)) - 0.5 * tau * r * r;
}

namespace {
double linear_predictor(std::span<const double> x, std::span<const double> beta, double phi) {
  if (x.size() != beta.size()) throw std::invalid_argument("covariate and coefficient lengths differ");
  double eta = phi;
  for (std::size_t j = 0; j < x.size(); ++j) eta += x[j] * beta[j];
  return eta;
}
}  // namespace

double gaussian_loglik(double y, std::span<const double> x, std::span<const double> beta, double phi, double tau) {
  return gaussian_loglik(y, linear_predictor(x, beta, phi), tau);
}

double poisson_loglik(double y, double E, double eta) {
  if (!(E > 0.0)) throw std::invalid_argument("Poisson offset must be positive");
  if (y < 0.0) throw std::invalid_argument("Poisson count must be nonnegative");
  return y * (std::log(E) + eta) - E * std::exp(eta) - std::lgamma(y + 1.0);
}

double poisson_loglik(double y, double E, std::span<const double> x, std::span<const double> beta, double phi) {
  return poisson_loglik(y, E, linear_predictor(x, beta, phi));
}

Eigen::MatrixXd expected_counts(const StratifiedCounts& s) {
  const int n = s.n();
  const int m = s.m();
  if (s.population.rows() != n || s.population.cols() != m) throw DataError("population table has the wrong shape");
  if ((s.population.array() < 0.0).any()) throw DataError("negative population");
  const Eigen::RowVectorXd pop_total = s.population.colwise().sum();
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(n, s.q());
  for (int d = 0; d < s.q(); ++d) {
    const auto& Y = s.cases[static_cast<std::size_t>(d)];
    if (Y.rows() != n || Y.cols() != m) throw DataError("case table has the wrong shape");
    if ((Y.array() < 0.0).any()) throw DataError("negative case count");
    const Eigen::RowVectorXd case_total = Y.colwise().sum();
    for (int k = 0; k < m; ++k) {
      if (pop_total(k) <= 0.0) {
        if (case_total(k) > 0.0)
          throw DataError(fmt::format("stratum '{}' has cases for '{}' but zero population",
                                      s.strata[static_cast<std::size_t>(k)], s.diseases[static_cast<std::size_t>(d)]));
        continue;
      }
      const double rate = case_total(k) / pop_total(k);
      E.col(d) += rate * s.population.col(k);
    }
  }
  return E;
}

Eigen::MatrixXd observed_counts(const StratifiedCounts& s) {
  Eigen::MatrixXd Y(s.n(), s.q());
  for (int d = 0; d < s.q(); ++d) Y.col(d) = s.cases[static_cast<std::size_t>(d)].rowwise().sum();
  return Y;
}

Dataset read_dataset(const std::filesystem::path& path, const RegionGraph& graph, Likelihood likelihood,
                     bool add_intercept) {
  const auto lines = text::read_lines(path);
  if (lines.empty()) throw DataError(path.string() + ": empty dataset file");
  const auto header = text::split_csv(lines.front());
  if (header.size() < 3 || header[0] != "region" || header[1] != "disease" || header[2] != "y")
    throw DataError(path.string() + ": header must start with region,disease,y");
  std::size_t first_x = 3;
  const bool has_E = header.size() > 3 && header[3] == "E";
  if (has_E) first_x = 4;
  if (likelihood == Likelihood::Poisson && !has_E) throw DataError(path.string() + ": Poisson data needs an E column");
  std::vector<std::string> x_names(header.begin() + static_cast<std::ptrdiff_t>(first_x), header.end());

  const int n = graph.n_regions();
  Dataset data;
  data.likelihood = likelihood;
  data.regions = graph.labels();
  std::map<std::string, int> disease_of;
  std::vector<std::vector<int>> seen;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto f = text::split_csv(lines[r]);
    if (f.size() != header.size())
      throw DataError(fmt::format("{}:{}: expected {} fields, got {}", path.string(), r + 1, header.size(), f.size()));
    const auto i = graph.index_of(f[0]);
    auto [it, inserted] = disease_of.emplace(f[1], static_cast<int>(data.diseases.size()));
    if (inserted) {
      DiseaseData dd;
      dd.name = f[1];
      dd.y = Eigen::VectorXd::Zero(n);
      if (has_E) dd.E = Eigen::VectorXd::Zero(n);
      const auto p = static_cast<Eigen::Index>(x_names.size() + (add_intercept ? 1 : 0));
      dd.X = Eigen::MatrixXd::Zero(n, p);
      if (add_intercept) {
        dd.X.col(0).setOnes();
        dd.covariate_names.emplace_back(kInterceptName);
      }
      dd.covariate_names.insert(dd.covariate_names.end(), x_names.begin(), x_names.end());
      data.diseases.push_back(std::move(dd));
      seen.emplace_back(static_cast<std::size_t>(n), 0);
    }
    const auto d = static_cast<std::size_t>(it->second);
    if (seen[d][static_cast<std::size_t>(i)]++)
      throw DataError(fmt::format("{}: duplicate row for region '{}', disease '{}'", path.string(), f[0], f[1]));
    auto& dd = data.diseases[d];
    dd.y(i) = text::parse_double(f[2], "y");
    if (has_E) dd.E(i) = text::parse_double(f[3], "E");
    const Eigen::Index offset = add_intercept ? 1 : 0;
    for (std::size_t j = 0; j < x_names.size(); ++j)
      dd.X(i, offset + static_cast<Eigen::Index>(j)) = text::parse_double(f[first_x + j], x_names[j]);
  }
  for (std::size_t d = 0; d < seen.size(); ++d)
    for (int i = 0; i < n; ++i)
      if (!seen[d][static_cast<std::size_t>(i)])
        throw DataError(fmt::format("{}: no row for region '{}', disease '{}'", path.string(), graph.label(i),
                                    data.diseases[d].name));
  if (likelihood == Likelihood::Gaussian && has_E)
    for (auto& dd : data.diseases) dd.E.resize(0);
  data.validate();
  return data;
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  const bool has_E = data.likelihood == Likelihood::Poisson;
  const auto& first = data.diseases.front();
  const bool intercept = !first.covariate_names.empty() && first.covariate_names.front() == kInterceptName;
  const std::size_t offset = intercept ? 1 : 0;
  out << "region,disease,y";
  if (has_E) out << ",E";
  for (std::size_t j = offset; j < first.covariate_names.size(); ++j) out << ',' << first.covariate_names[j];
  out << '\n';
  for (const auto& dd : data.diseases) {
    if (dd.covariate_names.size() != first.covariate_names.size())
      throw DataError("write_dataset requires the same covariates for every disease");
    for (int i = 0; i < data.n(); ++i) {
      out << data.regions[static_cast<std::size_t>(i)] << ',' << dd.name << ',' << text::format_double(dd.y(i));
      if (has_E) out << ',' << text::format_double(dd.E(i));
      for (std::size_t j = offset; j < dd.covariate_names.size(); ++j)
        out << ',' << text::format_double(dd.X(i, static_cast<Eigen::Index>(j)));
      out << '\n';
    }
  }
}

StratifiedCounts read_strata(const std::filesystem::path& cases, const std::filesystem::path& population,
                             const RegionGraph& graph) {
  StratifiedCounts s;
  s.regions = graph.labels();
  const int n = graph.n_regions();
  std::map<std::string, int> disease_of, stratum_of;
  struct CaseRow {
    int i, d, k;
    double value;
  };
  std::vector<CaseRow> rows;
  auto stratum_index = [&](const std::string& name) {
    auto [it, inserted] = stratum_of.emplace(name, static_cast<int>(s.strata.size()));
    if (inserted) s.strata.push_back(name);
    return it->second;
  };
  const auto case_lines = text::read_lines(cases);
  for (std::size_t r = 0; r < case_lines.size(); ++r) {
    const auto f = text::split_csv(case_lines[r]);
    if (f.size() != 4) throw DataError(fmt::format("{}:{}: expected region,disease,stratum,cases", cases.string(), r + 1));
    if (r == 0 && f[3] == "cases") continue;
    auto [it, inserted] = disease_of.emplace(f[1], static_cast<int>(s.diseases.size()));
    if (inserted) s.diseases.push_back(f[1]);
    rows.push_back({graph.index_of(f[0]), it->second, stratum_index(f[2]), text::parse_double(f[3], "cases")});
  }
  struct PopRow {
    int i, k;
    double value;
  };
  std::vector<PopRow> pops;
  const auto pop_lines = text::read_lines(population);
  for (std::size_t r = 0; r < pop_lines.size(); ++r) {
    const auto f = text::split_csv(pop_lines[r]);
    if (f.size() != 3) throw DataError(fmt::format("{}:{}: expected region,stratum,population", population.string(), r + 1));
    if (r == 0 && f[2] == "population") continue;
    pops.push_back({graph.index_of(f[0]), stratum_index(f[1]), text::parse_double(f[2], "population")});
  }
  const int m = s.m();
  s.cases.assign(s.diseases.size(), Eigen::MatrixXd::Zero(n, m));
  s.population = Eigen::MatrixXd::Zero(n, m);
  for (const auto& row : rows) s.cases[static_cast<std::size_t>(row.d)](row.i, row.k) += row.value;
  for (const auto& row : pops) s.population(row.i, row.k) += row.value;
  return s;
}

}  // namespace mardp

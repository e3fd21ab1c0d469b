#pragma once

#include "mardp/sampler.hpp"

#include <json.hpp>

#include <filesystem>

namespace mardp {

nlohmann::json to_json(const SamplerConfig& config);
SamplerConfig sampler_config_from_json(const nlohmann::json& j, SamplerConfig base = {});
nlohmann::json to_json(const AcceptanceRates& rates);

/// Writes one long-format CSV per block (chain,iter,name,value) into `dir`:
/// beta.csv, theta.csv, labels.csv, tau.csv (Gaussian), tau_s.csv, rho.csv,
/// A.csv, plus manifest.json. Chains and labels are written 1-based.
///
/// Names: beta_<d>_<j>, theta_<k>, u_<d>_<i>, tau_<d>, tau_s, rho_<d>, A_<d>_<h>.
void write_posterior(const std::filesystem::path& dir, const PosteriorSamples& samples, const SamplerConfig& config,
                     const nlohmann::json& extra = nlohmann::json::object());

PosteriorSamples read_posterior(const std::filesystem::path& dir);
nlohmann::json read_manifest(const std::filesystem::path& dir);

}  // namespace mardp

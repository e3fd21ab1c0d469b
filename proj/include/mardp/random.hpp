#pragma once

#include <cstdint>
#include <random>

namespace mardp {

// mt19937_64 is fully specified by the standard; the distributions come from
// Boost.Random so that draws are identical across standard libraries.
using Rng = std::mt19937_64;

/// Independent stream `stream` derived from a master seed.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

double std_normal(Rng& rng);
double uniform01(Rng& rng);
/// Gamma with shape-rate parameterisation (mean shape/rate).
double gamma_shape_rate(Rng& rng, double shape, double rate);
double beta_variate(Rng& rng, double a, double b);
std::int64_t poisson_variate(Rng& rng, double mean);
/// Standard normal restricted to (lo, hi]; either bound may be infinite.
double truncated_std_normal(Rng& rng, double lo, double hi);
/// log(Phi(hi) - Phi(lo)) without cancellation in either tail.
double log_normal_mass(double lo, double hi);

}  // namespace mardp

#include "mardp/random.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <boost/random/beta_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mardp {

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

double std_normal(Rng& rng) {
  boost::random::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

double uniform01(Rng& rng) {
  boost::random::uniform_01<double> dist;
  return dist(rng);
}

double gamma_shape_rate(Rng& rng, double shape, double rate) {
  boost::random::gamma_distribution<double> dist(shape, 1.0 / rate);
  return dist(rng);
}

double beta_variate(Rng& rng, double a, double b) {
  boost::random::beta_distribution<double> dist(a, b);
  return dist(rng);
}

std::int64_t poisson_variate(Rng& rng, double mean) {
  if (mean <= 0.0) return 0;
  boost::random::poisson_distribution<std::int64_t, double> dist(mean);
  return dist(rng);
}

namespace {

double upper_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

// x with upper_tail(x) = p.
double inverse_upper_tail(double p) {
  return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * std::clamp(p, 1e-300, 1.0 - 1e-16));
}

// Exponential rejection for (lo, hi] with lo far in the upper tail.
double far_tail(Rng& rng, double lo, double hi) {
  const double rate = 0.5 * (lo + std::sqrt(lo * lo + 4.0));
  for (;;) {
    const double x = lo - std::log(uniform01(rng)) / rate;
    if (x > hi) continue;
    if (uniform01(rng) <= std::exp(-0.5 * (x - rate) * (x - rate))) return x;
  }
}

}  // namespace

double log_normal_mass(double lo, double hi) {
  if (!(hi > lo)) return -INFINITY;
  if (lo >= 0.0) return std::log(upper_tail(lo) - upper_tail(hi));
  if (hi <= 0.0) return std::log(upper_tail(-hi) - upper_tail(-lo));
  return std::log1p(-upper_tail(hi) - upper_tail(-lo));
}

double truncated_std_normal(Rng& rng, double lo, double hi) {
  if (!(hi > lo)) return lo;
  if (hi <= 0.0) return -truncated_std_normal(rng, -hi, -lo);
  if (lo < 0.0) {
    const double a = upper_tail(-lo), b = upper_tail(hi);  // Phi(lo), 1 - Phi(hi)
    const double p = a + uniform01(rng) * (1.0 - b - a);
    return std::clamp(-inverse_upper_tail(p), lo, hi);
  }
  const double a = upper_tail(lo), b = upper_tail(hi);
  if (a > 1e-290 && a - b > 1e-9 * a) {
    const double p = b + uniform01(rng) * (a - b);
    return std::clamp(inverse_upper_tail(p), lo, hi);
  }
  if (std::isfinite(hi) && (hi - lo) * hi < 1.0) {
    for (;;) {
      const double x = lo + uniform01(rng) * (hi - lo);
      if (uniform01(rng) <= std::exp(-0.5 * (x - lo) * (x + lo))) return x;
    }
  }
  return far_tail(rng, lo, hi);
}

}  // namespace mardp

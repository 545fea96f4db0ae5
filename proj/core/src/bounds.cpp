#include "qht/bounds.hpp"

#include <cmath>

#include "qht/ns_classical.hpp"

namespace qht::bounds {

namespace {

constexpr double kRegimeTol = 1e-12;

}  // namespace

AsymptoticVerdict asymptotic_limit(const StatePair& p, double e1, double e2) {
  double d = divergences::quantum_relative_entropy(p);
  if (e1 < d - kRegimeTol) return {Regime::below_D, 0.0};
  if (e1 > d + kRegimeTol) return {Regime::above_D, 1.0};
  double v = divergences::quantum_relative_variance(p);
  if (!(v > kDegenerateVarianceTol))
    throw DegenerateVariance("relative variance vanishes at the critical rate");
  return {Regime::at_D, ns::normal_cdf(e2 / std::sqrt(v))};
}

FiniteNBounds finite_sample_bounds_from_stats(double d, double v, double t3, long n,
                                              double eps, double c) {
  if (n < 1) throw Error("bounds need n >= 1");
  if (!(eps > 0.0 && eps < 1.0)) throw Error("eps must lie in (0, 1)");
  if (!(v > kDegenerateVarianceTol))
    throw DegenerateVariance("relative variance vanishes; bounds are degenerate");

  double sqrt_n = std::sqrt(double(n));
  double skew = t3 / std::pow(v, 1.5);
  FiniteNBounds out{n, eps, c, std::nullopt, std::nullopt};

  double lower_arg = eps - c * skew / sqrt_n;
  if (lower_arg >= 0.0) {
    out.lower = double(n) * d + sqrt_n * std::sqrt(v) * ns::normal_quantile(lower_arg);
  }
  double upper_arg = eps + (c * skew + 2.0) / sqrt_n;
  if (upper_arg <= 1.0) {
    out.upper = double(n) * d + sqrt_n * std::sqrt(v) * ns::normal_quantile(upper_arg) +
                std::log(512.0 * double(n) * double(n));
  }
  return out;
}

FiniteNBounds finite_sample_bounds(const StatePair& p, long n, double eps, double c) {
  divergences::DivergenceReport r = divergences::divergence_report(p);
  return finite_sample_bounds_from_stats(r.relative_entropy, r.relative_variance,
                                         r.third_abs_moment, n, eps, c);
}

double second_order_residual_from_stats(double d, double v, long n, double eps,
                                        double neg_log_beta) {
  return neg_log_beta - double(n) * d -
         std::sqrt(double(n) * v) * ns::normal_quantile(eps);
}

double second_order_residual(const StatePair& p, long n, double eps,
                             double neg_log_beta) {
  return second_order_residual_from_stats(divergences::quantum_relative_entropy(p),
                                          divergences::quantum_relative_variance(p), n,
                                          eps, neg_log_beta);
}

}  // namespace qht::bounds

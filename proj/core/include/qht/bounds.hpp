#pragma once

#include <optional>

#include "qht/divergences.hpp"

namespace qht::bounds {

using divergences::StatePair;

// Smallest constant currently proven valid for the classical central-limit
// error term; the interval of published values is [0.40973, 0.4784] and any
// c in it may be passed where a `c` parameter appears.
inline constexpr double kDefaultBerryEsseenC = 0.4784;
inline constexpr double kDegenerateVarianceTol = 1e-12;

enum class Regime { below_D, at_D, above_D };

struct AsymptoticVerdict {
  Regime regime;
  double limit_alpha;  // limiting type-I error at beta ~ exp(-(nD + sqrt(n) e2))
};

// Limit of the optimal type-I error when the type-II exponent is
// e1 + e2/sqrt(n): 0 below D, Phi(e2/sqrt(V)) at D, 1 above D.
AsymptoticVerdict asymptotic_limit(const StatePair& p, double e1, double e2);

struct FiniteNBounds {
  long n;
  double eps;
  double c;
  // Bounds on -log beta_n(eps); disengaged when the precondition fails.
  std::optional<double> lower;
  std::optional<double> upper;
};

// Two-sided finite-n bounds on -log of the optimal type-II error at type-I
// budget eps. lower applies iff eps - c*T3/(sqrt(n) V^(3/2)) >= 0; upper
// applies iff eps + (c*T3/V^(3/2) + 2)/sqrt(n) <= 1.
FiniteNBounds finite_sample_bounds(const StatePair& p, long n, double eps,
                                   double c = kDefaultBerryEsseenC);
FiniteNBounds finite_sample_bounds_from_stats(double d, double v, double t3, long n,
                                              double eps,
                                              double c = kDefaultBerryEsseenC);

// neg_log_beta - n*D - sqrt(n*V)*Phi^{-1}(eps): the distance from the
// second-order Gaussian prediction.
double second_order_residual(const StatePair& p, long n, double eps,
                             double neg_log_beta);
double second_order_residual_from_stats(double d, double v, long n, double eps,
                                        double neg_log_beta);

}  // namespace qht::bounds

#pragma once

#include <cstdint>
#include <vector>

#include "qht/divergences.hpp"

namespace qht::ns {

inline constexpr double kAtomMergeTol = 1e-12;
inline constexpr long kDefaultMaxAtoms = 2'000'000;

// Classical joint p(x, y) = lambda(x) |<b_y|a_x>|^2 induced by a state pair.
// Marginal over y is lambda; the column sums give the sigma eigenbasis
// occupation of rho, not mu.
struct NSJoint {
  Eigen::MatrixXd probs;      // (x, y)
  Eigen::VectorXd lambda;     // rho eigenvalues, ascending
  Eigen::VectorXd mu;         // sigma eigenvalues, ascending
};

NSJoint build_ns_joint(const divergences::StatePair& p);
NSJoint build_ns_joint(const divergences::SpectralPair& sp);

// Discrete law of log(lambda(X)/mu(Y)). Atoms strictly ascending in value;
// probabilities sum to 1 up to accumulated rounding. `n` records how many
// copies the distribution represents.
struct LLRDistribution {
  struct Atom {
    double value;
    double prob;
  };
  std::vector<Atom> atoms;
  long n = 1;

  double total_mass() const;
  double mean() const;
  double variance() const;
  double third_abs_moment_about(double center) const;
};

// Atoms of one copy: distinct values over cells with p(x, y) > 0. Cells with
// lambda(x) = 0 carry no probability and are dropped.
LLRDistribution llr_atoms(const NSJoint& j);

// Exact n-fold convolution by squaring, merging nearby values at each stage.
// Throws AtomBudgetExceeded when an intermediate result would exceed max_atoms.
LLRDistribution convolve_n(const LLRDistribution& d, long n,
                           long max_atoms = kDefaultMaxAtoms);

enum class TailSide { below, at_or_above };

// Mass strictly below / at-or-above the threshold. The two sides partition
// the total mass.
double tail_prob(const LLRDistribution& d, double threshold, TailSide side);

// Mass at or below the threshold (the complement convention some bounds need).
double mass_at_most(const LLRDistribution& d, double threshold);

struct McTailEstimate {
  double estimate;
  double std_error;
};

// Pr{ sum of n independent draws from d < threshold }, estimated from
// `samples` simulations with the given seed. Deterministic per seed.
McTailEstimate monte_carlo_tail(const LLRDistribution& d, long n, double threshold,
                                long samples, std::uint64_t seed);

struct BerryEsseenEnvelope {
  double lower;
  double upper;
};

// Two-sided envelope Phi(x/sqrt(var)) -+ c*t3/(sqrt(n)*var^(3/2)) for the
// standardized n-sample mean deviation, clamped to [0, 1].
BerryEsseenEnvelope berry_esseen_envelope(double mean, double var, double t3,
                                          long n, double x, double c);

double normal_cdf(double x);

// Inverse of normal_cdf; u in [0, 1], +-infinity at the endpoints.
double normal_quantile(double u);

}  // namespace qht::ns

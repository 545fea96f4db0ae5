#pragma once

#include <optional>

#include "qht/ns_classical.hpp"

namespace qht::optimality {

using divergences::StatePair;
using linalg::Matrix;
using linalg::Vector;

// Slack parameters of the converse argument. eps1 bounds the eigenvalue
// band, eps2 the vector truncation; f_n and fprime_n shift the threshold.
struct ConverseParams {
  double eps1;
  double eps2;
  double f_n;
  double fprime_n;

  // Choice that makes the total correction decay like 1/sqrt(n):
  // fprime = log(2^9 n^2), eps1 = 2^(1/8) exp(-fprime/8),
  // eps2 = 2^(-1/4) exp(-fprime/4).
  static ConverseParams optimized_schedule(long n, double f_n = 0.0);
};

// ||(|phi><phi|) |varphi>||^2 - ||(pi |phi><phi| pi) |varphi>||^2 for unit
// vectors phi, varphi and a projector pi. Bounded by 2*sqrt(2)*||phi - pi phi||.
double projector_overlap_gap(const Vector& phi, const Vector& varphi,
                             const Matrix& projector);

struct ConverseBound {
  double tail_term;    // Pr{ n-copy LLR <= n*D + sqrt(n)*e2 + f_n - fprime_n }
  double correction;   // (1/(eps1^2 eps2^2) + 1) e^(-fprime) + eps1^2 + 2*sqrt(2)*eps2
  double alpha_lower;  // max(0, tail_term - correction)
  // Set when the tail had to be estimated by Monte Carlo because the exact
  // convolution blew the atom budget.
  std::optional<double> tail_std_error;
};

struct TailOptions {
  long max_atoms = ns::kDefaultMaxAtoms;
  long mc_samples = 1'000'000;
  std::uint64_t seed = 0;
};

// Lower bound on the type-I error of ANY test whose type-II error satisfies
// beta <= exp(-(n*D + sqrt(n)*e2 + f_n)).
ConverseBound alpha_lower_bound(const StatePair& p, long n, double e2,
                                const ConverseParams& params,
                                const TailOptions& opts = {});

// Certified upper bound exp(-fprime_n) on the acceptance mass below the
// likelihood-ratio band. Valid whenever
// log_beta <= -(n*relative_entropy + sqrt(n)*e2 + params.f_n); the arguments
// document that precondition, the returned value does not depend on them.
double low_ratio_mass_bound(long n, double log_beta, const ConverseParams& params,
                            double relative_entropy, double e2);

}  // namespace qht::optimality

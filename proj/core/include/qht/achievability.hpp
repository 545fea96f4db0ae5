#pragma once

#include <vector>

#include "qht/divergences.hpp"

namespace qht::achievability {

using divergences::SpectralPair;
using divergences::StatePair;
using linalg::Matrix;
using linalg::RealVector;
using linalg::Vector;

// Residual norm below this counts as "lies in the span of the predecessors".
inline constexpr double kSpanTol = 1e-9;
inline constexpr double kProjectorTol = 1e-8;  // |A^2 - A|_F certified bound

// Acceptance threshold on the n-copy log-likelihood ratio:
// log_l = n*D + sqrt(n)*e2 + f_n.
struct Threshold {
  long n;
  double e2;
  double f_n;
  double log_l;
};

Threshold make_threshold(double relative_entropy, long n, double e2, double f_n);
Threshold make_threshold(const StatePair& p, long n, double e2, double f_n);

// One n-copy eigenvalue sequence of rho. digits[0] is the first copy (most
// significant in the flat tensor index); log_lambda is log of the eigenvalue
// product (-infinity on the kernel); order_rank is the position in the
// canonical construction order.
struct SequenceIndex {
  std::vector<int> digits;
  double log_lambda;
  long order_rank;
};

// All dim^n sequences sorted by ascending eigenvalue product, ties broken
// lexicographically on the digits.
std::vector<SequenceIndex> ordered_sequences(
    const RealVector& lambda, long n,
    std::int64_t dim_budget = linalg::kDefaultDimBudget);

// The (unnormalized) candidate vector for one sequence, expressed in the
// sigma eigenproduct basis: the rho eigenvector's coefficients restricted to
// the sigma sequences whose likelihood ratio clears the threshold.
Vector xi_vector(const SpectralPair& sp, const SequenceIndex& xn, const Threshold& th,
                 std::int64_t dim_budget = linalg::kDefaultDimBudget);

// Ordered orthonormalization that preserves positions: output i is the zero
// vector exactly when input i lies in the span of inputs 0..i-1 (within
// kSpanTol), otherwise a unit vector orthogonal to all earlier outputs.
// Projections are subtracted in two passes so the result stays orthonormal
// to ~1e-14 even for nearly dependent inputs.
std::vector<Vector> modified_gram_schmidt(const std::vector<Vector>& vectors);

struct ConstructedTest {
  linalg::HermitianMatrix A;  // acceptance operator, computational basis
  Matrix kept_basis;          // orthonormal columns spanning ran(A)
  double alpha;               // tr rho^(x)n (1 - A)
  double beta;                // tr sigma^(x)n A
  Threshold threshold;
  bool all_reject;            // no sequence cleared the threshold: A = 0
};

ConstructedTest build_test(const StatePair& p, long n, double e2, double f_n,
                           std::int64_t dim_budget = linalg::kDefaultDimBudget);

}  // namespace qht::achievability

#pragma once

#include <map>
#include <vector>

#include "qht/ns_classical.hpp"

namespace qht::oracle {

using divergences::StatePair;
using linalg::DensityMatrix;
using linalg::Matrix;

inline constexpr double kDefaultGapTol = 1e-6;

struct NpTestResult {
  double alpha;      // tr rho (1 - P)
  double beta;       // tr sigma P
  Matrix projector;  // strictly positive eigenspace of t*rho - sigma
};

NpTestResult np_test(const DensityMatrix& rho_n, const DensityMatrix& sigma_n,
                     double t);

// One achievable error point, tagged with the threshold that produced it.
struct FrontierPoint {
  double t;
  double alpha;
  double beta;
};

struct TradeoffCurve {
  std::vector<FrontierPoint> points;  // everything evaluated
  std::vector<FrontierPoint> hull;    // lower convex envelope, alpha ascending
  double dual_gap;                    // worst certified gap over the queries made
};

struct BetaCertificate {
  double beta;         // best achievable type-II error found at alpha <= eps
  double certificate;  // dual lower bound: max_t t(1-eps) - tr(t*rho - sigma)_+
  double gap;          // beta - certificate, >= 0
};

// Exact optimal trade-off for one fixed pair of n-copy states. Evaluations
// are cached, so repeated queries at different eps share the spectral work.
// The frontier is seeded at the generalized eigenvalues of (rho, sigma),
// where the test projector changes rank, plus kernel-randomized endpoints;
// queries then bisect the active hull segment until the dual gap closes.
class NpOracle {
 public:
  NpOracle(const DensityMatrix& rho_n, const DensityMatrix& sigma_n);

  // Throws ToleranceNotReached if the gap cannot be certified below tol.
  BetaCertificate beta_of_epsilon(double eps, double tol = kDefaultGapTol,
                                  int max_iter = 200);

  // Smallest achievable alpha among tests with beta <= beta_budget,
  // certified the same way.
  double alpha_of_beta(double beta_budget, double tol = kDefaultGapTol,
                       int max_iter = 200);

  TradeoffCurve curve() const;

 private:
  struct Eval {
    double alpha_plus;     // strict-positive projector only
    double beta_plus;
    double kernel_rho;     // tr rho K, K = kernel projector of t*rho - sigma
    double kernel_sigma;   // tr sigma K
    double pos_part;       // tr (t*rho - sigma)_+
  };
  const Eval& evaluate(double t);
  void seed_candidates();
  void ensure_alpha_coverage(double eps);
  std::vector<FrontierPoint> all_points() const;
  double dual_value(double t, double eps) const;

  Matrix rho_;
  Matrix sigma_;
  std::map<double, Eval> cache_;
  std::vector<double> crossings_;  // candidate thresholds from the pencil
  double worst_gap_ = 0.0;
};

BetaCertificate beta_of_epsilon(const StatePair& p, long n, double eps,
                                double tol = kDefaultGapTol,
                                std::int64_t dim_budget = linalg::kDefaultDimBudget);

// Classical randomized likelihood-ratio test over an explicit paired
// distribution: lambda and mu are probability vectors on a shared support.
// Returns the smallest beta with alpha <= eps.
double classical_np(const Eigen::VectorXd& lambda, const Eigen::VectorXd& mu,
                    double eps);

// Same optimum for n i.i.d. copies, computed by convolving the paired
// log-ratio atoms instead of enumerating the product support.
double classical_np_pow(const Eigen::VectorXd& lambda, const Eigen::VectorXd& mu,
                        long n, double eps, long max_atoms = ns::kDefaultMaxAtoms);

}  // namespace qht::oracle

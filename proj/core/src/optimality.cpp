#include "qht/optimality.hpp"

#include <cassert>
#include <cmath>

namespace qht::optimality {

namespace {

constexpr double kUnitTol = 1e-10;
constexpr double kProjTol = 1e-8;

void check_unit(const Vector& v, const char* name) {
  if (std::abs(v.norm() - 1.0) > kUnitTol)
    throw NotNormalized(std::string(name) + " has norm " + std::to_string(v.norm()));
}

}  // namespace

ConverseParams ConverseParams::optimized_schedule(long n, double f_n) {
  if (n < 1) throw Error("schedule needs n >= 1");
  double fprime = std::log(512.0 * double(n) * double(n));
  return ConverseParams{std::pow(2.0, 0.125) * std::exp(-fprime / 8.0),
                        std::pow(2.0, -0.25) * std::exp(-fprime / 4.0), f_n, fprime};
}

double projector_overlap_gap(const Vector& phi, const Vector& varphi,
                             const Matrix& projector) {
  check_unit(phi, "phi");
  check_unit(varphi, "varphi");
  if (projector.rows() != projector.cols() || projector.rows() != phi.size())
    throw NotProjector("projector shape does not match the vectors");
  if ((projector - projector.adjoint()).cwiseAbs().maxCoeff() > linalg::kHermitianTol)
    throw NotProjector("projector is not Hermitian");
  if ((projector * projector - projector).norm() > kProjTol)
    throw NotProjector("projector is not idempotent");

  Vector u = projector * phi;
  double kept = std::norm(phi.dot(varphi));
  double truncated = u.squaredNorm() * std::norm(u.dot(varphi));
  return kept - truncated;
}

ConverseBound alpha_lower_bound(const StatePair& p, long n, double e2,
                                const ConverseParams& params,
                                const TailOptions& opts) {
  if (n < 1) throw Error("alpha_lower_bound needs n >= 1");
  if (!(params.eps1 > 0.0 && params.eps1 <= 1.0 && params.eps2 > 0.0 &&
        params.eps2 <= 1.0))
    throw Error("eps1, eps2 must lie in (0, 1]");

  double d = divergences::quantum_relative_entropy(p);
  double threshold =
      double(n) * d + std::sqrt(double(n)) * e2 + params.f_n - params.fprime_n;

  ns::LLRDistribution base = ns::llr_atoms(ns::build_ns_joint(p));
  ConverseBound out;
  try {
    ns::LLRDistribution conv = ns::convolve_n(base, n, opts.max_atoms);
    out.tail_term = ns::mass_at_most(conv, threshold);
  } catch (const AtomBudgetExceeded&) {
    ns::McTailEstimate mc =
        ns::monte_carlo_tail(base, n, threshold, opts.mc_samples, opts.seed);
    out.tail_term = mc.estimate;
    out.tail_std_error = mc.std_error;
  }

  double e1sq = params.eps1 * params.eps1;
  double e2sq = params.eps2 * params.eps2;
  out.correction = (1.0 / (e1sq * e2sq) + 1.0) * std::exp(-params.fprime_n) + e1sq +
                   2.0 * std::sqrt(2.0) * params.eps2;
  out.alpha_lower = std::max(0.0, out.tail_term - out.correction);
  return out;
}

double low_ratio_mass_bound(long n, double log_beta, const ConverseParams& params,
                            double relative_entropy, double e2) {
  assert(log_beta <= -(double(n) * relative_entropy + std::sqrt(double(n)) * e2 +
                       params.f_n) +
             1e-9 &&
         "bound is only certified when beta meets the exponent");
  (void)log_beta;
  (void)relative_entropy;
  (void)e2;
  (void)n;
  return std::exp(-params.fprime_n);
}

}  // namespace qht::optimality

#include "qht/divergences.hpp"

#include <cmath>
#include <limits>

#include "qht/ns_classical.hpp"

namespace qht::divergences {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSupportMassTol = 1e-12;
constexpr double kOverlapTol = 1e-12;  // |gamma|^2 below this is basis noise

void check_same_dim(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.dim() != sigma.dim()) {
    throw InvariantViolation({"rho is " + std::to_string(rho.dim()) +
                              "-dimensional, sigma " + std::to_string(sigma.dim())});
  }
}

// rho mass on the numerical kernel of sigma; > 0 means D = +infinity.
double kernel_mass(const StatePair& p, const Spectrum& sigma_spec) {
  double mass = 0.0;
  for (Eigen::Index y = 0; y < sigma_spec.values.size(); ++y) {
    if (sigma_spec.values[y] > p.sigma_min_eig()) continue;
    linalg::Vector b = sigma_spec.vectors.col(y);
    mass += (b.adjoint() * p.rho().mat() * b)(0, 0).real();
  }
  return mass;
}

Matrix clamped_log_sigma(const StatePair& p, const Spectrum& sigma_spec) {
  linalg::RealVector logs(sigma_spec.values.size());
  for (Eigen::Index y = 0; y < logs.size(); ++y) {
    logs[y] = std::log(std::max(sigma_spec.values[y], p.sigma_min_eig()));
  }
  return sigma_spec.vectors * logs.asDiagonal() * sigma_spec.vectors.adjoint();
}

}  // namespace

StatePair::StatePair(DensityMatrix rho, DensityMatrix sigma, double sigma_min_eig)
    : StatePair(std::move(rho), std::move(sigma), sigma_min_eig, Relaxed{}) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sigma_.mat(), Eigen::EigenvaluesOnly);
  double min_eig = solver.eigenvalues().minCoeff();
  if (!(min_eig > sigma_min_eig_)) {
    throw InvariantViolation({"sigma not full rank: min eigenvalue " +
                              std::to_string(min_eig) + " <= " +
                              std::to_string(sigma_min_eig_)});
  }
}

StatePair::StatePair(DensityMatrix rho, DensityMatrix sigma, double sigma_min_eig,
                     Relaxed)
    : rho_(std::move(rho)), sigma_(std::move(sigma)), sigma_min_eig_(sigma_min_eig) {
  check_same_dim(rho_, sigma_);
}

StatePair StatePair::relaxed(DensityMatrix rho, DensityMatrix sigma,
                             double sigma_min_eig) {
  return StatePair(std::move(rho), std::move(sigma), sigma_min_eig, Relaxed{});
}

SpectralPair make_spectral_pair(const StatePair& p) {
  SpectralPair sp;
  sp.rho_spec = linalg::eig_hermitian(p.rho().hermitian());
  sp.sigma_spec = linalg::eig_hermitian(p.sigma().hermitian());
  sp.gamma = sp.sigma_spec.vectors.adjoint() * sp.rho_spec.vectors;
  return sp;
}

double quantum_relative_entropy(const StatePair& p) {
  SpectralPair sp = make_spectral_pair(p);
  if (kernel_mass(p, sp.sigma_spec) > kSupportMassTol) return kInf;

  double tr_rho_log_rho = 0.0;
  for (Eigen::Index x = 0; x < sp.rho_spec.values.size(); ++x) {
    double lam = sp.rho_spec.values[x];
    if (lam > kRhoZeroTol) tr_rho_log_rho += lam * std::log(lam);
  }
  Matrix log_sigma = clamped_log_sigma(p, sp.sigma_spec);
  double tr_rho_log_sigma = (p.rho().mat() * log_sigma).trace().real();
  return tr_rho_log_rho - tr_rho_log_sigma;
}

double quantum_relative_variance(const StatePair& p) {
  SpectralPair sp = make_spectral_pair(p);
  if (kernel_mass(p, sp.sigma_spec) > kSupportMassTol) return kInf;

  double tr_rho_log2_rho = 0.0;
  linalg::RealVector lam_log(sp.rho_spec.values.size());
  for (Eigen::Index x = 0; x < lam_log.size(); ++x) {
    double lam = sp.rho_spec.values[x];
    if (lam > kRhoZeroTol) {
      lam_log[x] = lam * std::log(lam);
      tr_rho_log2_rho += lam * std::log(lam) * std::log(lam);
    } else {
      lam_log[x] = 0.0;
    }
  }
  Matrix rho_log_rho =
      sp.rho_spec.vectors * lam_log.asDiagonal() * sp.rho_spec.vectors.adjoint();
  Matrix log_sigma = clamped_log_sigma(p, sp.sigma_spec);

  double cross = (rho_log_rho * log_sigma).trace().real();
  double tr_rho_log2_sigma = (p.rho().mat() * log_sigma * log_sigma).trace().real();
  double mean = lam_log.sum() - (p.rho().mat() * log_sigma).trace().real();
  return tr_rho_log2_rho - 2.0 * cross + tr_rho_log2_sigma - mean * mean;
}

double third_abs_moment(const StatePair& p) {
  ns::LLRDistribution d = ns::llr_atoms(ns::build_ns_joint(p));
  return d.third_abs_moment_about(d.mean());
}

DegenerateVerdict classify_degenerate(const StatePair& p) {
  Matrix comm = p.rho().mat() * p.sigma().mat() - p.sigma().mat() * p.rho().mat();
  if (comm.norm() > kCommuteTol) return {};

  SpectralPair sp = make_spectral_pair(p);
  DegenerateVerdict verdict;
  for (Eigen::Index x = 0; x < sp.rho_spec.values.size(); ++x) {
    double lam = sp.rho_spec.values[x];
    if (lam <= kRhoZeroTol) continue;
    for (Eigen::Index y = 0; y < sp.sigma_spec.values.size(); ++y) {
      if (std::norm(sp.gamma(y, x)) <= kOverlapTol) continue;
      double mu = sp.sigma_spec.values[y];
      if (!verdict.k) {
        verdict.k = lam / mu;
      } else if (std::abs(lam - *verdict.k * mu) > kProportionTol) {
        return {};
      }
    }
  }
  verdict.degenerate = verdict.k.has_value();
  return verdict;
}

DivergenceReport divergence_report(const StatePair& p) {
  return DivergenceReport{quantum_relative_entropy(p), quantum_relative_variance(p),
                          third_abs_moment(p), classify_degenerate(p).degenerate};
}

}  // namespace qht::divergences

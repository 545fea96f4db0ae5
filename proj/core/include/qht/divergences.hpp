#pragma once

#include <optional>

#include "qht/linalg.hpp"

namespace qht::divergences {

using linalg::DensityMatrix;
using linalg::Matrix;
using linalg::Spectrum;

inline constexpr double kSigmaFullRankTol = 1e-12;  // min sigma eigenvalue
inline constexpr double kRhoZeroTol = 1e-14;        // rho eigenvalue ~ exact 0
inline constexpr double kCommuteTol = 1e-10;        // Frobenius norm of [rho, sigma]
inline constexpr double kProportionTol = 1e-9;      // lambda = k*mu matching

// Null/alternative pair on one system. The strict constructor requires sigma
// full rank (min eigenvalue > sigma_min_eig); `relaxed` admits rank-deficient
// sigma, in which case the divergences may come out +infinity.
class StatePair {
 public:
  StatePair(DensityMatrix rho, DensityMatrix sigma,
            double sigma_min_eig = kSigmaFullRankTol);
  static StatePair relaxed(DensityMatrix rho, DensityMatrix sigma,
                           double sigma_min_eig = kSigmaFullRankTol);

  const DensityMatrix& rho() const { return rho_; }
  const DensityMatrix& sigma() const { return sigma_; }
  double sigma_min_eig() const { return sigma_min_eig_; }
  Eigen::Index dim() const { return rho_.dim(); }

 private:
  struct Relaxed {};
  StatePair(DensityMatrix rho, DensityMatrix sigma, double sigma_min_eig, Relaxed);
  DensityMatrix rho_;
  DensityMatrix sigma_;
  double sigma_min_eig_;
};

// Joint eigendata: rho = sum_x lambda(x)|a_x><a_x|, sigma = sum_y mu(y)|b_y><b_y|,
// gamma(y, x) = <b_y|a_x>. Columns of gamma are the rho eigenvectors expressed
// in the sigma eigenbasis; gamma is unitary.
struct SpectralPair {
  Spectrum rho_spec;
  Spectrum sigma_spec;
  Matrix gamma;
};

SpectralPair make_spectral_pair(const StatePair& p);

// D = tr rho (log rho - log sigma), natural logs. Computed from operator
// products; +infinity when a relaxed pair puts rho mass outside supp(sigma).
double quantum_relative_entropy(const StatePair& p);

// V = tr rho (log rho - log sigma)^2 - D^2.
double quantum_relative_variance(const StatePair& p);

// E |log lambda(X)/mu(Y) - D|^3 under the induced classical joint.
double third_abs_moment(const StatePair& p);

struct DegenerateVerdict {
  bool degenerate = false;
  std::optional<double> k;  // lambda(x) = k * mu(x) on supp(rho) when degenerate
};

// Degenerate means: [rho, sigma] = 0 and the spectra are proportional on the
// support of rho. Exactly the V = 0 case.
DegenerateVerdict classify_degenerate(const StatePair& p);

struct DivergenceReport {
  double relative_entropy;
  double relative_variance;
  double third_abs_moment;
  bool degenerate;
};

DivergenceReport divergence_report(const StatePair& p);

}  // namespace qht::divergences

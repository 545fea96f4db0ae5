#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>

#include "qht/errors.hpp"

namespace qht::linalg {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr double kHermitianTol = 1e-12;     // max |m - m†| entrywise
inline constexpr double kPsdTol = 1e-10;           // eigenvalues >= -kPsdTol
inline constexpr double kTraceTol = 1e-10;         // |tr - 1| <= kTraceTol
inline constexpr double kOrthonormalTol = 1e-10;   // |V†V - I| entrywise
inline constexpr double kReconstructTol = 1e-9;    // relative Frobenius
inline constexpr double kEigenFloor = 1e-12;       // numerical rank cutoff
inline constexpr std::int64_t kDefaultDimBudget = 4096;

// Square matrix certified Hermitian at construction.
class HermitianMatrix {
 public:
  explicit HermitianMatrix(Matrix entries, double tol = kHermitianTol);
  const Matrix& mat() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }

 private:
  Matrix m_;
};

// Hermitian matrix additionally certified PSD with unit trace. eigen_floor is
// the cutoff below which eigenvalues count as numerically zero (rank queries).
class DensityMatrix {
 public:
  explicit DensityMatrix(HermitianMatrix m, double eigen_floor = kEigenFloor);
  const Matrix& mat() const { return m_.mat(); }
  const HermitianMatrix& hermitian() const { return m_; }
  Eigen::Index dim() const { return m_.dim(); }
  double eigen_floor() const { return eigen_floor_; }

  // For results whose invariants hold by construction (kron of valid states);
  // skips the O(dim^3) PSD re-check.
  static DensityMatrix trusted(Matrix entries, double eigen_floor = kEigenFloor);

 private:
  struct Trusted {};
  DensityMatrix(Matrix entries, double eigen_floor, Trusted);
  HermitianMatrix m_;
  double eigen_floor_;
};

// Eigenvalues ascending; columns of `vectors` are the matching eigenvectors.
struct Spectrum {
  RealVector values;
  Matrix vectors;
};

Spectrum eig_hermitian(const HermitianMatrix& m);

// dim^n with saturation at `cap + 1` to keep the comparison overflow-safe.
std::int64_t pow_dim(std::int64_t dim, long n, std::int64_t cap);

// n-fold tensor power. Throws BudgetExceeded before allocating anything when
// dim^n > dim_budget. The density overload rescales the base to exact unit
// trace so the power's trace does not drift by n times the input tolerance.
Matrix kron_power(const Matrix& m, long n,
                  std::int64_t dim_budget = kDefaultDimBudget);
DensityMatrix kron_power(const DensityMatrix& m, long n,
                         std::int64_t dim_budget = kDefaultDimBudget);

// Entrywise tensor powers for vectors: products (probabilities) and sums
// (log-likelihoods). Index convention matches kron_power: first copy is the
// most significant digit.
RealVector tensor_prod_power(const RealVector& v, long n,
                             std::int64_t dim_budget = kDefaultDimBudget);
RealVector tensor_sum_power(const RealVector& v, long n,
                            std::int64_t dim_budget = kDefaultDimBudget);

// Sum of strictly positive eigenvalues.
double positive_part_trace(const HermitianMatrix& m);

}  // namespace qht::linalg

#include "qht/linalg.hpp"

#include <unsupported/Eigen/KroneckerProduct>

namespace qht::linalg {

HermitianMatrix::HermitianMatrix(Matrix entries, double tol) : m_(std::move(entries)) {
  if (m_.rows() != m_.cols()) {
    throw NotHermitian("matrix is " + std::to_string(m_.rows()) + "x" +
                       std::to_string(m_.cols()) + ", expected square");
  }
  double dev = (m_ - m_.adjoint()).cwiseAbs().maxCoeff();
  if (!(dev <= tol)) {
    throw NotHermitian("max |m - m^dag| = " + std::to_string(dev) +
                       " exceeds tolerance " + std::to_string(tol));
  }
}

DensityMatrix::DensityMatrix(HermitianMatrix m, double eigen_floor)
    : m_(std::move(m)), eigen_floor_(eigen_floor) {
  std::vector<std::string> violations;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m_.mat(), Eigen::EigenvaluesOnly);
  double min_eig = solver.eigenvalues().minCoeff();
  if (!(min_eig >= -kPsdTol)) {
    violations.push_back("not PSD: min eigenvalue " + std::to_string(min_eig));
  }
  double tr = m_.mat().trace().real();
  if (!(std::abs(tr - 1.0) <= kTraceTol)) {
    violations.push_back("trace " + std::to_string(tr) + " not 1");
  }
  if (!violations.empty()) throw InvariantViolation(std::move(violations));
}

DensityMatrix::DensityMatrix(Matrix entries, double eigen_floor, Trusted)
    : m_(std::move(entries)), eigen_floor_(eigen_floor) {}

DensityMatrix DensityMatrix::trusted(Matrix entries, double eigen_floor) {
  return DensityMatrix(std::move(entries), eigen_floor, Trusted{});
}

Spectrum eig_hermitian(const HermitianMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m.mat());
  if (solver.info() != Eigen::Success) {
    throw Error("eigendecomposition did not converge");
  }
  return Spectrum{solver.eigenvalues(), solver.eigenvectors()};
}

std::int64_t pow_dim(std::int64_t dim, long n, std::int64_t cap) {
  std::int64_t out = 1;
  for (long i = 0; i < n; ++i) {
    if (out > cap / dim) return cap + 1;
    out *= dim;
  }
  return out;
}

namespace {

std::int64_t checked_pow_dim(std::int64_t dim, long n, std::int64_t budget) {
  if (n < 1) throw Error("tensor power needs n >= 1");
  std::int64_t out = pow_dim(dim, n, budget);
  if (out > budget) throw BudgetExceeded(out, budget);
  return out;
}

}  // namespace

Matrix kron_power(const Matrix& m, long n, std::int64_t dim_budget) {
  checked_pow_dim(m.rows(), n, dim_budget);
  Matrix out = m;
  for (long i = 1; i < n; ++i) out = kroneckerProduct(out, m).eval();
  return out;
}

DensityMatrix kron_power(const DensityMatrix& m, long n, std::int64_t dim_budget) {
  Matrix base = m.mat() / m.mat().trace().real();
  return DensityMatrix::trusted(kron_power(base, n, dim_budget), m.eigen_floor());
}

RealVector tensor_prod_power(const RealVector& v, long n, std::int64_t dim_budget) {
  std::int64_t out_dim = checked_pow_dim(v.size(), n, dim_budget);
  RealVector out = RealVector::Ones(1);
  for (long i = 0; i < n; ++i) {
    RealVector next(out.size() * v.size());
    for (Eigen::Index a = 0; a < out.size(); ++a)
      for (Eigen::Index b = 0; b < v.size(); ++b) next[a * v.size() + b] = out[a] * v[b];
    out.swap(next);
  }
  if (out.size() != out_dim) throw Error("tensor power size mismatch");
  return out;
}

RealVector tensor_sum_power(const RealVector& v, long n, std::int64_t dim_budget) {
  checked_pow_dim(v.size(), n, dim_budget);
  RealVector out = RealVector::Zero(1);
  for (long i = 0; i < n; ++i) {
    RealVector next(out.size() * v.size());
    for (Eigen::Index a = 0; a < out.size(); ++a)
      for (Eigen::Index b = 0; b < v.size(); ++b) next[a * v.size() + b] = out[a] + v[b];
    out.swap(next);
  }
  return out;
}

double positive_part_trace(const HermitianMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m.mat(), Eigen::EigenvaluesOnly);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    double w = solver.eigenvalues()[i];
    if (w > 0.0) sum += w;
  }
  return sum;
}

}  // namespace qht::linalg

#include "qht/achievability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace qht::achievability {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

RealVector safe_log(const RealVector& v, double zero_tol) {
  RealVector out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i)
    out[i] = v[i] > zero_tol ? std::log(v[i]) : kNegInf;
  return out;
}

// Shared per-pair data for building candidate vectors.
struct XiContext {
  const SpectralPair& sp;
  Threshold th;
  RealVector log_lambda;  // per copy, -inf on the kernel
  RealVector log_mu_n;    // log mu^n over flat sigma-sequence indices
};

XiContext make_context(const SpectralPair& sp, const Threshold& th,
                       std::int64_t dim_budget) {
  RealVector log_mu = safe_log(sp.sigma_spec.values, 0.0);
  return XiContext{sp, th, safe_log(sp.rho_spec.values, divergences::kRhoZeroTol),
                   linalg::tensor_sum_power(log_mu, th.n, dim_budget)};
}

double sequence_log_lambda(const XiContext& ctx, const std::vector<int>& digits) {
  double s = 0.0;
  for (int d : digits) s += ctx.log_lambda[d];
  return s;
}

// Coefficient vector of the rho eigenvector in the sigma eigenproduct basis:
// the tensor product of the per-copy gamma columns.
Vector gamma_column(const Matrix& gamma, const std::vector<int>& digits) {
  Vector coeffs = Vector::Ones(1);
  for (int d : digits) {
    Vector col = gamma.col(d);
    Vector next(coeffs.size() * col.size());
    for (Eigen::Index a = 0; a < coeffs.size(); ++a)
      next.segment(a * col.size(), col.size()) = coeffs[a] * col;
    coeffs.swap(next);
  }
  return coeffs;
}

Vector xi_from_context(const XiContext& ctx, const std::vector<int>& digits,
                       double log_lambda_n) {
  Vector coeffs = gamma_column(ctx.sp.gamma, digits);
  for (Eigen::Index y = 0; y < coeffs.size(); ++y) {
    if (!(log_lambda_n - ctx.log_mu_n[y] >= ctx.th.log_l)) coeffs[y] = 0.0;
  }
  return coeffs;
}

}  // namespace

Threshold make_threshold(double relative_entropy, long n, double e2, double f_n) {
  if (n < 1) throw Error("threshold needs n >= 1");
  return Threshold{n, e2, f_n,
                   double(n) * relative_entropy + std::sqrt(double(n)) * e2 + f_n};
}

Threshold make_threshold(const StatePair& p, long n, double e2, double f_n) {
  return make_threshold(divergences::quantum_relative_entropy(p), n, e2, f_n);
}

std::vector<SequenceIndex> ordered_sequences(const RealVector& lambda, long n,
                                             std::int64_t dim_budget) {
  std::int64_t total = linalg::pow_dim(lambda.size(), n, dim_budget);
  if (total > dim_budget) throw BudgetExceeded(total, dim_budget);
  RealVector log_lam_n =
      linalg::tensor_sum_power(safe_log(lambda, divergences::kRhoZeroTol), n,
                               dim_budget);

  // Flat indices are already lexicographic on the digit vectors, so a stable
  // sort on the value alone realizes the tie-break.
  std::vector<long> idx(static_cast<std::size_t>(total));
  std::iota(idx.begin(), idx.end(), 0L);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](long a, long b) { return log_lam_n[a] < log_lam_n[b]; });

  long dim = lambda.size();
  std::vector<SequenceIndex> out(static_cast<std::size_t>(total));
  for (long rank = 0; rank < total; ++rank) {
    long flat = idx[static_cast<std::size_t>(rank)];
    std::vector<int> digits(static_cast<std::size_t>(n));
    long rem = flat;
    for (long i = n - 1; i >= 0; --i) {
      digits[static_cast<std::size_t>(i)] = int(rem % dim);
      rem /= dim;
    }
    out[static_cast<std::size_t>(rank)] =
        SequenceIndex{std::move(digits), log_lam_n[flat], rank};
  }
  return out;
}

Vector xi_vector(const SpectralPair& sp, const SequenceIndex& xn, const Threshold& th,
                 std::int64_t dim_budget) {
  if (long(xn.digits.size()) != th.n)
    throw Error("sequence length does not match threshold copy count");
  XiContext ctx = make_context(sp, th, dim_budget);
  return xi_from_context(ctx, xn.digits, sequence_log_lambda(ctx, xn.digits));
}

std::vector<Vector> modified_gram_schmidt(const std::vector<Vector>& vectors) {
  std::vector<Vector> out;
  std::vector<const Vector*> kept;
  out.reserve(vectors.size());
  for (const Vector& v : vectors) {
    Vector r = v;
    for (int pass = 0; pass < 2; ++pass)
      for (const Vector* u : kept) r -= (u->dot(r)) * (*u);
    if (r.norm() < kSpanTol) {
      out.push_back(Vector::Zero(v.size()));
    } else {
      out.push_back(r / r.norm());
      kept.push_back(&out.back());
    }
  }
  return out;
}

ConstructedTest build_test(const StatePair& p, long n, double e2, double f_n,
                           std::int64_t dim_budget) {
  SpectralPair sp = divergences::make_spectral_pair(p);
  long dim = p.dim();
  std::int64_t total = linalg::pow_dim(dim, n, dim_budget);
  if (total > dim_budget) throw BudgetExceeded(total, dim_budget);

  Threshold th = make_threshold(p, n, e2, f_n);
  XiContext ctx = make_context(sp, th, dim_budget);
  std::vector<SequenceIndex> order = ordered_sequences(sp.rho_spec.values, n, dim_budget);

  std::vector<Vector> xis;
  xis.reserve(order.size());
  for (const SequenceIndex& s : order)
    xis.push_back(xi_from_context(ctx, s.digits, s.log_lambda));
  std::vector<Vector> ortho = modified_gram_schmidt(xis);

  long r = 0;
  for (const Vector& u : ortho)
    if (u.norm() > 0.0) ++r;
  Matrix basis_b(total, r);  // sigma eigenproduct basis
  long col = 0;
  for (const Vector& u : ortho)
    if (u.norm() > 0.0) basis_b.col(col++) = u;

  // beta = sum_y mu^n(y) A(y,y) in the sigma basis; alpha from the rho
  // eigenvector overlaps, both without materializing the n-copy states.
  RealVector mu_clamped = sp.sigma_spec.values.cwiseMax(0.0);
  RealVector lam_clamped = sp.rho_spec.values.cwiseMax(0.0);
  RealVector mu_n = linalg::tensor_prod_power(mu_clamped / mu_clamped.sum(), n, dim_budget);
  RealVector lam_n = linalg::tensor_prod_power(lam_clamped / lam_clamped.sum(), n, dim_budget);

  double beta = 0.0;
  for (Eigen::Index y = 0; y < total; ++y)
    beta += mu_n[y] * basis_b.row(y).squaredNorm();

  double accept_mass = 0.0;
  for (const SequenceIndex& s : order) {
    long flat = 0;
    for (int d : s.digits) flat = flat * dim + d;
    if (lam_n[flat] == 0.0) continue;
    Vector g = gamma_column(sp.gamma, s.digits);
    accept_mass += lam_n[flat] * (basis_b.adjoint() * g).squaredNorm();
  }
  double alpha = std::clamp(1.0 - accept_mass, 0.0, 1.0);
  beta = std::clamp(beta, 0.0, 1.0);

  Matrix u_b_n = linalg::kron_power(sp.sigma_spec.vectors, n, dim_budget);
  Matrix kept_comp = u_b_n * basis_b;
  Matrix a_comp = kept_comp * kept_comp.adjoint();
  a_comp = 0.5 * (a_comp + a_comp.adjoint()).eval();

  return ConstructedTest{linalg::HermitianMatrix(std::move(a_comp)),
                         std::move(kept_comp),
                         alpha,
                         beta,
                         th,
                         r == 0};
}

}  // namespace qht::achievability

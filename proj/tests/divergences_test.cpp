#include <cmath>
#include <random>

#include "doctest.h"

#include "qht/divergences.hpp"
#include "qht/errors.hpp"
#include "qht/harness.hpp"

using namespace qht;
using divergences::StatePair;
using linalg::Complex;
using linalg::DensityMatrix;
using linalg::HermitianMatrix;
using linalg::Matrix;

namespace {

Matrix diag2(double a, double b) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

StatePair make_state_pair(const Matrix& rho, const Matrix& sigma) {
  return StatePair(DensityMatrix{HermitianMatrix{rho}},
                   DensityMatrix{HermitianMatrix{sigma}});
}

Matrix rotation(double theta) {
  Matrix u(2, 2);
  u << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return u;
}

}  // namespace

TEST_SUITE("divergences") {

TEST_CASE("sigma must be full rank") {
  CHECK_THROWS_AS(make_state_pair(diag2(0.5, 0.5), diag2(1.0, 0.0)), Error);
  CHECK_NOTHROW(make_state_pair(diag2(1.0, 0.0), diag2(0.5, 0.5)));  // rho may be pure
}

TEST_CASE("closed forms for the balanced vs tilted qubit pair") {
  const auto p = make_state_pair(diag2(0.5, 0.5), diag2(0.75, 0.25));
  const double l3 = std::log(3.0);
  CHECK(std::abs(divergences::quantum_relative_entropy(p) -
                 (std::log(2.0) - 0.5 * l3)) <= 1e-12);
  CHECK(std::abs(divergences::quantum_relative_variance(p) - 0.25 * l3 * l3) <=
        1e-12);
  CHECK(std::abs(divergences::third_abs_moment(p) - 0.125 * l3 * l3 * l3) <= 1e-12);
}

TEST_CASE("closed form against the maximally mixed state") {
  const auto p = make_state_pair(diag2(0.75, 0.25), diag2(0.5, 0.5));
  // sum_i lambda_i (log lambda_i - log 0.5)
  const double want = 0.75 * std::log(1.5) + 0.25 * std::log(0.5);
  CHECK(std::abs(divergences::quantum_relative_entropy(p) - want) <= 1e-12);
}

TEST_CASE("relative entropy of identical states is zero") {
  const auto p = make_state_pair(diag2(0.6, 0.4), diag2(0.6, 0.4));
  CHECK(std::abs(divergences::quantum_relative_entropy(p)) <= 1e-12);
  CHECK(std::abs(divergences::quantum_relative_variance(p)) <= 1e-12);
}

TEST_CASE("unitary invariance") {
  std::mt19937_64 rng(17);
  const auto p = harness::random_state_pair(3, rng);
  const auto basis =
      linalg::eig_hermitian(harness::random_density_matrix(3, rng).hermitian())
          .vectors;
  const auto rotated = StatePair(
      DensityMatrix{HermitianMatrix{basis * p.rho().mat() * basis.adjoint()}},
      DensityMatrix{HermitianMatrix{basis * p.sigma().mat() * basis.adjoint()}});
  CHECK(std::abs(divergences::quantum_relative_entropy(rotated) -
                 divergences::quantum_relative_entropy(p)) <= 1e-10);
  CHECK(std::abs(divergences::quantum_relative_variance(rotated) -
                 divergences::quantum_relative_variance(p)) <= 1e-10);
}

TEST_CASE("relative entropy is additive over tensor powers") {
  std::mt19937_64 rng(29);
  const auto p = harness::random_state_pair(2, rng);
  const auto p2 = StatePair(linalg::kron_power(p.rho(), 2),
                            linalg::kron_power(p.sigma(), 2));
  CHECK(std::abs(divergences::quantum_relative_entropy(p2) -
                 2.0 * divergences::quantum_relative_entropy(p)) <= 1e-10);
  CHECK(std::abs(divergences::quantum_relative_variance(p2) -
                 2.0 * divergences::quantum_relative_variance(p)) <= 1e-10);
}

TEST_CASE("third absolute moment dominates the variance power") {
  // E|X-m|^3 >= (E(X-m)^2)^(3/2) for any law, so the skew ratio is >= 1.
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = harness::random_state_pair(3, rng);
    const double v = divergences::quantum_relative_variance(p);
    const double t3 = divergences::third_abs_moment(p);
    CHECK(t3 >= std::pow(v, 1.5) * (1.0 - 1e-12));
  }
}

TEST_CASE("spectral pair overlap matrix is unitary") {
  std::mt19937_64 rng(43);
  const auto p = harness::random_state_pair(4, rng);
  const auto sp = divergences::make_spectral_pair(p);
  const Matrix gg = sp.gamma.adjoint() * sp.gamma;
  CHECK((gg - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("degenerate classification and the proportionality constant") {
  const auto same = make_state_pair(diag2(0.5, 0.5), diag2(0.5, 0.5));
  auto v = divergences::classify_degenerate(same);
  CHECK(v.degenerate);
  REQUIRE(v.k.has_value());
  CHECK(std::abs(*v.k - 1.0) <= 1e-9);

  // rho supported on the first axis only: lambda = 2 * mu there.
  const auto pure = make_state_pair(diag2(1.0, 0.0), diag2(0.5, 0.5));
  v = divergences::classify_degenerate(pure);
  CHECK(v.degenerate);
  REQUIRE(v.k.has_value());
  CHECK(std::abs(*v.k - 2.0) <= 1e-9);
  CHECK(std::abs(divergences::quantum_relative_entropy(pure) - std::log(2.0)) <=
        1e-12);
  CHECK(divergences::quantum_relative_variance(pure) <= 1e-12);

  // same structure in a rotated basis: k = 3, D = log 3.
  const Matrix u = rotation(0.7);
  const auto rotated = make_state_pair(u * diag2(1.0, 0.0) * u.adjoint(),
                                 u * diag2(1.0 / 3.0, 2.0 / 3.0) * u.adjoint());
  v = divergences::classify_degenerate(rotated);
  CHECK(v.degenerate);
  REQUIRE(v.k.has_value());
  CHECK(std::abs(*v.k - 3.0) <= 1e-9);
  CHECK(std::abs(divergences::quantum_relative_entropy(rotated) - std::log(3.0)) <=
        1e-10);
}

TEST_CASE("commuting but non-proportional pairs are not degenerate") {
  const auto p = make_state_pair(diag2(0.5, 0.5), diag2(0.75, 0.25));
  CHECK_FALSE(divergences::classify_degenerate(p).degenerate);
}

TEST_CASE("non-commuting pairs are not degenerate") {
  const Matrix u = rotation(0.4);
  const auto p =
      make_state_pair(diag2(0.8, 0.2), u * diag2(0.6, 0.4) * u.adjoint());
  CHECK_FALSE(divergences::classify_degenerate(p).degenerate);
  CHECK(divergences::quantum_relative_variance(p) > 1e-6);
}

TEST_CASE("report bundles the four statistics consistently") {
  const auto p = make_state_pair(diag2(0.5, 0.5), diag2(0.75, 0.25));
  const auto rep = divergences::divergence_report(p);
  CHECK(rep.relative_entropy == divergences::quantum_relative_entropy(p));
  CHECK(rep.relative_variance == divergences::quantum_relative_variance(p));
  CHECK(rep.third_abs_moment == divergences::third_abs_moment(p));
  CHECK_FALSE(rep.degenerate);
}

}  // TEST_SUITE

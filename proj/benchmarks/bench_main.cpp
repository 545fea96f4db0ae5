// Microbenchmarks for the hot paths: spectral decomposition, exact LLR
// convolution, test construction, and one oracle frontier query.

#include <benchmark/benchmark.h>

#include <random>

#include "qht/achievability.hpp"
#include "qht/divergences.hpp"
#include "qht/harness.hpp"
#include "qht/linalg.hpp"
#include "qht/np_oracle.hpp"
#include "qht/ns_classical.hpp"

using namespace qht;

namespace {

divergences::StatePair fixed_pair(Eigen::Index dim) {
  std::mt19937_64 rng(0x00c0ffee + static_cast<std::uint64_t>(dim));
  return harness::random_state_pair(dim, rng);
}

// commuting pair with a two-atom lattice LLR: the n-fold convolution merges
// down to n + 1 atoms, so large n stays cheap
divergences::StatePair lattice_pair() {
  linalg::Matrix rho = linalg::Matrix::Zero(2, 2);
  linalg::Matrix sigma = linalg::Matrix::Zero(2, 2);
  rho(0, 0) = 0.5;
  rho(1, 1) = 0.5;
  sigma(0, 0) = 0.75;
  sigma(1, 1) = 0.25;
  return divergences::StatePair(
      linalg::DensityMatrix{linalg::HermitianMatrix{rho}},
      linalg::DensityMatrix{linalg::HermitianMatrix{sigma}});
}

void bm_eig_hermitian(benchmark::State& state) {
  const Eigen::Index dim = state.range(0);
  const auto p = fixed_pair(dim);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        linalg::eig_hermitian(linalg::HermitianMatrix{p.rho().mat()}));
  }
}
BENCHMARK(bm_eig_hermitian)->Arg(4)->Arg(16)->Arg(64);

void bm_convolve_n(benchmark::State& state) {
  const long n = state.range(0);
  const auto d1 = ns::llr_atoms(ns::build_ns_joint(lattice_pair()));
  for (auto _ : state) {
    benchmark::DoNotOptimize(ns::convolve_n(d1, n));
  }
}
BENCHMARK(bm_convolve_n)->Arg(16)->Arg(64)->Arg(256);

void bm_build_test(benchmark::State& state) {
  const long n = state.range(0);
  const auto p = fixed_pair(2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(achievability::build_test(p, n, 0.0, 0.0));
  }
}
BENCHMARK(bm_build_test)->Arg(2)->Arg(4)->Arg(6);

void bm_oracle_query(benchmark::State& state) {
  const long n = state.range(0);
  const auto p = fixed_pair(2);
  const auto rho_n = linalg::kron_power(p.rho(), n);
  const auto sigma_n = linalg::kron_power(p.sigma(), n);
  for (auto _ : state) {
    oracle::NpOracle np(rho_n, sigma_n);
    benchmark::DoNotOptimize(np.beta_of_epsilon(0.25));
  }
}
BENCHMARK(bm_oracle_query)->Arg(2)->Arg(4)->Arg(6);

}  // namespace

BENCHMARK_MAIN();

// Acceptance gate: one [PASS]/[FAIL] line per criterion, exit 1 on any failure.
// argv[1] is the CLI binary used by the reproducibility criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qht/achievability.hpp"
#include "qht/bounds.hpp"
#include "qht/divergences.hpp"
#include "qht/errors.hpp"
#include "qht/harness.hpp"
#include "qht/np_oracle.hpp"
#include "qht/ns_classical.hpp"
#include "qht/optimality.hpp"

using namespace qht;
using divergences::StatePair;
using linalg::Complex;
using linalg::DensityMatrix;
using linalg::HermitianMatrix;
using linalg::Matrix;

namespace {

int g_criterion_failures = 0;

// Always-on requirement: never compiled out in Release.
#define REQUIRE(cond, msg)                                                     \
  do {                                                                         \
    if (!(cond)) {                                                             \
      ++g_criterion_failures;                                                  \
      std::ostringstream oss_;                                                 \
      oss_ << msg;                                                             \
      std::cerr << "  [FAIL] " << __FILE__ << ":" << __LINE__ << " "           \
                << oss_.str() << "\n";                                         \
    }                                                                          \
  } while (0)

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

Matrix diag2(double a, double b) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

Matrix rotate(const Matrix& m, double theta, double phase = 0.0) {
  Matrix u(2, 2);
  const Complex e = std::polar(1.0, phase);
  u << std::cos(theta), -e * std::sin(theta),
      std::conj(e) * std::sin(theta), std::cos(theta);
  return u * m * u.adjoint();
}

StatePair make_state_pair(const Matrix& rho, const Matrix& sigma) {
  return StatePair(DensityMatrix{HermitianMatrix{rho}},
                   DensityMatrix{HermitianMatrix{sigma}});
}

struct QubitPair {
  std::string name;
  StatePair p;
  bool commuting;
  Eigen::VectorXd lam, mu;  // diagonal entries when commuting
};

std::vector<QubitPair> acceptance_pairs() {
  std::vector<QubitPair> out;
  Eigen::VectorXd l(2), m(2);
  l << 0.5, 0.5;
  m << 0.75, 0.25;
  out.push_back({"tilted", make_state_pair(diag2(0.5, 0.5), diag2(0.75, 0.25)), true, l, m});
  l << 0.9, 0.1;
  m << 0.4, 0.6;
  out.push_back({"skewed", make_state_pair(diag2(0.9, 0.1), diag2(0.4, 0.6)), true, l, m});
  out.push_back({"rot_sigma",
                 make_state_pair(diag2(0.7, 0.3), rotate(diag2(0.6, 0.4), 0.5)), false,
                 {}, {}});
  out.push_back({"rot_rho",
                 make_state_pair(rotate(diag2(0.9, 0.1), 0.3), diag2(0.55, 0.45)), false,
                 {}, {}});
  out.push_back({"rot_both",
                 make_state_pair(rotate(diag2(0.65, 0.35), 1.1, 0.8),
                           rotate(diag2(0.8, 0.2), 0.2, -0.4)),
                 false, {}, {}});
  return out;
}

// closed forms for the tilted pair
const double kL3 = std::log(3.0);
const double kD5 = std::log(2.0) - 0.5 * kL3;
const double kV5 = 0.25 * kL3 * kL3;
const double kT35 = 0.125 * kL3 * kL3 * kL3;

// criterion 5 artifacts reused by criterion 6
struct SandwichPoint {
  long n;
  double neg_log_beta;
  double lower;
  double upper;
};
std::vector<SandwichPoint> g_sandwich;

void criterion_1_classical_reduction() {
  std::mt19937_64 rng(0x1438410362258905ull);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index dim = 2 + trial % 3;
    const auto p = harness::random_state_pair(dim, rng);
    const auto d = ns::llr_atoms(ns::build_ns_joint(p));
    const double dq = divergences::quantum_relative_entropy(p);
    const double vq = divergences::quantum_relative_variance(p);
    REQUIRE(std::abs(d.mean() - dq) <= 1e-9,
            "trial " << trial << ": mean " << d.mean() << " vs D " << dq);
    REQUIRE(std::abs(d.variance() - vq) <= 1e-9,
            "trial " << trial << ": var " << d.variance() << " vs V " << vq);
  }
}

void criterion_2_constructed_tests() {
  for (const auto& qp : acceptance_pairs()) {
    const auto d1 = ns::llr_atoms(ns::build_ns_joint(qp.p));
    for (long n = 1; n <= 8; ++n) {
      const auto dn = ns::convolve_n(d1, n);
      for (double e2 : {-1.0, 0.0, 1.0}) {
        const auto t = achievability::build_test(qp.p, n, e2, 0.0);
        const auto& A = t.A.mat();
        REQUIRE((A * A - A).norm() <= 1e-8,
                qp.name << " n=" << n << " e2=" << e2 << ": |A^2-A|_F = "
                        << (A * A - A).norm());
        REQUIRE(t.beta <= std::exp(-t.threshold.log_l) + 1e-10,
                qp.name << " n=" << n << " e2=" << e2 << ": beta " << t.beta
                        << " vs exp(-log_l) " << std::exp(-t.threshold.log_l));
        const double tail =
            ns::tail_prob(dn, t.threshold.log_l, ns::TailSide::below);
        REQUIRE(t.alpha <= tail + 1e-9, qp.name << " n=" << n << " e2=" << e2
                                                << ": alpha " << t.alpha
                                                << " vs tail " << tail);
      }
    }
  }
}

void criterion_3_oracle_certification() {
  const double kGap = 1e-6;
  for (const auto& qp : acceptance_pairs()) {
    for (long n = 1; n <= 8; ++n) {
      oracle::NpOracle np(linalg::kron_power(qp.p.rho(), n),
                          linalg::kron_power(qp.p.sigma(), n));
      for (double eps : {0.1, 0.25, 0.5}) {
        const auto bc = np.beta_of_epsilon(eps, kGap);
        REQUIRE(bc.gap >= -1e-12 && bc.gap <= kGap,
                qp.name << " n=" << n << " eps=" << eps << ": gap " << bc.gap);
        if (qp.commuting) {
          const double want = oracle::classical_np(
              linalg::tensor_prod_power(qp.lam, n),
              linalg::tensor_prod_power(qp.mu, n), eps);
          REQUIRE(std::abs(bc.beta - want) <= 1e-9,
                  qp.name << " n=" << n << " eps=" << eps << ": quantum "
                          << bc.beta << " vs classical " << want);
        }
      }
    }
  }
  // identical states: the frontier is the straight line beta = 1 - eps
  oracle::NpOracle same(DensityMatrix{HermitianMatrix{diag2(0.5, 0.5)}},
                        DensityMatrix{HermitianMatrix{diag2(0.5, 0.5)}});
  for (double eps : {0.1, 0.25, 0.5}) {
    const auto bc = same.beta_of_epsilon(eps, kGap);
    REQUIRE(std::abs(bc.beta - (1.0 - eps)) <= 1e-9,
            "identical states eps=" << eps << ": " << bc.beta);
  }
  // pure state vs the maximally mixed state: beta = (1 - eps) / 2
  oracle::NpOracle pure(DensityMatrix{HermitianMatrix{diag2(1.0, 0.0)}},
                        DensityMatrix{HermitianMatrix{diag2(0.5, 0.5)}});
  for (double eps : {0.1, 0.25, 0.5}) {
    const auto bc = pure.beta_of_epsilon(eps, kGap);
    REQUIRE(std::abs(bc.beta - 0.5 * (1.0 - eps)) <= 1e-9,
            "pure vs mixed eps=" << eps << ": " << bc.beta);
  }
}

void criterion_4_quantum_sandwich() {
  const double eps = 0.45, c = 0.4784;
  const auto p = make_state_pair(diag2(0.7, 0.3), rotate(diag2(0.6, 0.4), 0.5));
  const auto rep = divergences::divergence_report(p);
  int both_applicable = 0;
  for (long n = 1; n <= 8; ++n) {
    const auto fb = bounds::finite_sample_bounds_from_stats(
        rep.relative_entropy, rep.relative_variance, rep.third_abs_moment, n, eps,
        c);
    const auto bc = oracle::beta_of_epsilon(p, n, eps, 1e-9);
    const double nlb = -std::log(bc.beta);
    if (fb.lower && fb.upper) {
      ++both_applicable;
      REQUIRE(*fb.lower <= nlb + 1e-9 && nlb <= *fb.upper + 1e-9,
              "n=" << n << ": sandwich " << *fb.lower << " <= " << nlb
                   << " <= " << *fb.upper);
    }
    // the upper gate needs eps + (c*skew+2)/sqrt(n) <= 1, impossible for n <= 8
    // at eps = 0.45; the not-applicable marker must fire every time
    REQUIRE(!fb.upper.has_value(), "n=" << n << ": upper unexpectedly engaged");
    if (fb.lower) {
      REQUIRE(*fb.lower <= nlb + 1e-9,
              "n=" << n << ": lower " << *fb.lower << " above optimum " << nlb);
    }
  }
  REQUIRE(both_applicable == 0,
          "expected the fallback branch, got " << both_applicable
                                               << " two-sided instances");
  std::cerr << "  [note] no n <= 8 has both sides applicable at eps = 0.45; "
               "markers verified, two-sided sandwich covered at classical scale\n";
}

void criterion_5_classical_sandwich() {
  g_sandwich.clear();
  Eigen::VectorXd lam(2), mu(2);
  lam << 0.5, 0.5;
  mu << 0.75, 0.25;
  const double eps = 0.4, c = 0.4784;
  const double q_eps = ns::normal_quantile(eps);
  double min_lower_residual = std::numeric_limits<double>::infinity();
  std::vector<double> residuals;
  for (long n : {25L, 100L, 400L, 1600L}) {
    const double beta = oracle::classical_np_pow(lam, mu, n, eps);
    const auto fb =
        bounds::finite_sample_bounds_from_stats(kD5, kV5, kT35, n, eps, c);
    REQUIRE(fb.lower.has_value() && fb.upper.has_value(),
            "n=" << n << ": both sides should be applicable");
    if (!fb.lower || !fb.upper) continue;
    const double nlb = -std::log(beta);
    REQUIRE(*fb.lower <= nlb + 1e-9 && nlb <= *fb.upper + 1e-9,
            "n=" << n << ": sandwich " << *fb.lower << " <= " << nlb
                 << " <= " << *fb.upper);
    const double gaussian = n * kD5 + std::sqrt(n * kV5) * q_eps;
    residuals.push_back(nlb - gaussian);
    min_lower_residual = std::min(min_lower_residual, *fb.lower - gaussian);
    g_sandwich.push_back({n, nlb, *fb.lower, *fb.upper});
  }
  const long ns[4] = {25, 100, 400, 1600};
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    REQUIRE(residuals[i] >= min_lower_residual - 1e-9,
            "n=" << ns[i] << ": residual " << residuals[i]
                 << " below the floor " << min_lower_residual);
    REQUIRE(residuals[i] <= 2.0 * std::log(double(ns[i])) + 10.0,
            "n=" << ns[i] << ": residual " << residuals[i] << " above 2 ln n + 10");
  }
}

void criterion_6_second_order_trend() {
  REQUIRE(g_sandwich.size() == 4, "needs the criterion-5 sweep");
  if (g_sandwich.size() != 4) return;
  const double target = std::sqrt(kV5) * ns::normal_quantile(0.4);
  double dev25 = 0.0, dev1600 = 0.0;
  for (const auto& s : g_sandwich) {
    const double sqrt_n = std::sqrt(static_cast<double>(s.n));
    const double second_order = (s.neg_log_beta - s.n * kD5) / sqrt_n;
    const double dev = second_order - target;
    // the sandwich imposes the envelope; check it directly in sqrt(n) units
    const double env_lo = (s.lower - s.n * kD5) / sqrt_n - target;
    const double env_hi = (s.upper - s.n * kD5) / sqrt_n - target;
    REQUIRE(dev >= env_lo - 1e-9 && dev <= env_hi + 1e-9,
            "n=" << s.n << ": deviation " << dev << " outside [" << env_lo << ", "
                 << env_hi << "]");
    if (s.n == 25) dev25 = std::abs(dev);
    if (s.n == 1600) dev1600 = std::abs(dev);
  }
  REQUIRE(dev1600 < dev25, "no contraction: |dev(1600)| = "
                               << dev1600 << " vs |dev(25)| = " << dev25);
}

void criterion_7_overlap_gap_suite() {
  std::mt19937_64 rng(0x5ca1ab1e);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> dim_of(2, 16);
  long violations = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const Eigen::Index dim = dim_of(rng);
    linalg::Vector phi(dim), varphi(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      phi(i) = Complex(g(rng), g(rng));
      varphi(i) = Complex(g(rng), g(rng));
    }
    phi.normalize();
    varphi.normalize();
    std::uniform_int_distribution<int> rank_of(0, static_cast<int>(dim));
    const int rank = rank_of(rng);
    Matrix basis(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i)
      for (Eigen::Index j = 0; j < dim; ++j) basis(i, j) = Complex(g(rng), g(rng));
    const Matrix q = Eigen::HouseholderQR<Matrix>(basis).householderQ();
    const Matrix proj = q.leftCols(rank) * q.leftCols(rank).adjoint();
    const double gap = optimality::projector_overlap_gap(phi, varphi, proj);
    const double eps =
        std::sqrt(std::max(0.0, 1.0 - (proj * phi).squaredNorm()));
    if (gap > 2.0 * std::sqrt(2.0) * eps + 1e-9) {
      ++violations;
      if (violations <= 3)
        std::cerr << "  [FAIL] trial " << trial << ": gap " << gap
                  << " vs envelope " << 2.0 * std::sqrt(2.0) * eps << "\n";
    }
  }
  REQUIRE(violations == 0, violations << " envelope violations out of 10000");
}

void criterion_8_central_limit_envelope() {
  const auto p = make_state_pair(diag2(0.5, 0.5), diag2(0.75, 0.25));
  const auto d1 = ns::llr_atoms(ns::build_ns_joint(p));
  for (long n : {9L, 64L, 225L}) {
    const auto dn = ns::convolve_n(d1, n);
    const double scale = std::sqrt(n * kV5);
    for (int j = 0; j < 21; ++j) {
      const double x = -2.95 + 0.3 * j;  // grid avoids the lattice atoms
      const double exact = ns::mass_at_most(dn, n * kD5 + x * scale);
      const auto env = ns::berry_esseen_envelope(kD5, kV5, kT35, n,
                                                 x * std::sqrt(kV5), 0.4784);
      REQUIRE(exact >= env.lower - 1e-12 && exact <= env.upper + 1e-12,
              "n=" << n << " x=" << x << ": tail " << exact << " outside ["
                   << env.lower << ", " << env.upper << "]");
    }
  }
}

void criterion_9_degenerate_frontier() {
  struct Case {
    std::string name;
    StatePair p;
    double d;
  };
  std::vector<Case> cases;
  cases.push_back({"identical", make_state_pair(diag2(0.5, 0.5), diag2(0.5, 0.5)), 0.0});
  cases.push_back(
      {"pure_on_axis", make_state_pair(diag2(1.0, 0.0), diag2(0.5, 0.5)), std::log(2.0)});
  cases.push_back({"rotated_third",
                   make_state_pair(rotate(diag2(1.0, 0.0), 0.6),
                             rotate(diag2(1.0 / 3.0, 2.0 / 3.0), 0.6)),
                   std::log(3.0)});
  for (const auto& c : cases) {
    const auto rep = divergences::divergence_report(c.p);
    REQUIRE(rep.degenerate, c.name << ": degenerate flag not set");
    REQUIRE(rep.relative_variance <= 1e-9,
            c.name << ": V = " << rep.relative_variance);
    REQUIRE(std::abs(rep.relative_entropy - c.d) <= 1e-9,
            c.name << ": D = " << rep.relative_entropy << " vs " << c.d);
    for (long n = 1; n <= 6; ++n) {
      oracle::NpOracle np(linalg::kron_power(c.p.rho(), n),
                          linalg::kron_power(c.p.sigma(), n));
      const double scale = std::exp(n * c.d);
      for (double eps : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        const auto bc = np.beta_of_epsilon(eps, 1e-9);
        REQUIRE(std::abs(bc.beta - (1.0 - eps) / scale) <= 1e-9,
                c.name << " n=" << n << " eps=" << eps << ": beta " << bc.beta
                       << " vs " << (1.0 - eps) / scale);
      }
      // every non-dominated frontier vertex sits on the line alpha = 1 - beta e^{nD}
      const auto curve = np.curve();
      for (const auto& v : curve.hull) {
        if (v.beta > 1.0 / scale + 1e-9) continue;  // dominated vertical edge
        REQUIRE(std::abs(v.alpha - (1.0 - v.beta * scale)) <= 1e-9,
                c.name << " n=" << n << ": vertex (" << v.alpha << ", " << v.beta
                       << ") off the line");
      }
    }
  }
}

void criterion_10_reproducibility(const std::string& cli) {
  namespace fs = std::filesystem;
  REQUIRE(!cli.empty(), "CLI binary path not supplied");
  if (cli.empty()) return;
  const auto dir = fs::temp_directory_path();
  const auto pair_path = (dir / "qht_accept_pair.json").string();
  harness::save_state_pair(pair_path,
                           make_state_pair(diag2(0.5, 0.5), diag2(0.75, 0.25)));
  const std::string out_a = (dir / "qht_accept_a.csv").string();
  const std::string out_b = (dir / "qht_accept_b.csv").string();
  auto run = [&](const std::string& out) {
    std::ostringstream cmd;
    cmd << '"' << cli << '"'
        << " sweep --pair \"" << pair_path << "\" --n 1,2,3,4 --eps 0.2,0.5"
        << " --seed 11 --out \"" << out << "\" 2>/dev/null";
    return std::system(cmd.str().c_str());
  };
  REQUIRE(run(out_a) == 0, "first sweep failed");
  REQUIRE(run(out_b) == 0, "second sweep failed");
  auto slurp = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string a = slurp(out_a), b = slurp(out_b);
  REQUIRE(!a.empty(), "first sweep wrote nothing");
  REQUIRE(a == b, "CSV outputs differ between identical runs");
  const std::string ma = slurp(out_a + ".manifest.json");
  const std::string mb = slurp(out_b + ".manifest.json");
  REQUIRE(!ma.empty() && ma == mb, "manifests differ between identical runs");
  for (const auto& f : {out_a, out_b, out_a + ".manifest.json",
                        out_b + ".manifest.json", pair_path})
    std::remove(f.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  int failed = 0;

  auto run = [&](int index, const char* name, double limit_s, auto&& body) {
    g_criterion_failures = 0;
    const double t0 = now_seconds();
    try {
      body();
    } catch (const std::exception& e) {
      ++g_criterion_failures;
      std::cerr << "  [FAIL] criterion " << index << " threw: " << e.what()
                << "\n";
    }
    const double dt = now_seconds() - t0;
    if (limit_s > 0.0 && dt > limit_s) {
      ++g_criterion_failures;
      std::cerr << "  [FAIL] criterion " << index << " took " << dt
                << "s, limit " << limit_s << "s\n";
    }
    const bool pass = g_criterion_failures == 0;
    if (!pass) ++failed;
    std::printf("[%s] criterion %2d: %s (%.2fs)\n", pass ? "PASS" : "FAIL", index,
                name, dt);
    std::fflush(stdout);
  };

  run(1, "classical reduction preserves D and V on random pairs", 5.0,
      [] { criterion_1_classical_reduction(); });
  run(2, "constructed tests meet both error guarantees", 120.0,
      [] { criterion_2_constructed_tests(); });
  run(3, "oracle certifies its optimum and matches known frontiers", 0.0,
      [] { criterion_3_oracle_certification(); });
  run(4, "two-sided bounds vs the oracle, small quantum scale", 0.0,
      [] { criterion_4_quantum_sandwich(); });
  run(5, "two-sided bounds vs the exact optimum, classical scale", 60.0,
      [] { criterion_5_classical_sandwich(); });
  run(6, "second-order term converges with n", 0.0,
      [] { criterion_6_second_order_trend(); });
  run(7, "projector overlap gap envelope, ten thousand draws", 10.0,
      [] { criterion_7_overlap_gap_suite(); });
  run(8, "exact tails inside the central-limit envelope", 0.0,
      [] { criterion_8_central_limit_envelope(); });
  run(9, "degenerate pairs trace the linear frontier", 0.0,
      [] { criterion_9_degenerate_frontier(); });
  run(10, "sweep runs are byte-identical", 0.0,
      [&] { criterion_10_reproducibility(cli); });

  if (failed == 0) {
    std::printf("all 10 criteria passed\n");
    return 0;
  }
  std::printf("%d criteria failed\n", failed);
  return 1;
}

#include "qht/ns_classical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace qht::ns {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Raw pairwise products are materialized before merging; this caps that
// intermediate so a pathological pair fails fast instead of exhausting memory.
constexpr std::int64_t kRawProductFloor = 16'000'000;

bool mergeable(double value, double anchor) {
  return std::abs(value - anchor) <= kAtomMergeTol + kAtomMergeTol * std::abs(anchor);
}

// Sorts by value and collapses clusters of equal-within-tolerance values onto
// their probability-weighted mean. Zero-probability atoms are dropped.
std::vector<LLRDistribution::Atom> merge_atoms(std::vector<LLRDistribution::Atom> raw) {
  std::sort(raw.begin(), raw.end(),
            [](const auto& a, const auto& b) { return a.value < b.value; });
  std::vector<LLRDistribution::Atom> out;
  out.reserve(raw.size());
  double wsum = 0.0, psum = 0.0;
  bool open = false;
  auto flush = [&] {
    if (open && psum > 0.0) out.push_back({wsum / psum, psum});
    open = false;
  };
  for (const auto& a : raw) {
    if (a.prob == 0.0) continue;
    if (!open || !mergeable(a.value, wsum / psum)) {
      flush();
      wsum = psum = 0.0;
      open = true;
    }
    wsum += a.prob * a.value;
    psum += a.prob;
  }
  flush();
  return out;
}

std::vector<LLRDistribution::Atom> convolve_pair(
    const std::vector<LLRDistribution::Atom>& a,
    const std::vector<LLRDistribution::Atom>& b, long max_atoms) {
  std::int64_t raw_count = std::int64_t(a.size()) * std::int64_t(b.size());
  std::int64_t raw_cap = std::max<std::int64_t>(max_atoms, kRawProductFloor);
  if (raw_count > raw_cap) throw AtomBudgetExceeded(raw_count, max_atoms);
  std::vector<LLRDistribution::Atom> raw;
  raw.reserve(static_cast<std::size_t>(raw_count));
  for (const auto& ai : a)
    for (const auto& bj : b) raw.push_back({ai.value + bj.value, ai.prob * bj.prob});
  auto merged = merge_atoms(std::move(raw));
  if (std::int64_t(merged.size()) > max_atoms)
    throw AtomBudgetExceeded(merged.size(), max_atoms);
  return merged;
}

}  // namespace

NSJoint build_ns_joint(const divergences::StatePair& p) {
  return build_ns_joint(divergences::make_spectral_pair(p));
}

NSJoint build_ns_joint(const divergences::SpectralPair& sp) {
  NSJoint j;
  j.lambda = sp.rho_spec.values;
  j.mu = sp.sigma_spec.values;
  j.probs.resize(j.lambda.size(), j.mu.size());
  for (Eigen::Index x = 0; x < j.lambda.size(); ++x)
    for (Eigen::Index y = 0; y < j.mu.size(); ++y)
      j.probs(x, y) = j.lambda[x] * std::norm(sp.gamma(y, x));
  return j;
}

double LLRDistribution::total_mass() const {
  double s = 0.0;
  for (const auto& a : atoms) s += a.prob;
  return s;
}

double LLRDistribution::mean() const {
  double s = 0.0;
  for (const auto& a : atoms) s += a.prob * a.value;
  return s / total_mass();
}

double LLRDistribution::variance() const {
  double m = mean(), s = 0.0;
  for (const auto& a : atoms) s += a.prob * (a.value - m) * (a.value - m);
  return s / total_mass();
}

double LLRDistribution::third_abs_moment_about(double center) const {
  double s = 0.0;
  for (const auto& a : atoms) {
    double dev = std::abs(a.value - center);
    s += a.prob * dev * dev * dev;
  }
  return s / total_mass();
}

LLRDistribution llr_atoms(const NSJoint& j) {
  std::vector<LLRDistribution::Atom> raw;
  for (Eigen::Index x = 0; x < j.lambda.size(); ++x) {
    double lam = j.lambda[x];
    if (lam <= divergences::kRhoZeroTol) continue;
    for (Eigen::Index y = 0; y < j.mu.size(); ++y) {
      double p = j.probs(x, y);
      if (p <= 0.0) continue;
      double mu = j.mu[y];
      double z = mu > 0.0 ? std::log(lam) - std::log(mu) : kInf;
      raw.push_back({z, p});
    }
  }
  LLRDistribution d;
  d.atoms = merge_atoms(std::move(raw));
  d.n = 1;
  return d;
}

LLRDistribution convolve_n(const LLRDistribution& d, long n, long max_atoms) {
  if (n < 1) throw Error("convolve_n needs n >= 1");
  // Exponentiation by squaring keeps the number of merge stages at O(log n),
  // which also bounds the drift of merged representatives.
  std::vector<LLRDistribution::Atom> result;
  std::vector<LLRDistribution::Atom> square = d.atoms;
  long k = n;
  bool have_result = false;
  while (k > 0) {
    if (k & 1) {
      result = have_result ? convolve_pair(result, square, max_atoms) : square;
      have_result = true;
    }
    k >>= 1;
    if (k > 0) square = convolve_pair(square, square, max_atoms);
  }
  LLRDistribution out;
  out.atoms = std::move(result);
  out.n = d.n * n;
  return out;
}

double tail_prob(const LLRDistribution& d, double threshold, TailSide side) {
  double below = 0.0, at_or_above = 0.0;
  for (const auto& a : d.atoms) {
    if (a.value < threshold)
      below += a.prob;
    else
      at_or_above += a.prob;
  }
  return side == TailSide::below ? below : at_or_above;
}

double mass_at_most(const LLRDistribution& d, double threshold) {
  double s = 0.0;
  for (const auto& a : d.atoms)
    if (a.value <= threshold) s += a.prob;
  return s;
}

McTailEstimate monte_carlo_tail(const LLRDistribution& d, long n, double threshold,
                                long samples, std::uint64_t seed) {
  if (samples < 1) throw Error("monte_carlo_tail needs samples >= 1");
  std::vector<double> cum(d.atoms.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < d.atoms.size(); ++i) {
    acc += d.atoms[i].prob;
    cum[i] = acc;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, acc);
  long hits = 0;
  for (long s = 0; s < samples; ++s) {
    double sum = 0.0;
    for (long i = 0; i < n; ++i) {
      auto it = std::upper_bound(cum.begin(), cum.end(), unif(rng));
      if (it == cum.end()) --it;
      sum += d.atoms[std::size_t(it - cum.begin())].value;
    }
    if (sum < threshold) ++hits;
  }
  double p = double(hits) / double(samples);
  return McTailEstimate{p, std::sqrt(p * (1.0 - p) / double(samples))};
}

BerryEsseenEnvelope berry_esseen_envelope(double mean, double var, double t3, long n,
                                          double x, double c) {
  (void)mean;  // callers standardize x against the mean themselves
  if (!(var > 0.0)) throw DegenerateVariance("variance must be positive");
  double sd = std::sqrt(var);
  if (t3 < sd * sd * sd * (1.0 - 1e-12))
    throw Error("third absolute moment below var^(3/2)");
  double dev = c * t3 / (std::sqrt(double(n)) * sd * sd * sd);
  double base = normal_cdf(x / sd);
  return BerryEsseenEnvelope{std::max(0.0, base - dev), std::min(1.0, base + dev)};
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

namespace {

// Acklam's rational approximation, good to ~1e-9; Newton brings it to machine
// precision with the bisection bracket as a safety net.
double quantile_first_guess(double u) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00, 2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double low = 0.02425, high = 1.0 - low;
  if (u < low) {
    double q = std::sqrt(-2.0 * std::log(u));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (u > high) {
    double q = std::sqrt(-2.0 * std::log(1.0 - u));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double q = u - 0.5, r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double normal_quantile(double u) {
  if (u < 0.0 || u > 1.0 || std::isnan(u)) throw Error("quantile input outside [0, 1]");
  if (u == 0.0) return -kInf;
  if (u == 1.0) return kInf;
  double lo = -40.0, hi = 40.0;
  double x = quantile_first_guess(u);
  for (int iter = 0; iter < 100; ++iter) {
    double f = normal_cdf(x) - u;
    if (f > 0.0)
      hi = std::min(hi, x);
    else
      lo = std::max(lo, x);
    double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    double next = pdf > 0.0 ? x - f / pdf : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-15 * std::max(1.0, std::abs(x))) return next;
    x = next;
  }
  return x;
}

}  // namespace qht::ns

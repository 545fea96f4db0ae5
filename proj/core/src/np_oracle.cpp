#include "qht/np_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace qht::oracle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kKernelRelTol = 1e-12;
constexpr double kCrossingCap = 1e15;  // thresholds beyond this are "infinite"

struct SpectralSplit {
  double alpha_plus, beta_plus, kernel_rho, kernel_sigma, pos_part;
};

SpectralSplit split_test(const Matrix& rho, const Matrix& sigma, double t) {
  Matrix m = t * rho - sigma;
  m = 0.5 * (m + m.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
  const auto& w = solver.eigenvalues();
  const Matrix& v = solver.eigenvectors();
  double ztol = kKernelRelTol * std::max(1.0, w.cwiseAbs().maxCoeff());

  SpectralSplit s{1.0, 0.0, 0.0, 0.0, 0.0};
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (std::abs(w[i]) <= ztol && t > 0.0) {
      linalg::Vector col = v.col(i);
      s.kernel_rho += (col.adjoint() * rho * col)(0, 0).real();
      s.kernel_sigma += (col.adjoint() * sigma * col)(0, 0).real();
    } else if (w[i] > ztol) {
      linalg::Vector col = v.col(i);
      s.alpha_plus -= (col.adjoint() * rho * col)(0, 0).real();
      s.beta_plus += (col.adjoint() * sigma * col)(0, 0).real();
      s.pos_part += w[i];
    }
  }
  s.alpha_plus = std::clamp(s.alpha_plus, 0.0, 1.0);
  s.beta_plus = std::clamp(s.beta_plus, 0.0, 1.0);
  s.kernel_rho = std::max(0.0, s.kernel_rho);
  s.kernel_sigma = std::max(0.0, s.kernel_sigma);
  return s;
}

// Lower convex envelope in the (alpha, beta) plane, alpha ascending.
std::vector<FrontierPoint> lower_hull(std::vector<FrontierPoint> pts) {
  std::sort(pts.begin(), pts.end(), [](const FrontierPoint& a, const FrontierPoint& b) {
    return a.alpha != b.alpha ? a.alpha < b.alpha : a.beta < b.beta;
  });
  std::vector<FrontierPoint> hull;
  for (const FrontierPoint& p : pts) {
    if (!hull.empty() && p.alpha == hull.back().alpha) continue;  // keep lowest beta
    while (hull.size() >= 2) {
      const FrontierPoint& a = hull[hull.size() - 2];
      const FrontierPoint& b = hull[hull.size() - 1];
      double cross = (b.alpha - a.alpha) * (p.beta - a.beta) -
                     (p.alpha - a.alpha) * (b.beta - a.beta);
      if (cross <= 0.0)
        hull.pop_back();
      else
        break;
    }
    hull.push_back(p);
  }
  return hull;
}

struct HullQuery {
  double value;
  FrontierPoint left, right;  // active segment endpoints (equal on a vertex hit)
};

HullQuery beta_at(const std::vector<FrontierPoint>& hull, double eps) {
  if (hull.empty()) throw Error("empty frontier");
  if (eps <= hull.front().alpha)
    return {hull.front().beta, hull.front(), hull.front()};
  for (std::size_t i = 0; i + 1 < hull.size(); ++i) {
    if (eps <= hull[i + 1].alpha) {
      double span = hull[i + 1].alpha - hull[i].alpha;
      double theta = span > 0.0 ? (eps - hull[i].alpha) / span : 0.0;
      return {hull[i].beta + theta * (hull[i + 1].beta - hull[i].beta), hull[i],
              hull[i + 1]};
    }
  }
  return {hull.back().beta, hull.back(), hull.back()};
}

HullQuery alpha_at(const std::vector<FrontierPoint>& hull, double beta_budget) {
  // beta is nonincreasing along the hull, so scan for the first segment that
  // reaches the budget.
  if (hull.empty()) throw Error("empty frontier");
  if (beta_budget >= hull.front().beta)
    return {hull.front().alpha, hull.front(), hull.front()};
  for (std::size_t i = 0; i + 1 < hull.size(); ++i) {
    if (beta_budget >= hull[i + 1].beta) {
      double span = hull[i + 1].beta - hull[i].beta;
      double theta = span != 0.0 ? (beta_budget - hull[i].beta) / span : 0.0;
      return {hull[i].alpha + theta * (hull[i + 1].alpha - hull[i].alpha), hull[i],
              hull[i + 1]};
    }
  }
  return {hull.back().alpha, hull.back(), hull.back()};
}

}  // namespace

NpTestResult np_test(const DensityMatrix& rho_n, const DensityMatrix& sigma_n,
                     double t) {
  if (!(t >= 0.0)) throw Error("np_test needs t >= 0");
  if (rho_n.dim() != sigma_n.dim()) throw Error("state dimensions differ");
  Matrix m = t * rho_n.mat() - sigma_n.mat();
  m = 0.5 * (m + m.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
  const auto& w = solver.eigenvalues();
  double ztol = kKernelRelTol * std::max(1.0, w.cwiseAbs().maxCoeff());

  Matrix p = Matrix::Zero(rho_n.dim(), rho_n.dim());
  double alpha = 1.0, beta = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w[i] > ztol) {
      linalg::Vector col = solver.eigenvectors().col(i);
      p += col * col.adjoint();
      alpha -= (col.adjoint() * rho_n.mat() * col)(0, 0).real();
      beta += (col.adjoint() * sigma_n.mat() * col)(0, 0).real();
    }
  }
  return NpTestResult{std::clamp(alpha, 0.0, 1.0), std::clamp(beta, 0.0, 1.0),
                      std::move(p)};
}

NpOracle::NpOracle(const DensityMatrix& rho_n, const DensityMatrix& sigma_n)
    : rho_(rho_n.mat()), sigma_(sigma_n.mat()) {
  if (rho_.rows() != sigma_.rows()) throw Error("state dimensions differ");
  seed_candidates();
}

void NpOracle::seed_candidates() {
  // Sign changes of t*rho - sigma happen exactly at the inverse eigenvalues
  // of sigma^(-1/2) rho sigma^(-1/2).
  Eigen::SelfAdjointEigenSolver<Matrix> sig(sigma_);
  linalg::RealVector inv_sqrt(sig.eigenvalues().size());
  for (Eigen::Index i = 0; i < inv_sqrt.size(); ++i)
    inv_sqrt[i] = 1.0 / std::sqrt(std::max(sig.eigenvalues()[i], linalg::kEigenFloor));
  Matrix whitener =
      sig.eigenvectors() * inv_sqrt.asDiagonal() * sig.eigenvectors().adjoint();
  Matrix pencil = whitener * rho_ * whitener;
  pencil = 0.5 * (pencil + pencil.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> pen(pencil, Eigen::EigenvaluesOnly);

  std::vector<double> ts;
  for (Eigen::Index i = 0; i < pen.eigenvalues().size(); ++i) {
    double w = pen.eigenvalues()[i];
    if (w > 1.0 / kCrossingCap) ts.push_back(1.0 / w);
  }
  std::sort(ts.begin(), ts.end());
  for (double t : ts) {
    if (crossings_.empty() || t > crossings_.back() * (1.0 + 1e-9))
      crossings_.push_back(t);
  }

  evaluate(0.0);
  for (std::size_t i = 0; i < crossings_.size(); ++i) {
    evaluate(crossings_[i]);
    if (i + 1 < crossings_.size())
      evaluate(0.5 * (crossings_[i] + crossings_[i + 1]));
  }
  if (!crossings_.empty()) {
    evaluate(0.5 * crossings_.front());
    evaluate(2.0 * crossings_.back());
  }
}

const NpOracle::Eval& NpOracle::evaluate(double t) {
  auto it = cache_.find(t);
  if (it != cache_.end()) return it->second;
  SpectralSplit s = split_test(rho_, sigma_, t);
  return cache_
      .emplace(t, Eval{s.alpha_plus, s.beta_plus, s.kernel_rho, s.kernel_sigma,
                       s.pos_part})
      .first->second;
}

std::vector<FrontierPoint> NpOracle::all_points() const {
  std::vector<FrontierPoint> pts;
  pts.reserve(cache_.size() * 2 + 2);
  for (const auto& [t, e] : cache_) {
    pts.push_back({t, e.alpha_plus, e.beta_plus});
    if (e.kernel_rho > 0.0 || e.kernel_sigma > 0.0) {
      pts.push_back({t, std::clamp(e.alpha_plus - e.kernel_rho, 0.0, 1.0),
                     std::clamp(e.beta_plus + e.kernel_sigma, 0.0, 1.0)});
    }
  }
  // Reject-all and accept-all are always available.
  pts.push_back({0.0, 1.0, 0.0});
  pts.push_back({kInf, 0.0, 1.0});
  return pts;
}

double NpOracle::dual_value(double t, double eps) const {
  const Eval& e = cache_.at(t);
  return t * (1.0 - eps) - e.pos_part;
}

void NpOracle::ensure_alpha_coverage(double eps) {
  double target = std::max(0.25 * eps, 1e-15);
  double t = crossings_.empty() ? 1.0 : crossings_.back();
  for (int round = 0; round < 60; ++round) {
    double best = 1.0;
    for (const auto& [key, e] : cache_)
      best = std::min(best, std::clamp(e.alpha_plus - e.kernel_rho, 0.0, 1.0));
    if (best <= target) return;
    t *= 16.0;
    if (t > 1e18) return;  // fall back to the accept-all endpoint
    evaluate(t);
  }
}

BetaCertificate NpOracle::beta_of_epsilon(double eps, double tol, int max_iter) {
  if (!(eps > 0.0 && eps < 1.0)) throw Error("eps must lie in (0, 1)");
  ensure_alpha_coverage(eps);

  double gap = kInf;
  for (int iter = 0; iter < max_iter; ++iter) {
    std::vector<FrontierPoint> hull = lower_hull(all_points());
    HullQuery q = beta_at(hull, eps);
    double best_cert = 0.0;
    for (const auto& [t, e] : cache_)
      best_cert = std::max(best_cert, dual_value(t, eps));
    gap = q.value - best_cert;
    if (gap <= tol) {
      worst_gap_ = std::max(worst_gap_, std::max(gap, 0.0));
      return BetaCertificate{q.value, best_cert, gap};
    }

    // Primal refinement: split the active hull segment in threshold space.
    bool advanced = false;
    if (std::isfinite(q.left.t) && std::isfinite(q.right.t) &&
        q.left.t != q.right.t) {
      double mid = 0.5 * (q.left.t + q.right.t);
      advanced = cache_.find(mid) == cache_.end();
      evaluate(mid);
    }
    // Dual refinement: golden steps around the best certified threshold.
    double best_t = 0.0;
    for (const auto& [t, e] : cache_)
      if (dual_value(t, eps) >= dual_value(best_t, eps)) best_t = t;
    auto it = cache_.find(best_t);
    double lo = it == cache_.begin() ? 0.5 * best_t : std::prev(it)->first;
    auto next = std::next(it);
    double hi = next == cache_.end() ? (best_t > 0.0 ? 2.0 * best_t : 1.0)
                                     : next->first;
    for (double frac : {0.381966, 0.618034}) {
      double cand = lo + frac * (hi - lo);
      if (cache_.find(cand) == cache_.end()) {
        evaluate(cand);
        advanced = true;
      }
    }
    if (!advanced) break;  // nothing new to evaluate; gap will not move
  }
  throw ToleranceNotReached(gap, tol);
}

double NpOracle::alpha_of_beta(double beta_budget, double tol, int max_iter) {
  if (!(beta_budget > 0.0 && beta_budget <= 1.0))
    throw Error("beta budget must lie in (0, 1]");

  double gap = kInf;
  for (int iter = 0; iter < max_iter; ++iter) {
    std::vector<FrontierPoint> hull = lower_hull(all_points());
    HullQuery q = alpha_at(hull, beta_budget);
    double best_cert = 0.0;
    for (const auto& [t, e] : cache_) {
      if (t <= 0.0) continue;
      best_cert = std::max(best_cert, 1.0 - (e.pos_part + beta_budget) / t);
    }
    gap = q.value - best_cert;
    if (gap <= tol) {
      worst_gap_ = std::max(worst_gap_, std::max(gap, 0.0));
      return q.value;
    }

    bool advanced = false;
    if (std::isfinite(q.left.t) && std::isfinite(q.right.t) &&
        q.left.t != q.right.t) {
      double mid = 0.5 * (q.left.t + q.right.t);
      advanced = cache_.find(mid) == cache_.end();
      evaluate(mid);
    }
    double best_t = 0.0, best_val = -kInf;
    for (const auto& [t, e] : cache_) {
      if (t <= 0.0) continue;
      double val = 1.0 - (e.pos_part + beta_budget) / t;
      if (val > best_val) {
        best_val = val;
        best_t = t;
      }
    }
    auto it = cache_.find(best_t);
    if (it != cache_.end()) {
      double lo = it == cache_.begin() ? 0.5 * best_t : std::prev(it)->first;
      auto next = std::next(it);
      double hi = next == cache_.end() ? 2.0 * best_t : next->first;
      for (double frac : {0.381966, 0.618034}) {
        double cand = lo + frac * (hi - lo);
        if (cand > 0.0 && cache_.find(cand) == cache_.end()) {
          evaluate(cand);
          advanced = true;
        }
      }
    }
    if (!advanced) break;
  }
  throw ToleranceNotReached(gap, tol);
}

TradeoffCurve NpOracle::curve() const {
  TradeoffCurve c;
  c.points = all_points();
  c.hull = lower_hull(c.points);
  c.dual_gap = worst_gap_;
  return c;
}

BetaCertificate beta_of_epsilon(const StatePair& p, long n, double eps, double tol,
                                std::int64_t dim_budget) {
  NpOracle oracle(linalg::kron_power(p.rho(), n, dim_budget),
                  linalg::kron_power(p.sigma(), n, dim_budget));
  return oracle.beta_of_epsilon(eps, tol);
}

double classical_np(const Eigen::VectorXd& lambda, const Eigen::VectorXd& mu,
                    double eps) {
  if (lambda.size() != mu.size()) throw Error("distributions differ in size");
  if (!(eps > 0.0 && eps < 1.0)) throw Error("eps must lie in (0, 1)");
  std::vector<Eigen::Index> idx(std::size_t(lambda.size()));
  std::iota(idx.begin(), idx.end(), 0);
  // Descending likelihood ratio via cross-multiplication, so mu = 0 needs no
  // special casing.
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    return lambda[a] * mu[b] > lambda[b] * mu[a];
  });
  double target = 1.0 - eps, acc = 0.0, beta = 0.0;
  for (Eigen::Index i : idx) {
    if (lambda[i] <= 0.0) break;  // remaining atoms carry no type-I budget
    if (acc + lambda[i] >= target) {
      beta += (target - acc) / lambda[i] * mu[i];
      return beta;
    }
    acc += lambda[i];
    beta += mu[i];
  }
  return beta;
}

namespace {

// Atom of the paired log-ratio walk: value z = log(lambda/mu), p is the
// lambda-mass, q the mu-mass. Both masses ride through the convolution so
// beta needs no reconstruction from z.
struct PairedAtom {
  double z, p, q;
};

std::vector<PairedAtom> merge_paired(std::vector<PairedAtom> raw) {
  std::sort(raw.begin(), raw.end(),
            [](const PairedAtom& a, const PairedAtom& b) { return a.z < b.z; });
  std::vector<PairedAtom> out;
  out.reserve(raw.size());
  double wz = 0.0, wp = 0.0, wq = 0.0, wsum = 0.0;
  bool open = false;
  auto flush = [&] {
    if (open && wsum > 0.0) out.push_back({wz / wsum, wp, wq});
    open = false;
  };
  for (const PairedAtom& a : raw) {
    double wt = a.p + a.q;
    if (wt == 0.0) continue;
    bool fits = open && std::abs(a.z - wz / wsum) <=
                            ns::kAtomMergeTol + ns::kAtomMergeTol * std::abs(wz / wsum);
    if (!fits) {
      flush();
      wz = wp = wq = wsum = 0.0;
      open = true;
    }
    wz += wt * a.z;
    wsum += wt;
    wp += a.p;
    wq += a.q;
  }
  flush();
  return out;
}

std::vector<PairedAtom> convolve_paired(const std::vector<PairedAtom>& a,
                                        const std::vector<PairedAtom>& b,
                                        long max_atoms) {
  std::int64_t raw_count = std::int64_t(a.size()) * std::int64_t(b.size());
  if (raw_count > std::max<std::int64_t>(max_atoms, 16'000'000))
    throw AtomBudgetExceeded(raw_count, max_atoms);
  std::vector<PairedAtom> raw;
  raw.reserve(std::size_t(raw_count));
  for (const PairedAtom& ai : a)
    for (const PairedAtom& bj : b)
      raw.push_back({ai.z + bj.z, ai.p * bj.p, ai.q * bj.q});
  auto merged = merge_paired(std::move(raw));
  if (std::int64_t(merged.size()) > max_atoms)
    throw AtomBudgetExceeded(merged.size(), max_atoms);
  return merged;
}

}  // namespace

double classical_np_pow(const Eigen::VectorXd& lambda, const Eigen::VectorXd& mu,
                        long n, double eps, long max_atoms) {
  if (lambda.size() != mu.size()) throw Error("distributions differ in size");
  if (!(eps > 0.0 && eps < 1.0)) throw Error("eps must lie in (0, 1)");
  if (n < 1) throw Error("classical_np_pow needs n >= 1");

  std::vector<PairedAtom> base;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda[i] <= 0.0) continue;  // never accepted by an optimal test
    double z = mu[i] > 0.0 ? std::log(lambda[i]) - std::log(mu[i]) : kInf;
    base.push_back({z, lambda[i], mu[i]});
  }
  base = merge_paired(std::move(base));

  std::vector<PairedAtom> result, square = base;
  long k = n;
  bool have = false;
  while (k > 0) {
    if (k & 1) {
      result = have ? convolve_paired(result, square, max_atoms) : square;
      have = true;
    }
    k >>= 1;
    if (k > 0) square = convolve_paired(square, square, max_atoms);
  }

  std::sort(result.begin(), result.end(),
            [](const PairedAtom& a, const PairedAtom& b) { return a.z > b.z; });
  double target = 1.0 - eps, acc = 0.0, beta = 0.0;
  for (const PairedAtom& a : result) {
    if (a.p <= 0.0) continue;
    if (acc + a.p >= target) {
      beta += (target - acc) / a.p * a.q;
      return beta;
    }
    acc += a.p;
    beta += a.q;
  }
  return beta;
}

}  // namespace qht::oracle

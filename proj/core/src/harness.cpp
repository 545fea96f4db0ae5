#include "qht/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qht/achievability.hpp"
#include "qht/errors.hpp"
#include "qht/np_oracle.hpp"
#include "qht/ns_classical.hpp"
#include "qht/optimality.hpp"

namespace qht::harness {

using json = nlohmann::json;

namespace {

constexpr const char* kCsvColumns[] = {
    "pair_id", "mode",  "n",   "eps", "e2",    "quantity",
    "value",   "lower", "upper", "certificate", "gap",
    "lower_applicable", "upper_applicable", "d", "v", "t3", "source", "note"};

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

std::string cell(const std::optional<double>& v) {
  return v ? fmt_double(*v) : std::string();
}
std::string cell(const std::optional<long>& v) {
  return v ? std::to_string(*v) : std::string();
}
std::string cell(const std::optional<bool>& v) {
  return v ? (*v ? std::string("true") : std::string("false")) : std::string();
}

double knob(const ExperimentConfig& cfg, const std::string& key, double fallback) {
  auto it = cfg.tolerances.find(key);
  return it == cfg.tolerances.end() ? fallback : it->second;
}

std::string pair_id_from_path(const std::string& path) {
  if (path.empty()) return "anonymous";
  return std::filesystem::path(path).stem().string();
}

// Collects check outcomes across a sweep; failures carry a description.
struct CheckLog {
  long total = 0;
  std::vector<std::string> failures;

  void check(bool ok, const std::string& what) {
    ++total;
    if (!ok) failures.push_back(what);
  }
};

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double ms() const {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - start)
        .count();
  }
};

ResultRow base_row(const std::string& pair_id, Mode mode, std::string quantity,
                   std::string source) {
  ResultRow r;
  r.pair_id = pair_id;
  r.mode = to_string(mode);
  r.quantity = std::move(quantity);
  r.source = std::move(source);
  return r;
}

linalg::Matrix parse_complex_matrix(const json& jm, Eigen::Index dim,
                                    const std::string& name) {
  auto entry = [&](const json& je, Eigen::Index row, Eigen::Index col) {
    if (je.is_number()) return linalg::Complex(je.get<double>(), 0.0);
    if (je.is_array() && je.size() == 2 && je[0].is_number() && je[1].is_number())
      return linalg::Complex(je[0].get<double>(), je[1].get<double>());
    throw ParseError(name + "(" + std::to_string(row) + "," + std::to_string(col) +
                     "): expected [re, im] or a real number");
  };
  if (!jm.is_array()) throw ParseError(name + ": expected an array");
  linalg::Matrix m(dim, dim);
  const auto total = static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim);
  // Accept either a flat row-major list or a list of rows.
  const bool nested = !jm.empty() && jm[0].is_array() &&
                      !(jm[0].size() == 2 && jm[0][0].is_number());
  if (nested) {
    if (jm.size() != static_cast<std::size_t>(dim))
      throw ParseError(name + ": expected " + std::to_string(dim) + " rows, got " +
                       std::to_string(jm.size()));
    for (Eigen::Index i = 0; i < dim; ++i) {
      const json& row = jm[static_cast<std::size_t>(i)];
      if (!row.is_array() || row.size() != static_cast<std::size_t>(dim))
        throw ParseError(name + " row " + std::to_string(i) + ": expected " +
                         std::to_string(dim) + " entries");
      for (Eigen::Index j = 0; j < dim; ++j)
        m(i, j) = entry(row[static_cast<std::size_t>(j)], i, j);
    }
  } else {
    if (jm.size() != total)
      throw ParseError(name + ": expected " + std::to_string(total) +
                       " row-major entries, got " + std::to_string(jm.size()));
    for (Eigen::Index i = 0; i < dim; ++i)
      for (Eigen::Index j = 0; j < dim; ++j)
        m(i, j) = entry(jm[static_cast<std::size_t>(i * dim + j)], i, j);
  }
  return m;
}

// Appends human-readable messages for every state invariant `m` violates.
void collect_state_violations(const linalg::Matrix& m, const std::string& name,
                              bool require_full_rank,
                              std::vector<std::string>& out) {
  const double herm_dev = (m - m.adjoint()).cwiseAbs().maxCoeff();
  if (herm_dev > linalg::kHermitianTol)
    out.push_back(name + ": not hermitian (max |M - M^dag| = " + fmt_double(herm_dev) +
                  ", tol " + fmt_double(linalg::kHermitianTol) + ")");
  const linalg::Matrix h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<linalg::Matrix> es(h, Eigen::EigenvaluesOnly);
  const double min_eig = es.eigenvalues().minCoeff();
  if (min_eig < -linalg::kPsdTol)
    out.push_back(name + ": negative eigenvalue " + fmt_double(min_eig) + " (tol " +
                  fmt_double(linalg::kPsdTol) + ")");
  const linalg::Complex tr = m.trace();
  if (std::abs(tr.real() - 1.0) > linalg::kTraceTol ||
      std::abs(tr.imag()) > linalg::kTraceTol)
    out.push_back(name + ": trace " + fmt_double(tr.real()) + " + " +
                  fmt_double(tr.imag()) + "i deviates from 1 (tol " +
                  fmt_double(linalg::kTraceTol) + ")");
  if (require_full_rank && min_eig <= divergences::kSigmaFullRankTol)
    out.push_back(name + ": smallest eigenvalue " + fmt_double(min_eig) +
                  " <= " + fmt_double(divergences::kSigmaFullRankTol) +
                  " (full rank required)");
}

}  // namespace

Mode mode_from_string(const std::string& s) {
  if (s == "divergences") return Mode::divergences;
  if (s == "achievability") return Mode::achievability;
  if (s == "oracle") return Mode::oracle;
  if (s == "bounds") return Mode::bounds;
  if (s == "sweep") return Mode::sweep;
  if (s == "selftest") return Mode::selftest;
  throw ParseError("unknown mode: " + s);
}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::divergences: return "divergences";
    case Mode::achievability: return "achievability";
    case Mode::oracle: return "oracle";
    case Mode::bounds: return "bounds";
    case Mode::sweep: return "sweep";
    case Mode::selftest: return "selftest";
  }
  throw Error("invalid mode value");
}

divergences::StatePair load_state_pair(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open state pair file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError("invalid JSON in " + path + ": " + e.what());
  }
  if (!doc.is_object()) throw ParseError(path + ": expected a JSON object");
  for (const char* key : {"dim", "rho", "sigma"})
    if (!doc.contains(key)) throw ParseError(path + ": missing field '" + key + "'");
  if (!doc["dim"].is_number_integer())
    throw ParseError(path + ": 'dim' must be an integer");
  const auto dim = doc["dim"].get<Eigen::Index>();
  if (dim < 1) throw ParseError(path + ": 'dim' must be >= 1");

  const linalg::Matrix rho_m = parse_complex_matrix(doc["rho"], dim, "rho");
  const linalg::Matrix sigma_m = parse_complex_matrix(doc["sigma"], dim, "sigma");

  std::vector<std::string> violations;
  collect_state_violations(rho_m, "rho", false, violations);
  collect_state_violations(sigma_m, "sigma", true, violations);
  if (!violations.empty()) throw InvariantViolation(violations);

  return divergences::StatePair(
      linalg::DensityMatrix(linalg::HermitianMatrix(rho_m)),
      linalg::DensityMatrix(linalg::HermitianMatrix(sigma_m)));
}

void save_state_pair(const std::string& path, const divergences::StatePair& p) {
  json doc;
  doc["dim"] = p.dim();
  auto flatten = [](const linalg::Matrix& m) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        arr.push_back({m(i, j).real(), m(i, j).imag()});
    return arr;
  };
  doc["rho"] = flatten(p.rho().mat());
  doc["sigma"] = flatten(p.sigma().mat());
  std::ofstream out(path);
  if (!out) throw Error("cannot write state pair file: " + path);
  out << doc.dump(2) << '\n';
}

namespace {

void run_divergences(const divergences::StatePair& p, const std::string& pair_id,
                     std::vector<ResultRow>& rows, CheckLog& checks) {
  Timer timer;
  const auto rep = divergences::divergence_report(p);
  const auto verdict = divergences::classify_degenerate(p);

  auto stat_row = [&](const char* quantity, double value, const char* source) {
    ResultRow r = base_row(pair_id, Mode::divergences, quantity, source);
    r.value = value;
    r.d = rep.relative_entropy;
    r.v = rep.relative_variance;
    r.t3 = rep.third_abs_moment;
    r.runtime_ms = timer.ms();
    rows.push_back(std::move(r));
  };
  stat_row("relative_entropy", rep.relative_entropy, "divergences.relative_entropy");
  stat_row("relative_variance", rep.relative_variance, "divergences.relative_variance");
  stat_row("third_abs_moment", rep.third_abs_moment, "divergences.third_abs_moment");

  ResultRow r = base_row(pair_id, Mode::divergences, "degenerate",
                         "divergences.classify_degenerate");
  r.value = verdict.degenerate ? 1.0 : 0.0;
  if (verdict.k) r.note = "k=" + fmt_double(*verdict.k);
  r.runtime_ms = timer.ms();
  rows.push_back(std::move(r));

  checks.check(rep.relative_entropy >= -1e-12, "relative entropy negative");
  checks.check(rep.relative_variance >= -1e-12, "relative variance negative");
  checks.check(rep.third_abs_moment >= -1e-12, "third absolute moment negative");
  if (verdict.degenerate)
    checks.check(rep.relative_variance <= 1e-9,
                 "degenerate pair with nonzero relative variance");
}

void run_bounds(const divergences::StatePair& p, const std::string& pair_id,
                const ExperimentConfig& cfg, std::vector<ResultRow>& rows,
                CheckLog& checks) {
  const auto rep = divergences::divergence_report(p);
  for (long n : cfg.n_values) {
    for (double eps : cfg.eps_values) {
      Timer timer;
      ResultRow r = base_row(pair_id, Mode::bounds, "neg_log_beta_bounds",
                             "bounds.finite_sample_bounds");
      r.n = n;
      r.eps = eps;
      r.d = rep.relative_entropy;
      r.v = rep.relative_variance;
      r.t3 = rep.third_abs_moment;
      if (rep.relative_variance <= bounds::kDegenerateVarianceTol) {
        r.note = "degenerate pair: finite-n bounds need V > 0";
        r.runtime_ms = timer.ms();
        rows.push_back(std::move(r));
        continue;
      }
      const auto fb = bounds::finite_sample_bounds_from_stats(
          rep.relative_entropy, rep.relative_variance, rep.third_abs_moment, n, eps,
          cfg.c);
      r.lower = fb.lower;
      r.upper = fb.upper;
      r.lower_applicable = fb.lower.has_value();
      r.upper_applicable = fb.upper.has_value();
      r.runtime_ms = timer.ms();
      if (fb.lower && fb.upper)
        checks.check(*fb.lower <= *fb.upper + 1e-9,
                     "bounds cross at n=" + std::to_string(n) +
                         " eps=" + fmt_double(eps));
      rows.push_back(std::move(r));
    }
  }
}

void run_oracle(const divergences::StatePair& p, const std::string& pair_id,
                const ExperimentConfig& cfg, std::vector<ResultRow>& rows,
                CheckLog& checks) {
  const auto dim_budget =
      static_cast<std::int64_t>(knob(cfg, "dim_budget", linalg::kDefaultDimBudget));
  const double gap_tol = knob(cfg, "oracle_gap", oracle::kDefaultGapTol);
  // Budget violations propagate here; only the joint sweep degrades to notes.
  for (long n : cfg.n_values) {
    const auto rho_n = linalg::kron_power(p.rho(), n, dim_budget);
    const auto sigma_n = linalg::kron_power(p.sigma(), n, dim_budget);
    oracle::NpOracle np(rho_n, sigma_n);
    for (double eps : cfg.eps_values) {
      Timer timer;
      ResultRow r =
          base_row(pair_id, Mode::oracle, "beta_eps", "oracle.beta_of_epsilon");
      r.n = n;
      r.eps = eps;
      try {
        const auto bc = np.beta_of_epsilon(eps, gap_tol);
        r.value = bc.beta;
        r.certificate = bc.certificate;
        r.gap = bc.gap;
        checks.check(bc.gap >= -1e-12 && bc.gap <= gap_tol + 1e-15,
                     "oracle gap not certified at n=" + std::to_string(n) +
                         " eps=" + fmt_double(eps));
        checks.check(bc.beta >= -1e-15 && bc.beta <= 1.0 + 1e-12,
                     "oracle beta outside [0,1]");
      } catch (const ToleranceNotReached& e) {
        r.note = e.what();
        checks.check(false, "oracle tolerance not reached at n=" +
                                std::to_string(n) + " eps=" + fmt_double(eps));
      }
      r.runtime_ms = timer.ms();
      rows.push_back(std::move(r));
    }
  }
}

void run_achievability(const divergences::StatePair& p, const std::string& pair_id,
                       const ExperimentConfig& cfg, std::vector<ResultRow>& rows,
                       CheckLog& checks) {
  const auto dim_budget =
      static_cast<std::int64_t>(knob(cfg, "dim_budget", linalg::kDefaultDimBudget));
  const auto max_atoms =
      static_cast<long>(knob(cfg, "max_atoms", ns::kDefaultMaxAtoms));
  const auto llr = ns::llr_atoms(ns::build_ns_joint(p));
  for (long n : cfg.n_values) {
    // n-copy ratio distribution backs the alpha consistency check.
    std::optional<ns::LLRDistribution> dist_n;
    try {
      dist_n = ns::convolve_n(llr, n, max_atoms);
    } catch (const AtomBudgetExceeded&) {
      dist_n.reset();
    }
    for (double e2 : cfg.e2_values) {
      Timer timer;
      ResultRow ra = base_row(pair_id, Mode::achievability, "achievability_alpha",
                              "achievability.build_test");
      ra.n = n;
      ra.e2 = e2;
      const auto t = achievability::build_test(p, n, e2, 0.0, dim_budget);
      ra.value = t.alpha;
      if (t.all_reject) ra.note = "all_reject";
      ra.runtime_ms = timer.ms();

      ResultRow rb = base_row(pair_id, Mode::achievability, "achievability_beta",
                              "achievability.build_test");
      rb.n = n;
      rb.e2 = e2;
      rb.value = t.beta;
      rb.note = "log_l=" + fmt_double(t.threshold.log_l);
      rb.runtime_ms = timer.ms();

      checks.check(t.alpha >= -1e-12 && t.alpha <= 1.0 + 1e-12,
                   "alpha outside [0,1]");
      checks.check(t.beta >= -1e-12 && t.beta <= 1.0 + 1e-12,
                   "beta outside [0,1]");
      checks.check(t.beta <= std::exp(-t.threshold.log_l) * (1.0 + 1e-9) + 1e-300,
                   "beta exceeds exp(-log_l) at n=" + std::to_string(n) +
                       " e2=" + fmt_double(e2));
      if (dist_n) {
        const double tail =
            ns::tail_prob(*dist_n, t.threshold.log_l, ns::TailSide::below);
        checks.check(t.alpha <= tail + 1e-9,
                     "alpha exceeds the low-ratio mass at n=" + std::to_string(n) +
                         " e2=" + fmt_double(e2));
      }
      rows.push_back(std::move(ra));
      rows.push_back(std::move(rb));
    }
  }
}

void run_joint_sweep(const divergences::StatePair& p, const std::string& pair_id,
                     const ExperimentConfig& cfg, std::vector<ResultRow>& rows,
                     CheckLog& checks) {
  const auto dim_budget =
      static_cast<std::int64_t>(knob(cfg, "dim_budget", linalg::kDefaultDimBudget));
  const auto max_atoms =
      static_cast<long>(knob(cfg, "max_atoms", ns::kDefaultMaxAtoms));
  const double gap_tol = knob(cfg, "oracle_gap", oracle::kDefaultGapTol);
  const auto rep = divergences::divergence_report(p);
  const double sqrt_v = std::sqrt(std::max(rep.relative_variance, 0.0));

  for (long n : cfg.n_values) {
    const bool dim_ok = linalg::pow_dim(p.dim(), n, dim_budget) <= dim_budget;
    std::optional<oracle::NpOracle> np;
    if (dim_ok)
      np.emplace(linalg::kron_power(p.rho(), n, dim_budget),
                 linalg::kron_power(p.sigma(), n, dim_budget));

    for (double eps : cfg.eps_values) {
      Timer timer;

      // Finite-n bounds always emit; they need only the scalar statistics.
      ResultRow rbound = base_row(pair_id, Mode::sweep, "neg_log_beta_bounds",
                                  "bounds.finite_sample_bounds");
      rbound.n = n;
      rbound.eps = eps;
      rbound.d = rep.relative_entropy;
      rbound.v = rep.relative_variance;
      rbound.t3 = rep.third_abs_moment;
      std::optional<bounds::FiniteNBounds> fb;
      if (rep.relative_variance > bounds::kDegenerateVarianceTol) {
        fb = bounds::finite_sample_bounds_from_stats(
            rep.relative_entropy, rep.relative_variance, rep.third_abs_moment, n,
            eps, cfg.c);
        rbound.lower = fb->lower;
        rbound.upper = fb->upper;
        rbound.lower_applicable = fb->lower.has_value();
        rbound.upper_applicable = fb->upper.has_value();
        if (fb->lower && fb->upper)
          checks.check(*fb->lower <= *fb->upper + 1e-9,
                       "bounds cross at n=" + std::to_string(n) +
                           " eps=" + fmt_double(eps));
      } else {
        rbound.note = "degenerate pair: finite-n bounds need V > 0";
      }
      rbound.runtime_ms = timer.ms();
      rows.push_back(std::move(rbound));

      if (!dim_ok) {
        ResultRow r =
            base_row(pair_id, Mode::sweep, "beta_eps", "oracle.beta_of_epsilon");
        r.n = n;
        r.eps = eps;
        r.note = "dim budget exceeded: dim^" + std::to_string(n) + " > " +
                 std::to_string(dim_budget);
        rows.push_back(std::move(r));
        continue;
      }

      // Exact optimum with a dual certificate.
      ResultRow roracle =
          base_row(pair_id, Mode::sweep, "beta_eps", "oracle.beta_of_epsilon");
      roracle.n = n;
      roracle.eps = eps;
      double beta_star = std::numeric_limits<double>::quiet_NaN();
      double cert = std::numeric_limits<double>::quiet_NaN();
      try {
        const auto bc = np->beta_of_epsilon(eps, gap_tol);
        beta_star = bc.beta;
        cert = bc.certificate;
        roracle.value = bc.beta;
        roracle.certificate = bc.certificate;
        roracle.gap = bc.gap;
        checks.check(bc.gap >= -1e-12 && bc.gap <= gap_tol + 1e-15,
                     "oracle gap not certified at n=" + std::to_string(n) +
                         " eps=" + fmt_double(eps));
      } catch (const ToleranceNotReached& e) {
        roracle.note = e.what();
        checks.check(false, "oracle tolerance not reached at n=" +
                                std::to_string(n) + " eps=" + fmt_double(eps));
      }
      roracle.runtime_ms = timer.ms();
      rows.push_back(std::move(roracle));
      if (!std::isfinite(beta_star) || beta_star <= 0.0 || beta_star >= 1.0)
        continue;

      const double neg_log_beta = -std::log(beta_star);
      // The exact optimum must sit inside the engaged finite-n bounds. The
      // found beta upper-bounds the true optimum and the certificate lower
      // bounds it, so each side is checked against its safe witness.
      if (fb && fb->lower)
        checks.check(*fb->lower <= neg_log_beta + 1e-9,
                     "lower bound exceeds the exact optimum at n=" +
                         std::to_string(n) + " eps=" + fmt_double(eps));
      if (fb && fb->upper && cert > 0.0)
        checks.check(-std::log(cert) <= *fb->upper + 1e-9,
                     "exact optimum exceeds the upper bound at n=" +
                         std::to_string(n) + " eps=" + fmt_double(eps));

      // Second-order deviation of the exact optimum.
      if (rep.relative_variance > bounds::kDegenerateVarianceTol) {
        ResultRow rres = base_row(pair_id, Mode::sweep, "second_order_residual",
                                  "bounds.second_order_residual");
        rres.n = n;
        rres.eps = eps;
        rres.value = bounds::second_order_residual_from_stats(
            rep.relative_entropy, rep.relative_variance, n, eps, neg_log_beta);
        rres.runtime_ms = timer.ms();
        rows.push_back(std::move(rres));
      }

      // Match the constructed test to the oracle's type-II exponent.
      const double e2_matched =
          (neg_log_beta - static_cast<double>(n) * rep.relative_entropy) /
          std::sqrt(static_cast<double>(n));
      (void)sqrt_v;
      Timer ach_timer;
      try {
        const auto t = achievability::build_test(p, n, e2_matched, 0.0, dim_budget);
        ResultRow ra = base_row(pair_id, Mode::sweep, "achievability_alpha",
                                "achievability.build_test");
        ra.n = n;
        ra.eps = eps;
        ra.e2 = e2_matched;
        ra.value = t.alpha;
        if (t.all_reject) ra.note = "all_reject";
        ra.runtime_ms = ach_timer.ms();
        ResultRow rb = base_row(pair_id, Mode::sweep, "achievability_beta",
                                "achievability.build_test");
        rb.n = n;
        rb.eps = eps;
        rb.e2 = e2_matched;
        rb.value = t.beta;
        rb.runtime_ms = ach_timer.ms();
        checks.check(t.beta <= beta_star * (1.0 + 1e-9) + 1e-300,
                     "constructed beta exceeds the matched optimum at n=" +
                         std::to_string(n) + " eps=" + fmt_double(eps));
        rows.push_back(std::move(ra));
        rows.push_back(std::move(rb));
      } catch (const BudgetExceeded& e) {
        ResultRow ra = base_row(pair_id, Mode::sweep, "achievability_alpha",
                                "achievability.build_test");
        ra.n = n;
        ra.eps = eps;
        ra.e2 = e2_matched;
        ra.note = e.what();
        rows.push_back(std::move(ra));
      }

      // Converse floor at the matched exponent: no test with the oracle's
      // type-II error can have type-I error below it, so it must sit at or
      // below eps.
      Timer conv_timer;
      ResultRow rc = base_row(pair_id, Mode::sweep, "converse_alpha_lower",
                              "optimality.alpha_lower_bound");
      rc.n = n;
      rc.eps = eps;
      rc.e2 = e2_matched;
      try {
        optimality::TailOptions topts;
        topts.max_atoms = max_atoms;
        topts.seed = cfg.seed;
        const auto cb = optimality::alpha_lower_bound(
            p, n, e2_matched, optimality::ConverseParams::optimized_schedule(n),
            topts);
        rc.value = cb.alpha_lower;
        if (cb.tail_std_error) rc.note = "mc std_error=" + fmt_double(*cb.tail_std_error);
        const double mc_slack = cb.tail_std_error ? 5.0 * *cb.tail_std_error : 0.0;
        checks.check(cb.alpha_lower <= eps + 1e-9 + mc_slack,
                     "converse floor exceeds eps at n=" + std::to_string(n) +
                         " eps=" + fmt_double(eps));
      } catch (const AtomBudgetExceeded& e) {
        rc.note = e.what();
      }
      rc.runtime_ms = conv_timer.ms();
      rows.push_back(std::move(rc));
    }
  }
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& cfg) {
  SweepResult res;
  CheckLog checks;

  if (cfg.mode == Mode::selftest) {
    std::ostringstream log;
    res.checks_passed = selftest(cfg.seed, log);
    res.summary = log.str();
    return res;
  }

  if (cfg.state_pair_path.empty())
    throw ParseError("mode " + to_string(cfg.mode) + " requires a state pair file");
  const auto needs = [&](bool cond, const char* flag) {
    if (!cond)
      throw ParseError("mode " + to_string(cfg.mode) + " requires " + flag);
  };
  switch (cfg.mode) {
    case Mode::divergences:
      break;
    case Mode::achievability:
      needs(!cfg.n_values.empty(), "--n");
      needs(!cfg.e2_values.empty(), "--e2");
      break;
    case Mode::oracle:
    case Mode::bounds:
    case Mode::sweep:
      needs(!cfg.n_values.empty(), "--n");
      needs(!cfg.eps_values.empty(), "--eps");
      break;
    case Mode::selftest:
      break;
  }

  const auto p = load_state_pair(cfg.state_pair_path);
  const std::string pair_id = pair_id_from_path(cfg.state_pair_path);

  switch (cfg.mode) {
    case Mode::divergences:
      run_divergences(p, pair_id, res.rows, checks);
      break;
    case Mode::bounds:
      run_bounds(p, pair_id, cfg, res.rows, checks);
      break;
    case Mode::oracle:
      run_oracle(p, pair_id, cfg, res.rows, checks);
      break;
    case Mode::achievability:
      run_achievability(p, pair_id, cfg, res.rows, checks);
      break;
    case Mode::sweep:
      run_joint_sweep(p, pair_id, cfg, res.rows, checks);
      break;
    case Mode::selftest:
      break;
  }

  res.checks_passed = checks.failures.empty();
  std::ostringstream s;
  s << res.rows.size() << " rows, " << checks.total << " checks, "
    << checks.failures.size() << " failed";
  for (const auto& f : checks.failures) s << "\n  check failed: " << f;
  res.summary = s.str();
  return res;
}

std::string to_csv(const std::vector<ResultRow>& rows) {
  std::ostringstream out;
  bool first = true;
  for (const char* col : kCsvColumns) {
    if (!first) out << ',';
    out << col;
    first = false;
  }
  out << '\n';
  for (const auto& r : rows) {
    out << csv_escape(r.pair_id) << ',' << r.mode << ',' << cell(r.n) << ','
        << cell(r.eps) << ',' << cell(r.e2) << ',' << csv_escape(r.quantity) << ','
        << cell(r.value) << ',' << cell(r.lower) << ',' << cell(r.upper) << ','
        << cell(r.certificate) << ',' << cell(r.gap) << ','
        << cell(r.lower_applicable) << ',' << cell(r.upper_applicable) << ','
        << cell(r.d) << ',' << cell(r.v) << ',' << cell(r.t3) << ','
        << csv_escape(r.source) << ',' << csv_escape(r.note) << '\n';
  }
  return out.str();
}

void write_outputs(const ExperimentConfig& cfg, const SweepResult& res) {
  if (cfg.output_path.empty()) throw Error("output path is empty");
  {
    std::ofstream out(cfg.output_path, std::ios::binary);
    if (!out) throw Error("cannot write " + cfg.output_path);
    out << to_csv(res.rows);
  }
  json manifest;
  manifest["version"] = kVersion;
  manifest["mode"] = to_string(cfg.mode);
  manifest["pair_path"] = cfg.state_pair_path;
  manifest["pair_id"] = pair_id_from_path(cfg.state_pair_path);
  manifest["seed"] = cfg.seed;
  manifest["c"] = cfg.c;
  manifest["tolerances"] = cfg.tolerances;
  manifest["n_values"] = cfg.n_values;
  manifest["eps_values"] = cfg.eps_values;
  manifest["e2_values"] = cfg.e2_values;
  manifest["columns"] = json::array();
  for (const char* col : kCsvColumns) manifest["columns"].push_back(col);
  manifest["row_count"] = res.rows.size();
  manifest["checks_passed"] = res.checks_passed;
  const std::string manifest_path = cfg.output_path + ".manifest.json";
  std::ofstream mout(manifest_path, std::ios::binary);
  if (!mout) throw Error("cannot write " + manifest_path);
  mout << manifest.dump(2) << '\n';
}

linalg::DensityMatrix random_density_matrix(Eigen::Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  linalg::Matrix G(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) G(i, j) = linalg::Complex(g(rng), g(rng));
  linalg::Matrix M = G * G.adjoint();
  M /= M.trace().real();
  M = 0.5 * (M + M.adjoint()).eval();
  return linalg::DensityMatrix(linalg::HermitianMatrix(M));
}

divergences::StatePair random_state_pair(Eigen::Index dim, std::mt19937_64& rng) {
  auto rho = random_density_matrix(dim, rng);
  std::normal_distribution<double> g;
  linalg::Matrix G(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) G(i, j) = linalg::Complex(g(rng), g(rng));
  // Ridge keeps sigma safely full rank.
  linalg::Matrix M = G * G.adjoint() +
                     0.1 * linalg::Matrix::Identity(dim, dim);
  M /= M.trace().real();
  M = 0.5 * (M + M.adjoint()).eval();
  auto sigma = linalg::DensityMatrix(linalg::HermitianMatrix(M));
  return divergences::StatePair(std::move(rho), std::move(sigma));
}

namespace {

linalg::Matrix diag2(double a, double b) {
  linalg::Matrix m = linalg::Matrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

divergences::StatePair known_qubit_pair() {
  return divergences::StatePair(
      linalg::DensityMatrix(linalg::HermitianMatrix(diag2(0.5, 0.5))),
      linalg::DensityMatrix(linalg::HermitianMatrix(diag2(0.75, 0.25))));
}

}  // namespace

bool selftest(std::uint64_t seed, std::ostream& log) {
  bool all_ok = true;
  auto run = [&](const char* name, auto&& body) {
    try {
      body();
      log << "[ok] " << name << '\n';
    } catch (const std::exception& e) {
      all_ok = false;
      log << "[FAIL] " << name << ": " << e.what() << '\n';
    }
  };
  auto expect = [](bool cond, const std::string& msg) {
    if (!cond) throw Error(msg);
  };

  run("normal quantile inverts normal cdf", [&] {
    for (double u : {1e-9, 0.01, 0.2, 0.5, 0.8, 0.99, 1.0 - 1e-9}) {
      const double x = ns::normal_quantile(u);
      expect(std::abs(ns::normal_cdf(x) - u) <= 1e-12,
             "roundtrip off at u=" + fmt_double(u));
    }
  });

  run("closed-form qubit statistics", [&] {
    const auto rep = divergences::divergence_report(known_qubit_pair());
    const double l3 = std::log(3.0);
    expect(std::abs(rep.relative_entropy - (std::log(2.0) - 0.5 * l3)) <= 1e-12,
           "relative entropy off");
    expect(std::abs(rep.relative_variance - 0.25 * l3 * l3) <= 1e-12,
           "relative variance off");
    expect(std::abs(rep.third_abs_moment - 0.125 * l3 * l3 * l3) <= 1e-12,
           "third absolute moment off");
  });

  run("classical reduction preserves mean and variance", [&] {
    std::mt19937_64 rng(seed ^ 0x517cc1b727220a95ull);
    const auto p = random_state_pair(3, rng);
    const auto llr = ns::llr_atoms(ns::build_ns_joint(p));
    expect(std::abs(llr.mean() - divergences::quantum_relative_entropy(p)) <= 1e-9,
           "mean != relative entropy");
    expect(std::abs(llr.variance() - divergences::quantum_relative_variance(p)) <=
               1e-9,
           "variance != relative variance");
  });

  run("convolution adds means and variances", [&] {
    const auto llr = ns::llr_atoms(ns::build_ns_joint(known_qubit_pair()));
    const auto d5 = ns::convolve_n(llr, 5);
    expect(std::abs(d5.mean() - 5.0 * llr.mean()) <= 1e-8, "mean not additive");
    expect(std::abs(d5.variance() - 5.0 * llr.variance()) <= 1e-8,
           "variance not additive");
  });

  run("monte carlo tail matches the exact tail", [&] {
    const auto llr = ns::llr_atoms(ns::build_ns_joint(known_qubit_pair()));
    const auto d6 = ns::convolve_n(llr, 6);
    // Offset keeps the threshold strictly between atoms of the convolution,
    // so per-sample rounding cannot straddle it.
    const double th = 6.0 * llr.mean() - 0.05;
    const double exact = ns::tail_prob(d6, th, ns::TailSide::below);
    const auto mc = ns::monte_carlo_tail(llr, 6, th, 20000, seed);
    expect(std::abs(mc.estimate - exact) <= 5.0 * mc.std_error + 1e-3,
           "mc estimate " + fmt_double(mc.estimate) + " vs exact " +
               fmt_double(exact));
  });

  run("constructed test satisfies its contract", [&] {
    std::mt19937_64 rng(seed ^ 0x2545f4914f6cdd1dull);
    const auto p = random_state_pair(2, rng);
    const auto t = achievability::build_test(p, 2, 0.0, 0.0);
    expect(t.alpha >= -1e-12 && t.alpha <= 1.0 + 1e-12, "alpha outside [0,1]");
    expect(t.beta >= -1e-12 && t.beta <= 1.0 + 1e-12, "beta outside [0,1]");
    expect(t.beta <= std::exp(-t.threshold.log_l) + 1e-12, "beta > exp(-log_l)");
    const auto& A = t.A.mat();
    expect((A * A - A).cwiseAbs().maxCoeff() <= achievability::kProjectorTol,
           "A not a projector");
  });

  run("oracle agrees with the classical optimum on commuting states", [&] {
    const auto p = divergences::StatePair(
        linalg::DensityMatrix(linalg::HermitianMatrix(diag2(0.6, 0.4))),
        linalg::DensityMatrix(linalg::HermitianMatrix(diag2(0.3, 0.7))));
    const auto bc = oracle::beta_of_epsilon(p, 2, 0.3, 1e-9);
    Eigen::VectorXd lam(4), mu(4);
    lam << 0.36, 0.24, 0.24, 0.16;
    mu << 0.09, 0.21, 0.21, 0.49;
    const double beta_cl = oracle::classical_np(lam, mu, 0.3);
    expect(std::abs(bc.beta - beta_cl) <= 1e-9,
           "quantum " + fmt_double(bc.beta) + " vs classical " + fmt_double(beta_cl));
  });

  run("projector overlap gap stays within its envelope", [&] {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> g;
    std::uniform_int_distribution<int> rank_of(0, 4);
    for (int trial = 0; trial < 50; ++trial) {
      linalg::Vector phi(4), varphi(4);
      for (Eigen::Index i = 0; i < 4; ++i) {
        phi(i) = linalg::Complex(g(rng), g(rng));
        varphi(i) = linalg::Complex(g(rng), g(rng));
      }
      phi.normalize();
      varphi.normalize();
      const auto basis = linalg::eig_hermitian(
          random_density_matrix(4, rng).hermitian()).vectors;
      const int r = rank_of(rng);
      const linalg::Matrix proj =
          basis.leftCols(r) * basis.leftCols(r).adjoint();
      const double gap = optimality::projector_overlap_gap(phi, varphi, proj);
      const double eps_val =
          std::sqrt(std::max(0.0, 1.0 - (proj * phi).squaredNorm()));
      expect(gap <= 2.0 * std::sqrt(2.0) * eps_val + 1e-9,
             "gap " + fmt_double(gap) + " above envelope at trial " +
                 std::to_string(trial));
    }
  });

  run("finite-n bounds sandwich the classical optimum", [&] {
    const double l3 = std::log(3.0);
    const double d = std::log(2.0) - 0.5 * l3;
    const double v = 0.25 * l3 * l3;
    const double t3 = 0.125 * l3 * l3 * l3;
    Eigen::VectorXd lam(2), mu(2);
    lam << 0.5, 0.5;
    mu << 0.75, 0.25;
    const double beta = oracle::classical_np_pow(lam, mu, 25, 0.4);
    const auto fb = bounds::finite_sample_bounds_from_stats(d, v, t3, 25, 0.4);
    expect(fb.lower.has_value() && fb.upper.has_value(), "bounds not engaged");
    const double nlb = -std::log(beta);
    expect(*fb.lower - 1e-9 <= nlb && nlb <= *fb.upper + 1e-9,
           "optimum " + fmt_double(nlb) + " outside [" + fmt_double(*fb.lower) +
               ", " + fmt_double(*fb.upper) + "]");
  });

  run("asymptotic limit hits all three regimes", [&] {
    const auto p = known_qubit_pair();
    const double d = divergences::quantum_relative_entropy(p);
    const double v = divergences::quantum_relative_variance(p);
    expect(bounds::asymptotic_limit(p, d - 0.05, 0.0).limit_alpha == 0.0,
           "below-D limit not 0");
    expect(bounds::asymptotic_limit(p, d + 0.05, 0.0).limit_alpha == 1.0,
           "above-D limit not 1");
    const auto at = bounds::asymptotic_limit(p, d, 0.3);
    expect(std::abs(at.limit_alpha - ns::normal_cdf(0.3 / std::sqrt(v))) <= 1e-12,
           "at-D limit off");
  });

  run("degenerate classification finds the proportionality constant", [&] {
    const auto same = divergences::StatePair(
        linalg::DensityMatrix(linalg::HermitianMatrix(diag2(0.5, 0.5))),
        linalg::DensityMatrix(linalg::HermitianMatrix(diag2(0.5, 0.5))));
    const auto v1 = divergences::classify_degenerate(same);
    expect(v1.degenerate && v1.k && std::abs(*v1.k - 1.0) <= 1e-9,
           "identical states not recognized");
    const auto v2 = divergences::classify_degenerate(known_qubit_pair());
    expect(!v2.degenerate, "non-degenerate pair misclassified");
  });

  return all_ok;
}

}  // namespace qht::harness

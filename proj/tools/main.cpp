#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "qht/errors.hpp"
#include "qht/harness.hpp"

namespace {

using qht::harness::ExperimentConfig;
using qht::harness::Mode;

// Exit codes: 0 success, 1 failed run-level check or computation invariant,
// 2 malformed input (flags or state pair file), 3 exceeded size budget.
constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kBadInput = 2;
constexpr int kBudget = 3;

void apply_tolerances(ExperimentConfig& cfg, const std::vector<std::string>& kvs) {
  for (const auto& kv : kvs) {
    const auto pos = kv.find('=');
    if (pos == std::string::npos || pos == 0)
      throw qht::ParseError("--tol expects name=value, got '" + kv + "'");
    const std::string key = kv.substr(0, pos);
    try {
      std::size_t used = 0;
      const double val = std::stod(kv.substr(pos + 1), &used);
      if (used != kv.size() - pos - 1) throw std::invalid_argument(kv);
      cfg.tolerances[key] = val;
    } catch (const std::exception&) {
      throw qht::ParseError("--tol value for '" + key + "' is not a number: '" +
                            kv.substr(pos + 1) + "'");
    }
  }
}

void validate_grids(const ExperimentConfig& cfg) {
  for (long n : cfg.n_values)
    if (n < 1) throw qht::ParseError("--n entries must be >= 1");
  for (double eps : cfg.eps_values)
    if (!(eps > 0.0 && eps < 1.0))
      throw qht::ParseError("--eps entries must lie strictly between 0 and 1");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Hypothesis testing between two quantum states: divergences, constructed "
      "tests, exact error trade-offs, and finite-n bounds on the optimum."};
  app.require_subcommand(1);

  ExperimentConfig cfg;
  std::vector<std::string> tol_kv;

  auto add_common = [&](CLI::App* sub, bool needs_pair) {
    if (needs_pair)
      sub->add_option("--pair", cfg.state_pair_path,
                      "state pair JSON file: {dim, rho, sigma}, [re, im] entries")
          ->required()
          ->check(CLI::ExistingFile);
    sub->add_option("--n", cfg.n_values, "copy counts (comma separated)")
        ->delimiter(',');
    sub->add_option("--eps", cfg.eps_values,
                    "type-I error budgets in (0,1) (comma separated)")
        ->delimiter(',');
    sub->add_option("--e2", cfg.e2_values,
                    "second-order type-II exponents (comma separated)")
        ->delimiter(',');
    sub->add_option("--seed", cfg.seed, "seed for any sampled fallback paths");
    sub->add_option("--c-const", cfg.c,
                    "central-limit error constant (published range "
                    "[0.40973, 0.4784])")
        ->check(CLI::PositiveNumber);
    sub->add_option("--tol", tol_kv,
                    "name=value knobs: oracle_gap, dim_budget, max_atoms "
                    "(comma separated)")
        ->delimiter(',');
    sub->add_option("--out", cfg.output_path,
                    "CSV output path; a .manifest.json is written alongside. "
                    "Omitted: CSV goes to stdout");
  };

  const std::pair<const char*, const char*> subs[] = {
      {"divergences",
       "relative entropy, relative variance, third absolute moment, degeneracy"},
      {"achievability",
       "construct an explicit test at threshold n*D + sqrt(n)*e2 per (n, e2)"},
      {"oracle", "exact optimal type-II error with a dual certificate per (n, eps)"},
      {"bounds", "two-sided finite-n bounds on -log beta_n(eps) per (n, eps)"},
      {"sweep",
       "oracle + bounds + matched construction + converse floor per (n, eps)"},
      {"selftest", "run the built-in cross-module consistency suite"},
  };
  for (const auto& [name, desc] : subs) {
    CLI::App* sub = app.add_subcommand(name, desc);
    const Mode m = qht::harness::mode_from_string(name);
    add_common(sub, m != Mode::selftest);
    sub->callback([&cfg, m] { cfg.mode = m; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kBadInput;
  }

  try {
    apply_tolerances(cfg, tol_kv);
    validate_grids(cfg);

    const auto res = qht::harness::run_sweep(cfg);

    if (cfg.mode == Mode::selftest) {
      std::cout << res.summary;
      std::cout << (res.checks_passed ? "selftest passed\n" : "selftest FAILED\n");
      return res.checks_passed ? kOk : kCheckFailed;
    }

    if (!cfg.output_path.empty()) {
      qht::harness::write_outputs(cfg, res);
      std::cerr << "wrote " << cfg.output_path << " and " << cfg.output_path
                << ".manifest.json\n";
    } else {
      std::cout << qht::harness::to_csv(res.rows);
    }
    std::cerr << res.summary << '\n';
    return res.checks_passed ? kOk : kCheckFailed;
  } catch (const qht::BudgetExceeded& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBudget;
  } catch (const qht::AtomBudgetExceeded& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBudget;
  } catch (const qht::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const qht::InvariantViolation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kCheckFailed;
  }
}

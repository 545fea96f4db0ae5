#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qht/bounds.hpp"

namespace qht::harness {

inline constexpr const char* kVersion = "0.1.0";

enum class Mode { divergences, achievability, oracle, bounds, sweep, selftest };

Mode mode_from_string(const std::string& s);
std::string to_string(Mode m);

struct ExperimentConfig {
  std::string state_pair_path;
  std::vector<long> n_values;
  std::vector<double> eps_values;
  std::vector<double> e2_values;
  Mode mode = Mode::sweep;
  std::uint64_t seed = 0;
  // Named numeric knobs; recognized keys: oracle_gap, dim_budget, max_atoms.
  std::map<std::string, double> tolerances;
  double c = bounds::kDefaultBerryEsseenC;
  std::string output_path;
};

// One emitted quantity. Optional fields serialize as empty CSV cells.
// runtime_ms is measured but deliberately kept out of the CSV and manifest:
// the file outputs are byte-reproducible for a fixed config and seed.
struct ResultRow {
  std::string pair_id;
  std::string mode;
  std::optional<long> n;
  std::optional<double> eps;
  std::optional<double> e2;
  std::string quantity;
  std::optional<double> value;
  std::optional<double> lower;
  std::optional<double> upper;
  std::optional<double> certificate;
  std::optional<double> gap;
  std::optional<bool> lower_applicable;
  std::optional<bool> upper_applicable;
  std::optional<double> d;
  std::optional<double> v;
  std::optional<double> t3;
  std::string source;
  std::string note;
  double runtime_ms = 0.0;
};

// Reads {dim, rho, sigma} from a JSON document; complex entries are [re, im]
// pairs, row-major (flat or nested rows). Throws ParseError on malformed
// input and InvariantViolation listing every violated state invariant.
divergences::StatePair load_state_pair(const std::string& path);
void save_state_pair(const std::string& path, const divergences::StatePair& p);

struct SweepResult {
  std::vector<ResultRow> rows;
  bool checks_passed;
  std::string summary;
};

// Runs the configured mode over the n/eps/e2 grid. Per-cell failures become
// rows with a note instead of aborting the run; cross-module consistency
// checks feed checks_passed.
SweepResult run_sweep(const ExperimentConfig& cfg);

std::string to_csv(const std::vector<ResultRow>& rows);

// CSV next to a JSON manifest (config echo, version, tolerances, columns) at
// output_path and output_path + ".manifest.json".
void write_outputs(const ExperimentConfig& cfg, const SweepResult& res);

// Seeded end-to-end invariant suite; logs one line per check.
bool selftest(std::uint64_t seed, std::ostream& log);

linalg::DensityMatrix random_density_matrix(Eigen::Index dim, std::mt19937_64& rng);
// rho unrestricted, sigma ridge-regularized so it is safely full rank.
divergences::StatePair random_state_pair(Eigen::Index dim, std::mt19937_64& rng);

}  // namespace qht::harness

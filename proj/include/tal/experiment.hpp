#pragma once

// Declarative experiment specification (INI text) and the multi-seed runners
// behind the `train` and `ablate` subcommands.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tal/cil_sim.hpp"

namespace tal {

struct ExperimentSpec {
  GaussianTaskParams dataset;  // seed is overwritten per run
  TrainConfig train;           // loss block and optimiser settings
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::string output_dir;      // empty: fall back to flag / environment
  std::size_t jobs = 1;
  std::vector<double> ablate_lambdas{0.99, 0.995, 0.999, 0.9995};
  std::vector<double> ablate_exponents{0.2, 0.5, 1.0, 2.0, 5.0};

  // Throws Error(kConfig) when a field violates a module precondition.
  void validate() const;

  // Every effective value, defaults included, in a fixed key order.
  std::string canonical_text() const;
};

// Parses INI text with sections [dataset], [schedule], [loss], [run] and
// [ablate]. Unknown sections or keys and unparsable values are rejected with
// Error(kConfig). The result is validated.
ExperimentSpec parse_experiment_spec(std::string_view text);
ExperimentSpec load_experiment_spec(const std::filesystem::path& path);

struct SeedRun {
  std::uint64_t seed = 0;
  RunResult run;
  RunDiagnostics diagnostics;
};

// Dataset seed and training seed are both the run seed.
SeedRun run_seed(const ExperimentSpec& spec, const TrainConfig& train,
                 std::uint64_t seed);

// Runs every seed of spec with spec.train, fanning out over spec.jobs
// threads. Results are ordered like spec.seeds.
std::vector<SeedRun> run_experiment(const ExperimentSpec& spec);

struct AblationCell {
  LossKind loss = LossKind::kTal;
  double lambda = 0.0;
  double r = 0.0;
  bool relaxed = false;  // exponent outside the proven domain
  std::vector<double> a_mean;
  std::vector<double> a_last;
  std::size_t range_violations = 0;
};

// CE baseline first, then every (lambda, r) cell of the grid in order.
std::vector<AblationCell> run_ablation(const ExperimentSpec& spec);

// Output tables. All are deterministic functions of their inputs.
std::string accuracy_matrix_csv(const std::vector<SeedRun>& runs);
std::string per_class_csv(const std::vector<SeedRun>& runs);
std::string q_trajectory_csv(const std::vector<SeedRun>& runs);
std::string summary_csv(const std::vector<SeedRun>& runs, LossKind loss);
std::string summary_stats_csv(const std::vector<SeedRun>& runs);
std::string events_jsonl(const std::vector<SeedRun>& runs);
std::string ablation_csv(const std::vector<AblationCell>& cells);

// Long-format reshaping of a train output directory for plotting tools:
// columns seed,series,group,x,value.
std::string plotdata_long_csv(const std::filesystem::path& train_dir);

inline constexpr const char* kSchemaVersion = "1";
inline constexpr const char* kLibraryVersion = "0.1.0";

}  // namespace tal

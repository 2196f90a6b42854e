#pragma once

#include "catgeo/config.hpp"
#include "catgeo/report.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

namespace catgeo {

/// A failure inside one stage of a run. `exit_code` follows the CLI contract:
/// 2 for configuration or input errors, 3 for numerical failures.
struct StageError : std::runtime_error {
  StageError(std::string stage_, const std::string& what, int code)
      : std::runtime_error(stage_ + ": " + what), stage(std::move(stage_)), exit_code(code) {}
  std::string stage;
  int exit_code;
};

/// Command-line overrides applied on top of a resolved config.
struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<int> trials;
  std::optional<int> epochs;
  std::optional<int> subset;  // training items (toy sample size or image subset)
};

Json apply_overrides(const Json& resolved, const RunOverrides& o);

/// Deterministic "<experiment>-s<seed>".
std::string run_id(const Json& resolved);

struct ExperimentRun {
  std::string name;
  Json config;
  std::filesystem::path dir;
  Json results;
  std::vector<Artifact> manifest;
};

using Logger = std::function<void(const std::string&)>;

/// Trains, measures and writes every artifact of one experiment under
/// output_dir/<run_id>/. Throws StageError; the report of a failed run has
/// status "failed" and its artifacts flagged partial.
ExperimentRun run_experiment(const Json& resolved, const Logger& log = {});

/// Worker count: CATGEO_THREADS if set, else the hardware concurrency.
int thread_count();

/// Runs fn(0..n-1) on up to thread_count() threads. The first exception is
/// rethrown after all workers stop.
void parallel_for(int n, const std::function<void(int)>& fn);

/// Independent 64-bit seed for (seed, purpose, index).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index = 0);

}  // namespace catgeo

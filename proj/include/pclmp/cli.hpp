#pragma once

// Operator surface: run configuration, and the generate / train / eval /
// sweep commands behind the `xpcl` executable.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pclmp/data.hpp"
#include "pclmp/trainer.hpp"

namespace pclmp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;
inline constexpr int kSchemaVersion = 1;

struct RunConfig {
  TrainConfig train;
  // Exactly one data source: synthetic parameters or a feature file.
  std::optional<SynthConfig> synthetic = SynthConfig{};
  std::optional<std::filesystem::path> input;
  std::filesystem::path out = "run";
  int checkpoint_every = 0;  // 0: final checkpoint only
  bool verbose = false;      // per-epoch match tables

  void validate() const;
};

// Strict parse: unknown keys and wrong types are InvalidConfig errors that
// name the offending field. Missing keys keep their defaults.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::ordered_json to_json(const RunConfig& cfg);

// Ablation presets: baseline, hpcl, dpcl, unscheduled, pclmp.
void apply_ablation_preset(RunConfig& cfg, const std::string& name);

Dataset load_dataset(const RunConfig& cfg);

struct RunResult {
  std::vector<EpochReport> reports;
};

// Trains and writes config.resolved.json, metrics.csv, report.json,
// embeddings.xpcl, matches.csv and checkpoint.xpck under cfg.out.
RunResult run_training(const RunConfig& cfg, const std::optional<std::filesystem::path>& resume = std::nullopt);

int main(int argc, char** argv);

}  // namespace pclmp::cli

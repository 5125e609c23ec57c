#pragma once

// Declarative experiment runs: config parsing, compiled-in presets and the
// sample -> estimate -> criterion -> files pipeline behind the CLI.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nctomo/states.hpp"
#include "nctomo/tomo.hpp"

namespace nctomo::expcli {

enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitConfig = 2, kExitRefusal = 3, kExitIo = 4 };

struct ExperimentConfig {
  std::string name;
  states::StateModel state = states::fixtures::coherent_unit();
  double eta = 1.0;
  std::size_t samples = 0;
  std::uint64_t seed = 1;
  tomo::Mode mode = tomo::Mode::noisy_state;
  int n_max = 20;
  int n_blocks = tomo::kDefaultBlocks;
  double k_sigma = 3.0;
  std::filesystem::path out_dir = "out";
  /// Efficiency grid for twin-beam C sweeps; unset for single-mode runs.
  std::optional<std::vector<double>> sweep;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Throws ConfigError for malformed settings and EstimatorRefusal for
/// true_state at eta <= 0.5.
void validate(const ExperimentConfig& config);

nlohmann::json to_json(const ExperimentConfig& config);
/// Parses and validates one experiment object.
ExperimentConfig config_from_json(const nlohmann::json& j);

/// A file holding one experiment object, an array of them, or
/// {"experiments": [...]}. Names must be unique.
std::vector<ExperimentConfig> load_configs(const std::filesystem::path& path);

struct Preset {
  std::string name;  // "fig1" .. "fig9"
  bool desk = false;
  std::string description;
  ExperimentConfig config;
};

/// fig1-fig7 and fig9 at full sample sizes, followed by the desk
/// variants (samples / 10).
std::vector<Preset> list_presets();
/// Throws ConfigError for unknown names.
Preset find_preset(const std::string& name, bool desk);

/// eta from `start` down to `stop` (inclusive) in steps of `step`, rounded
/// to 1e-12.
std::vector<double> eta_grid(double start, double stop, double step);

struct RunResult {
  std::filesystem::path json;
  std::filesystem::path csv;
  std::filesystem::path log;
  bool nonclassical = false;
};

/// Writes <out_dir>/<name>.json, <name>.csv (n, theory, estimate, stderr for
/// B; eta, C_hat, stderr, theory for sweeps), <name>.log and for single-mode
/// runs <name>_pn.csv with the photon-number distribution. `echo` also
/// receives the log lines.
RunResult run(const ExperimentConfig& config, std::ostream* echo = nullptr);

/// Maps the current exception to an exit status and writes a diagnostic.
int exit_code_for(std::exception_ptr error, std::ostream& err);

}  // namespace nctomo::expcli

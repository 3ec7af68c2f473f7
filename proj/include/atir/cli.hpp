#pragma once

// Batch command surface: configuration loading, the experiment commands and
// their manifests. tools/atir.cpp is a thin CLI11 front end over this.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "atir/audiosynth.hpp"
#include "atir/evalx.hpp"
#include "atir/pipeline.hpp"

namespace atir::cli {

/// Directory searched for relative config paths and for the default config.
inline constexpr const char* kConfigDirEnv = "ATIR_CONFIG_DIR";
inline constexpr const char* kDefaultConfigName = "default.conf";

using KeyValues = std::map<std::string, std::string>;

/// `key = value` lines; '#' starts a comment; blank lines are skipped.
KeyValues parse_key_values(const std::string& text);
/// A JSON object; nested objects flatten to dotted keys, arrays of scalars
/// to comma-separated values.
KeyValues parse_json_config(const std::string& text);
/// JSON when the first non-blank character is '{', key=value otherwise.
KeyValues load_config_file(const std::filesystem::path& path);

/// Explicit path: used as is when it exists, else looked up under
/// $ATIR_CONFIG_DIR. No path: $ATIR_CONFIG_DIR/default.conf when that exists,
/// else nothing (built-in defaults). A missing explicit file throws
/// ConfigError.
std::optional<std::filesystem::path> resolve_config_path(const std::optional<std::string>& given);

/// Applies one `key=value` override.
void apply_override(KeyValues& kv, const std::string& assignment);

struct Paths {
  std::filesystem::path out_dir = "atir_out";
  std::filesystem::path corpus, queries, qrels, train_queries, train_qrels;
  std::filesystem::path selector, model, stage1_model;
};

struct ExperimentConfig {
  Paths paths;
  audiosynth::SynthConfig synth;
  audiosynth::BenchmarkSize size{2000, 500, 2.0, 1500};
  pipeline::PipelineConfig pipeline;
  std::vector<std::size_t> k_list = {1, 5, 10};
  std::size_t search_depth = 100;
  std::vector<uint64_t> perturb_seeds = {1, 2, 3, 4, 5};
  std::vector<std::size_t> pool_ks = {2, 4, 8};
  bool eval_asr = true;
  double asr_wer = 0.0281;
  uint64_t asr_seed = 1;
  evalx::LatencyOptions latency;
  /// The merged key/values the config was built from.
  KeyValues source;

  /// Every key must be known; values are type-checked and validated.
  static ExperimentConfig from_key_values(const KeyValues& kv);
  /// Sorted `key=value` lines of `source`.
  std::string canonical() const;
  std::string hash() const;
};

/// Config file (resolved as above) merged with overrides, then parsed.
ExperimentConfig load_experiment_config(const std::optional<std::string>& config_path,
                                        const std::vector<std::string>& overrides);

struct Manifest {
  std::string command;
  std::string config_hash;
  /// Output path relative to out_dir -> FNV-1a checksum of its bytes.
  std::map<std::string, std::string> artifacts;
};

std::string file_checksum(const std::filesystem::path& path);
/// Writes out_dir/manifests/<command>.json and returns its path.
std::filesystem::path write_manifest(const ExperimentConfig& cfg, const std::string& command,
                                     const std::vector<std::filesystem::path>& outputs);

/// Loads the benchmark files named by the config; training files only when
/// `with_training` is set.
audiosynth::SyntheticBenchmark load_benchmark(const ExperimentConfig& cfg, bool with_training);

Manifest cmd_synth(const ExperimentConfig& cfg);
Manifest cmd_train_selector(const ExperimentConfig& cfg);
Manifest cmd_train(const ExperimentConfig& cfg);
Manifest cmd_index(const ExperimentConfig& cfg);
Manifest cmd_search(const ExperimentConfig& cfg);
Manifest cmd_eval(const ExperimentConfig& cfg);
Manifest cmd_ablate(const ExperimentConfig& cfg);
Manifest cmd_perturb(const ExperimentConfig& cfg);
Manifest cmd_pooling(const ExperimentConfig& cfg);
Manifest cmd_bench(const ExperimentConfig& cfg);

/// Subcommand names in the order of the pipeline.
const std::vector<std::string>& command_names();
/// Dispatches by name; unknown names throw ConfigError.
Manifest run_command(const std::string& name, const ExperimentConfig& cfg);

/// Maps an in-flight exception to the exit code (2 config, 3 data,
/// 4 numeric, 1 otherwise) and a one-line JSON error record.
int describe_error(const std::exception& e, std::string& line);

}  // namespace atir::cli

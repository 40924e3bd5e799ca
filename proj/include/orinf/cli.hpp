#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "orinf/metrics.hpp"
#include "orinf/pipeline.hpp"

namespace orinf {

// Flag overrides applied on top of the config file before anything runs;
// the manifest records the resolved result.
struct CliOptions {
  std::filesystem::path config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out_dir;
  std::optional<int> workers;
};

// Verdict report serialization. Deterministic: origins sorted, no
// timestamps, shortest round-trip numbers.
std::string verdicts_to_json(const std::vector<InferenceVerdict>& verdicts,
                             const ExperimentConfig& cfg);
std::vector<InferenceVerdict> verdicts_from_json(const std::string& bytes);

// Ground-truth membership table: origin,member with member in {0,1}.
void save_truth(const std::map<OriginId, bool>& truth, const std::filesystem::path& path);
std::map<OriginId, bool> load_truth(const std::filesystem::path& path);

// Subcommands. Each returns the process exit code: zero exactly when the
// primary report was written. Diagnostics go to `err`, progress to `out`.
int cmd_synth(const CliOptions& opts, std::ostream& out, std::ostream& err);
int cmd_train_target(const CliOptions& opts, std::ostream& out, std::ostream& err);
int cmd_infer(const CliOptions& opts, std::ostream& out, std::ostream& err);
int cmd_evaluate(const CliOptions& opts, std::ostream& out, std::ostream& err);
int cmd_sweep(const CliOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace orinf

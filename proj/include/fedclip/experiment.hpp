#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fedclip {

/// Applies `a.b=v` overrides. `v` is read as JSON when it parses, otherwise
/// taken as a string. Intermediate objects are created as needed.
nlohmann::json apply_overrides(nlohmann::json config, std::span<const std::string> overrides);

/// Validates a raw experiment config and fills in every default. Throws
/// ConfigError with a dotted field path on the first problem found. The
/// result contains only the sections relevant to its task.
nlohmann::json resolve_config(const nlohmann::json& raw);

/// Sub-seeds derived from the top-level seed, keyed by component.
nlohmann::json derived_seeds(const nlohmann::json& resolved);

struct RunOutcome {
  nlohmann::json summary;
  std::filesystem::path output_dir;
  std::filesystem::path summary_path;
  std::filesystem::path history_path;
};

/// Resolves, runs the configured task and writes summary.json, history.csv
/// and model checkpoints into the output directory. `output_dir` overrides
/// the configured one without being recorded as a config change.
RunOutcome run_experiment(const nlohmann::json& raw, std::span<const std::string> overrides = {},
                          const std::filesystem::path& output_dir = {});

/// Copy of a summary without its wall-clock section, for comparisons.
nlohmann::json without_timing(nlohmann::json summary);

/// Human-readable rendering of a run summary.
std::string format_report(const nlohmann::json& summary);

}  // namespace fedclip

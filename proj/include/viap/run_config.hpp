#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "viap/attacks.hpp"
#include "viap/classifier.hpp"
#include "viap/dataset.hpp"
#include "viap/evaluation.hpp"

namespace viap {

/// Everything a CLI run needs. The global seed is copied into the dataset,
/// training and sweep sections by `resolve()`, so one number pins the run.
struct RunConfig {
  std::uint64_t seed = 7;
  DatasetConfig dataset;
  TrainConfig train;
  SweepConfig sweep;
  /// Attack subcommand: family and epsilon grid; sweep uses sweep.families.
  AttackFamily attack_family = AttackFamily::viap;
  std::optional<std::size_t> attack_object;  // unset: every object

  void resolve();
  void validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

/// Reads a JSON config file; missing keys keep their defaults.
RunConfig load_run_config(const std::string& path);

/// "a,b,c" -> numbers; throws Error("bad_config") on junk.
std::vector<double> parse_number_list(const std::string& csv);
std::vector<AttackFamily> parse_family_list(const std::string& csv);

/// A class id or a class name from `class_names`; "random" yields nullopt.
std::optional<std::size_t> parse_target(const std::string& text, const std::vector<std::string>& class_names);

}  // namespace viap

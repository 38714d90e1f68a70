#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "privsum/io.hpp"

namespace privsum {

/// Flat key=value settings. Lines starting with '#' are comments.
class ScenarioConfig {
 public:
  static ScenarioConfig parse(const std::string& text);
  static ScenarioConfig load(const std::filesystem::path& path);

  /// "key=value"; unknown keys are rejected.
  void set(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string text(const std::string& key, const std::string& fallback) const;
  int integer(const std::string& key, int fallback) const;
  double real(const std::string& key, double fallback) const;
  std::vector<double> reals(const std::string& key, const std::string& fallback) const;
  std::vector<int> agents(const std::string& key, const std::string& fallback) const;  // 1-based in, 0-based out
  /// Mandatory: no wall-clock seeding.
  std::uint64_t seed() const;

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

struct Check {
  std::string name;
  bool ok = false;
  std::string detail;
};

struct ScenarioOutcome {
  std::string scenario;
  std::vector<Check> checks;
  json summary;

  bool passed() const;
  void add(std::string name, bool ok, std::string detail = {});
};

/// Runs fn(trial) for trial = 0..count-1 on a small pool; fn writes its
/// result into a slot owned by that trial, so merge order is fixed.
void parallel_trials(int count, const std::function<void(int)>& fn, int threads = 0);

/// Independent generator for (seed, stream).
Rng trial_rng(std::uint64_t seed, std::uint64_t stream);

SigmaLaw parse_sigma(const std::string& spec);
WeightRange parse_range(const std::string& spec);

/// `out` empty means no files are written.
ScenarioOutcome scenario_consensus(const ScenarioConfig& cfg, const std::filesystem::path& out);
ScenarioOutcome scenario_scale(const ScenarioConfig& cfg, const std::filesystem::path& out);
ScenarioOutcome scenario_attack_hbc(const ScenarioConfig& cfg, const std::filesystem::path& out);
ScenarioOutcome scenario_attack_eve(const ScenarioConfig& cfg, const std::filesystem::path& out);
ScenarioOutcome scenario_deniability(const ScenarioConfig& cfg, const std::filesystem::path& out);
ScenarioOutcome scenario_bound_check(const ScenarioConfig& cfg, const std::filesystem::path& out);
ScenarioOutcome scenario_graph_gen(const ScenarioConfig& cfg, const std::filesystem::path& out);

ScenarioOutcome run_scenario(const std::string& name, const ScenarioConfig& cfg, const std::filesystem::path& out);
const std::vector<std::string>& scenario_names();

}  // namespace privsum

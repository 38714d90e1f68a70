#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "privsum/scenario.hpp"

using namespace privsum;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = ScenarioConfig::parse("# comment\n graph = g1\nK=3\n\neta=0.02\nseed=12\nH=4,5\n");
  CHECK(cfg.text("graph", "") == "g1");
  CHECK(cfg.integer("K", 0) == 3);
  CHECK(cfg.real("eta", 0) == 0.02);
  CHECK(cfg.seed() == 12);
  CHECK(cfg.agents("H", "") == std::vector<int>{3, 4});
  CHECK(cfg.integer("rounds", 77) == 77);

  CHECK_THROWS_AS(ScenarioConfig::parse("colour=blue\n"), Error);
  CHECK_THROWS_AS(ScenarioConfig::parse("just words\n"), Error);
  CHECK_THROWS_AS(ScenarioConfig::parse("K=2.5\n").integer("K", 0), Error);
  CHECK_THROWS_AS(ScenarioConfig::parse("K=2\n").seed(), Error);
  CHECK_THROWS_AS(ScenarioConfig::parse("seed=-1\n").seed(), Error);
  CHECK_THROWS_AS(ScenarioConfig::parse("H=0\n").agents("H", ""), Error);
}

TEST_CASE("law and range specs") {
  CHECK(parse_sigma("normal:0:10").variance() == 10.0);
  CHECK(parse_sigma("constant:1").is_constant());
  CHECK_THROWS_AS(parse_sigma("uniform:0:1"), Error);
  CHECK(parse_range("-5:5").hi == 5.0);
  CHECK_THROWS_AS(parse_range("5:-5"), Error);
}

TEST_CASE("trial generators are deterministic and distinct") {
  Rng a = trial_rng(7, 3), b = trial_rng(7, 3), c = trial_rng(7, 4), d = trial_rng(8, 3);
  const auto va = a();
  CHECK(va == b());
  CHECK(va != c());
  CHECK(va != d());
}

TEST_CASE("worker pool fills every slot and surfaces errors") {
  std::vector<int> out(100, -1);
  parallel_trials(100, [&](int t) { out[static_cast<std::size_t>(t)] = t * t; }, 4);
  for (int t = 0; t < 100; ++t) CHECK(out[static_cast<std::size_t>(t)] == t * t);
  CHECK_THROWS_AS(parallel_trials(10, [](int t) { if (t == 6) throw Error(Errc::io, "boom"); }, 3), Error);
}

TEST_CASE("consensus scenario writes identical files for identical configs") {
  const auto base = std::filesystem::temp_directory_path() / "privsum_scenario_repro";
  std::filesystem::remove_all(base);
  auto cfg = ScenarioConfig::parse("seed=5\nrounds=150\nk_sweep=1,2,5\n");
  const auto a = scenario_consensus(cfg, base / "a");
  const auto b = scenario_consensus(cfg, base / "b");
  CHECK(a.passed());
  for (const char* f : {"trajectory.csv", "error.csv", "transcript.json", "bound.json", "summary.json"}) {
    INFO(f);
    CHECK(std::filesystem::exists(base / "a" / f));
    CHECK(slurp(base / "a" / f) == slurp(base / "b" / f));
  }
  CHECK(a.summary["target"][0] == 20.0);
  std::filesystem::remove_all(base);
}

TEST_CASE("vector consensus from per-coordinate means") {
  auto cfg = ScenarioConfig::parse("seed=3\nx0=coords:0,20,40:10\nrounds=200\n");
  const auto r = scenario_consensus(cfg, {});
  CHECK(r.passed());
  CHECK(r.summary["d"] == 3);
}

TEST_CASE("deniability scenario on the five-agent network") {
  const auto r = scenario_deniability(ScenarioConfig::parse("seed=11\n"), {});
  CHECK(r.passed());
  CHECK(r.summary["cases"].size() == 7);
}

TEST_CASE("scenario config errors") {
  CHECK_THROWS_AS(scenario_consensus(ScenarioConfig::parse("rounds=10\n"), {}), Error);
  CHECK_THROWS_AS(scenario_consensus(ScenarioConfig::parse("seed=1\nx0=1,2,3\n"), {}), Error);
  CHECK_THROWS_AS(scenario_attack_hbc(ScenarioConfig::parse("seed=1\nH=2,4,5\ntrials=1\n"), {}), Error);
  CHECK_THROWS_AS(scenario_attack_hbc(ScenarioConfig::parse("seed=1\ntarget=4\ntrials=1\n"), {}), Error);
  CHECK_THROWS_AS(run_scenario("nonsense", ScenarioConfig::parse("seed=1\n"), {}), Error);
  CHECK_THROWS_AS(scenario_consensus(ScenarioConfig::parse("seed=1\nprecision=half\n"), {}), Error);
}

TEST_CASE("small attack runs report the expected structure") {
  const auto h = scenario_attack_hbc(ScenarioConfig::parse("seed=2\ntrials=4\ncontrol_trials=3\nM=30\n"), {});
  CHECK(h.summary["equations"] == 3 * 30 - 2 + 2);
  CHECK(h.summary["unknowns"] == 4 * 30 + 5);
  CHECK(h.summary["control"]["worst_rel_error"].get<double>() <= 1e-8);
  const auto e = scenario_attack_eve(ScenarioConfig::parse("seed=2\ntrials=4\ncontrol_trials=3\nM=30\n"), {});
  CHECK(e.summary["equations"] == 1);
  CHECK(e.summary["control"]["worst_rel_error"].get<double>() <= 1e-8);
}

// Scenario runner: privsum <scenario> [--config f] [--seed s] [--out dir] [--set k=v]...

#include <chrono>
#include <iostream>

#include <CLI11.hpp>

#include "privsum/scenario.hpp"

namespace {

struct Args {
  std::string config;
  std::string seed;
  std::string out;
  std::vector<std::string> sets;
};

int run(const std::string& name, const Args& a) {
  using namespace privsum;
  ScenarioConfig cfg = a.config.empty() ? ScenarioConfig{} : ScenarioConfig::load(a.config);
  for (const auto& s : a.sets) cfg.set(s);
  if (!a.seed.empty()) cfg.set("seed", a.seed);
  const std::filesystem::path out = !a.out.empty() ? a.out : cfg.text("out", "");

  const auto t0 = std::chrono::steady_clock::now();
  const ScenarioOutcome res = run_scenario(name, cfg, out);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (name == "consensus") {
    const auto& r = res.summary["first_stop_round"];
    std::cout << "first round meeting the stopping check: " << (r.is_null() ? std::string("none") : r.dump()) << '\n';
  }
  for (const auto& c : res.checks) {
    std::cout << (c.ok ? "PASS  " : "FAIL  ") << c.name;
    if (!c.detail.empty()) std::cout << "  (" << c.detail << ')';
    std::cout << '\n';
  }
  std::cout << name << ": " << (res.passed() ? "all checks passed" : "some checks failed") << " in "
            << format_number(secs) << " s";
  if (!out.empty()) std::cout << ", outputs in " << out.string();
  std::cout << '\n';
  return res.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Private push-sum simulator and attack scenarios"};
  app.require_subcommand(1);
  Args args;
  std::vector<std::pair<std::string, CLI::App*>> subs;
  for (const auto& name : privsum::scenario_names()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", args.config, "key=value settings file")->check(CLI::ExistingFile);
    sub->add_option("--seed", args.seed, "seed (mandatory here or in the config)");
    sub->add_option("--out", args.out, "output directory");
    sub->add_option("--set", args.sets, "override one setting, key=value")->take_all()->allow_extra_args(false);
    subs.emplace_back(name, sub);
  }
  CLI11_PARSE(app, argc, argv);

  for (const auto& [name, sub] : subs) {
    if (!sub->parsed()) continue;
    try {
      return run(name, args);
    } catch (const privsum::Error& e) {
      std::cerr << "error [" << privsum::to_string(e.code()) << "]: " << e.what() << '\n';
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 2;
    }
  }
  return 2;
}

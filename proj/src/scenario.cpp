#include "privsum/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include "privsum/analysis.hpp"

namespace privsum {

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "graph", "x0",     "K",      "eta",          "rounds",  "seed",        "trials",         "sigma",
      "c1_range", "d",   "target", "H",            "legit",   "target_value", "deltas",        "delta_sigmas",
      "precision", "M",  "eps",    "tail_fraction", "out",    "k_sweep",     "control_trials", "threads"};
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string p; std::getline(ss, p, sep);) out.push_back(trim(p));
  return out;
}

double to_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::logic_error&) {
    throw Error(Errc::bad_config, key + ": not a number: \"" + v + "\"");
  }
}

}  // namespace

// --- config ---------------------------------------------------------------

ScenarioConfig ScenarioConfig::parse(const std::string& text) {
  ScenarioConfig cfg;
  std::stringstream in(text);
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    if (line.find('=') == std::string::npos) {
      throw Error(Errc::bad_config, "line " + std::to_string(line_no) + ": expected key=value");
    }
    cfg.set(line);
  }
  return cfg;
}

ScenarioConfig ScenarioConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void ScenarioConfig::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw Error(Errc::bad_config, "expected key=value, got \"" + assignment + "\"");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void ScenarioConfig::set(const std::string& key, const std::string& value) {
  if (known_keys().count(key) == 0) throw Error(Errc::bad_config, "unknown key \"" + key + "\"");
  values_[key] = value;
}

std::string ScenarioConfig::text(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

int ScenarioConfig::integer(const std::string& key, int fallback) const {
  if (!has(key)) return fallback;
  const double v = to_real(key, text(key, ""));
  if (v != static_cast<double>(static_cast<int>(v))) throw Error(Errc::bad_config, key + ": expected an integer");
  return static_cast<int>(v);
}

double ScenarioConfig::real(const std::string& key, double fallback) const {
  return has(key) ? to_real(key, text(key, "")) : fallback;
}

std::vector<double> ScenarioConfig::reals(const std::string& key, const std::string& fallback) const {
  std::vector<double> out;
  for (const auto& p : split(text(key, fallback), ',')) {
    if (!p.empty()) out.push_back(to_real(key, p));
  }
  return out;
}

std::vector<int> ScenarioConfig::agents(const std::string& key, const std::string& fallback) const {
  std::vector<int> out;
  for (double v : reals(key, fallback)) {
    if (v < 1 || v != static_cast<double>(static_cast<int>(v))) throw Error(Errc::bad_config, key + ": agents are 1-based integers");
    out.push_back(static_cast<int>(v) - 1);
  }
  return out;
}

std::uint64_t ScenarioConfig::seed() const {
  if (!has("seed")) throw Error(Errc::bad_config, "seed is mandatory");
  try {
    std::size_t pos = 0;
    const std::string v = text("seed", "");
    if (v.empty() || v.front() == '-' || v.front() == '+') throw std::invalid_argument(v);
    const auto s = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return s;
  } catch (const std::logic_error&) {
    throw Error(Errc::bad_config, "seed must be an unsigned integer");
  }
}

bool ScenarioOutcome::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.ok; });
}

void ScenarioOutcome::add(std::string name, bool ok, std::string detail) {
  checks.push_back({std::move(name), ok, std::move(detail)});
}

void parallel_trials(int count, const std::function<void(int)>& fn, int threads) {
  if (count <= 0) return;
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, count);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int t = next++; t < count; t = next++) {
      try {
        fn(t);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

Rng trial_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

SigmaLaw parse_sigma(const std::string& spec) {
  const auto parts = split(spec, ':');
  if (parts.size() == 3 && parts[0] == "normal") return SigmaLaw::normal(to_real("sigma", parts[1]), to_real("sigma", parts[2]));
  if (parts.size() == 2 && parts[0] == "constant") return SigmaLaw::constant(to_real("sigma", parts[1]));
  if (parts.size() == 1) return SigmaLaw::constant(to_real("sigma", parts[0]));
  throw Error(Errc::bad_config, "sigma: expected normal:<mean>:<var> or constant:<v>, got " + spec);
}

WeightRange parse_range(const std::string& spec) {
  const auto parts = split(spec, ':');
  if (parts.size() != 2) throw Error(Errc::bad_config, "c1_range: expected <lo>:<hi>");
  WeightRange r{to_real("c1_range", parts[0]), to_real("c1_range", parts[1])};
  if (!(r.lo < r.hi)) throw Error(Errc::bad_range, "c1_range: lo must be below hi");
  return r;
}

namespace {

constexpr std::uint64_t x0_stream = 0x7830;
constexpr std::uint64_t control_stream = 1'000'000;
constexpr std::uint64_t deniability_stream = 2'000'000;

std::string num(double v) { return format_number(v); }

json config_echo(const ScenarioConfig& cfg) {
  json j = json::object();
  for (const auto& [k, v] : cfg.values()) {
    if (k != "out" && k != "threads") j[k] = v;
  }
  return j;
}

/// Round-off floor for the rate fit, relative to the peak error.
template <typename S>
double fit_floor() {
  return 1e6 * static_cast<double>(std::numeric_limits<S>::epsilon());
}

double quantile(std::vector<double> v, double q) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }), v.end());
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

json describe(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(std::max<std::size_t>(1, v.size()));
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(std::max<std::size_t>(1, v.size() - (v.size() > 1 ? 1 : 0)));
  return {{"mean", mean},        {"std", std::sqrt(var)},     {"min", quantile(v, 0.0)}, {"q05", quantile(v, 0.05)},
          {"q25", quantile(v, 0.25)}, {"median", quantile(v, 0.5)}, {"q75", quantile(v, 0.75)},
          {"q95", quantile(v, 0.95)}, {"max", quantile(v, 1.0)}};
}

/// "a,b,..." (one value per agent), "gaussian:<mean>:<var>" (every entry),
/// or "coords:<m1>,<m2>,...:<var>" (one mean per coordinate).
template <typename S>
Matrix<S> make_x0(const ScenarioConfig& cfg, int n, const std::string& fallback, Rng& rng) {
  const std::string spec = cfg.text("x0", fallback);
  const int d_cfg = cfg.integer("d", 0);
  if (cfg.has("d") && d_cfg < 1) throw Error(Errc::bad_config, "d must be >= 1");
  auto gaussian = [&](const std::vector<double>& means, double var) {
    if (!(var >= 0.0)) throw Error(Errc::bad_config, "x0: variance must be >= 0");
    std::normal_distribution<double> z(0.0, 1.0);
    const double sd = std::sqrt(var);
    Matrix<S> x(n, static_cast<Eigen::Index>(means.size()));
    for (int i = 0; i < n; ++i) {
      for (std::size_t l = 0; l < means.size(); ++l) x(i, static_cast<Eigen::Index>(l)) = S(means[l] + sd * z(rng));
    }
    return x;
  };
  Matrix<S> x;
  if (spec.rfind("gaussian:", 0) == 0) {
    const auto p = split(spec, ':');
    if (p.size() != 3) throw Error(Errc::bad_config, "x0: expected gaussian:<mean>:<var>");
    x = gaussian(std::vector<double>(static_cast<std::size_t>(std::max(d_cfg, 1)), to_real("x0", p[1])), to_real("x0", p[2]));
  } else if (spec.rfind("coords:", 0) == 0) {
    const auto p = split(spec, ':');
    if (p.size() != 3) throw Error(Errc::bad_config, "x0: expected coords:<m1>,<m2>,...:<var>");
    std::vector<double> means;
    for (const auto& m : split(p[1], ',')) means.push_back(to_real("x0", m));
    if (means.empty() || (d_cfg != 0 && d_cfg != static_cast<int>(means.size()))) {
      throw Error(Errc::dimension_mismatch, "x0: need one mean per coordinate");
    }
    x = gaussian(means, to_real("x0", p[2]));
  } else {
    const auto vals = cfg.reals("x0", fallback);
    if (static_cast<int>(vals.size()) != n) {
      throw Error(Errc::dimension_mismatch, "x0: expected " + std::to_string(n) + " values, got " + std::to_string(vals.size()));
    }
    if (d_cfg > 1) throw Error(Errc::dimension_mismatch, "x0: an explicit list is scalar");
    x.resize(n, 1);
    for (int i = 0; i < n; ++i) x(i, 0) = S(vals[static_cast<std::size_t>(i)]);
  }
  if (cfg.has("target_value")) {
    const auto t = cfg.agents("target", "1");
    if (t.size() != 1 || t[0] >= n) throw Error(Errc::endpoint_out_of_range, "target");
    x.row(t[0]).setConstant(S(cfg.real("target_value", 0.0)));
  }
  return x;
}

std::string default_x0(const std::string& graph) { return graph == "g1" ? "10,15,20,25,30" : "gaussian:0:10"; }

struct RunParams {
  int horizon = 2;
  double eta = 0.01;
  int rounds = 300;
  SigmaLaw sigma = SigmaLaw::normal(0.0, 10.0);
  WeightRange range;
};

RunParams read_params(const ScenarioConfig& cfg, int k_default, double eta_default, int rounds_default) {
  return {cfg.integer("K", k_default), cfg.real("eta", eta_default), cfg.integer("rounds", rounds_default),
          parse_sigma(cfg.text("sigma", "normal:0:10")), parse_range(cfg.text("c1_range", "-100:100"))};
}

/// Scalar schedule when x0 has one column, vector schedule otherwise.
template <typename S>
RunRecord<S> private_run(const Digraph& g, const Matrix<S>& x0, const RunParams& p, Rng& rng, std::uint64_t seed,
                         RunOptions<S> opts = {}) {
  opts.seed = seed;
  if (x0.cols() == 1) {
    const auto s = build_schedule(g, p.horizon, p.eta, p.rounds, p.sigma, p.range, rng);
    return run_private_push_sum<S>(g, Vector<S>(x0.col(0)), s, p.rounds, opts);
  }
  const auto s = build_vector_schedule(g, p.horizon, p.eta, p.rounds, static_cast<int>(x0.cols()), p.sigma, p.range, rng);
  return run_private_push_sum_vector<S>(g, x0, s, p.rounds, opts);
}

std::string violations(const InvariantReport& r) {
  std::string s = "x " + num(r.worst_x_mass) + ", y " + num(r.worst_y_mass) + ", floor ratio " + num(r.min_y_over_floor) +
                  ", imbalance " + num(r.worst_imbalance);
  if (!r.violations.empty()) s += "; first violation: " + r.violations.front();
  return s;
}

json invariants_json(const InvariantReport& r) {
  return {{"ok", r.ok},
          {"worst_x_mass", r.worst_x_mass},
          {"worst_y_mass", r.worst_y_mass},
          {"min_y_over_floor", r.min_y_over_floor},
          {"worst_imbalance", r.worst_imbalance}};
}

template <typename S>
json bound_json(const RateBound<S>& b, const BoundCheck& c) {
  json norms = json::array();
  for (const auto& row : b.x_l1_norms) norms.push_back(to_double_series(row));
  return {{"rho", to_double(b.rho)}, {"c0", to_double(b.c0)}, {"c1", to_double(b.c1)}, {"c2", to_double(b.c2)},
          {"c3", to_double(b.c3)},   {"c", to_double(b.c)},   {"eta", b.eta},           {"n", b.n},
          {"K", b.horizon},          {"d", b.dim},            {"x_l1_norms", norms},    {"holds", c.holds},
          {"worst_k", c.worst_k},    {"worst_ratio", c.worst_ratio}};
}

template <typename S>
std::optional<int> first_stop(const RunRecord<S>& rec, double eps) {
  const RowVector<S> target = consensus_target<S>(rec.states.front().x);
  for (const auto& s : rec.states) {
    if (stopping_check(s, target, eps)) return s.round;
  }
  return std::nullopt;
}

json opt_json(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }

// --- consensus --------------------------------------------------------------

template <typename S>
ScenarioOutcome consensus(const ScenarioConfig& cfg, const std::filesystem::path& out) {
  ScenarioOutcome res{"consensus", {}, json::object()};
  const std::string gspec = cfg.text("graph", "g1");
  const Digraph g = parse_graph_spec(gspec);
  const auto seed = cfg.seed();
  const RunParams p = read_params(cfg, 2, 0.01, 300);
  const double eps = cfg.real("eps", 1e-6);
  const double tail = cfg.real("tail_fraction", 0.5);

  Rng xr = trial_rng(seed, x0_stream);
  const Matrix<S> x0 = make_x0<S>(cfg, g.size(), default_x0(gspec), xr);
  Rng wr = trial_rng(seed, 1);
  const auto rec = private_run<S>(g, x0, p, wr, seed);

  const auto inv = check_invariants(rec, p.eta);
  res.add("invariants", inv.ok, violations(inv));
  const auto bad_round = replay_transcript(rec);
  res.add("transcript replay", !bad_round, bad_round ? "mismatch at round " + std::to_string(*bad_round) : "exact");

  const auto e = consensus_error(rec);
  const auto stop = first_stop(rec, eps);
  res.add("stopping check", stop.has_value(), stop ? "round " + std::to_string(*stop) : "never within the run");
  const auto b = bound_constants(rec, p.eta);
  const auto bc = verify_bound(e, b);
  res.add("rate bound", bc.holds, "worst ratio " + num(bc.worst_ratio) + " at round " + std::to_string(bc.worst_k));
  const auto fit = fit_linear_rate(e, tail, fit_floor<S>());
  res.add("linear rate", fit.exact_convergence || fit.factor < 1.0, "fitted factor " + num(fit.factor));

  json sweep = json::array();
  if (cfg.has("k_sweep")) {
    long prev = -1;
    bool monotone = true;
    std::string detail;
    for (double kv : cfg.reals("k_sweep", "")) {
      RunParams q = p;
      q.horizon = static_cast<int>(kv);
      Rng r = trial_rng(seed, 1);
      RunOptions<S> o;
      o.record_messages = false;
      const auto run = private_run<S>(g, x0, q, r, seed, o);
      const auto hit = first_round_below(consensus_error(run), eps);
      // Never reaching eps counts as later than any finite round.
      const long cur = hit ? *hit : std::numeric_limits<long>::max();
      if (cur < prev) monotone = false;
      prev = cur;
      detail += "K=" + std::to_string(q.horizon) + ":" + (hit ? std::to_string(*hit) : std::string("none")) + " ";
      sweep.push_back({{"K", q.horizon}, {"first_below_eps", opt_json(hit)}});
    }
    res.add("K sweep nondecreasing", monotone, trim(detail));
  }

  const RowVector<S> target = consensus_target<S>(x0);
  json tgt = json::array();
  for (Eigen::Index l = 0; l < target.size(); ++l) tgt.push_back(to_double(target(l)));
  res.summary = {{"scenario", "consensus"},
                 {"config", config_echo(cfg)},
                 {"n", g.size()},
                 {"d", rec.dim()},
                 {"target", tgt},
                 {"first_stop_round", opt_json(stop)},
                 {"first_below_eps", opt_json(first_round_below(e, eps))},
                 {"final_error", to_double(e.back())},
                 {"fit_factor", fit.factor},
                 {"theoretical_rho", to_double(b.rho)},
                 {"invariants", invariants_json(inv)},
                 {"k_sweep", sweep}};

  if (!out.empty() && inv.ok) {
    write_trajectory_csv(out / "trajectory.csv", rec);
    write_error_csv(out / "error.csv", to_double_series(e));
    write_json(out / "transcript.json", transcript_json(rec));
    write_json(out / "bound.json", bound_json(b, bc));
    write_json(out / "summary.json", res.summary);
  }
  return res;
}

// --- scale -----------------------------------------------------------------

template <typename S>
ScenarioOutcome scale(const ScenarioConfig& cfg, const std::filesystem::path& out) {
  ScenarioOutcome res{"scale", {}, json::object()};
  const auto seed = cfg.seed();
  const std::string gspec = cfg.text("graph", "ring+k:1000:5:" + std::to_string(seed));
  const Digraph g = parse_graph_spec(gspec);
  RunParams p = read_params(cfg, 3, 0.05, 2000);
  const double target_ratio = cfg.real("eps", 1e-6);
  ScenarioConfig xcfg = cfg;
  if (!cfg.has("d") && !cfg.has("x0")) xcfg.set("d", "10");
  Rng xr = trial_rng(seed, x0_stream);
  const Matrix<S> x0 = make_x0<S>(xcfg, g.size(), "gaussian:0:10", xr);
  const int budget = p.rounds;

  // Storing a full-budget schedule for n = 1000 costs hundreds of MB, so the
  // run is attempted with a growing horizon. Schedules built from the same
  // rng state share their prefix, so the longest attempt extends the shorter
  // ones exactly.
  std::vector<S> errors;
  std::optional<int> hit;
  InvariantReport inv;
  int attempted = std::min(budget, 256);
  for (;;) {
    p.rounds = attempted;
    errors.clear();
    const RowVector<S> target = consensus_target<S>(x0);
    InvariantMonitor<S> mon(g.size(), p.eta);
    RunOptions<S> o;
    o.record_states = false;
    o.record_messages = false;
    o.on_state = [&](const NetworkState<S>& s) {
      mon.observe(s);
      errors.push_back(consensus_error(s, target));
    };
    Rng wr = trial_rng(seed, 1);
    const auto rec = private_run<S>(g, x0, p, wr, seed, o);
    inv = mon.finish(rec);
    std::vector<S> ratio;
    for (const auto& e : errors) ratio.push_back(e / errors.front());
    hit = first_round_below(ratio, target_ratio);
    if (hit || attempted == budget) break;
    attempted = std::min(budget, attempted * 2);
  }
  res.add("invariants", inv.ok, violations(inv));
  res.add("error reduction", hit.has_value(),
          hit ? "e(k)/e(0) < " + num(target_ratio) + " at round " + std::to_string(*hit)
              : "not reached within " + std::to_string(budget) + " rounds");
  const auto fit = fit_linear_rate(errors, cfg.real("tail_fraction", 0.5), fit_floor<S>());
  res.add("linear rate", fit.exact_convergence || fit.factor < 1.0, "fitted factor " + num(fit.factor));

  res.summary = {{"scenario", "scale"},
                 {"config", config_echo(cfg)},
                 {"n", g.size()},
                 {"edges", g.edge_count()},
                 {"max_out_degree", g.max_out_degree()},
                 {"d", x0.cols()},
                 {"rounds_run", attempted},
                 {"first_ratio_below", opt_json(hit)},
                 {"final_ratio", to_double(S(errors.back() / errors.front()))},
                 {"fit_factor", fit.factor},
                 {"invariants", invariants_json(inv)}};
  if (!out.empty() && inv.ok) {
    write_error_csv(out / "error.csv", to_double_series(errors));
    write_json(out / "summary.json", res.summary);
  }
  return res;
}

// --- attacks ---------------------------------------------------------------

struct AttackSetup {
  Digraph graph;
  std::vector<int> coalition;
  int target = 0;
  int M = 200;
  int trials = 1000;
  int control_trials = 50;
  int threads = 0;
};

AttackSetup attack_setup(const ScenarioConfig& cfg, int trials_default) {
  AttackSetup a{parse_graph_spec(cfg.text("graph", "g1")), cfg.agents("H", "4,5"), 0, cfg.integer("M", 200),
                cfg.integer("trials", trials_default), cfg.integer("control_trials", 50), cfg.integer("threads", 0)};
  const auto t = cfg.agents("target", "1");
  if (t.size() != 1) throw Error(Errc::bad_config, "target must name one agent");
  a.target = t[0];
  if (a.target >= a.graph.size()) throw Error(Errc::endpoint_out_of_range, "target");
  if (a.M < 1) throw Error(Errc::bad_config, "M must be >= 1");
  if (a.trials < 1 || a.control_trials < 0) throw Error(Errc::bad_config, "trial counts must be positive");
  return a;
}

std::vector<int> full_neighborhood(const Digraph& g, int target, std::vector<int> h) {
  for (int j : g.in_neighbors(target)) h.push_back(j);
  for (int j : g.out_neighbors(target)) h.push_back(j);
  std::sort(h.begin(), h.end());
  h.erase(std::unique(h.begin(), h.end()), h.end());
  return h;
}

void add_dispersion_checks(ScenarioOutcome& res, const std::vector<AttackReport>& reports, double truth) {
  std::vector<double> est, rel;
  for (const auto& r : reports) {
    est.push_back(r.estimate);
    rel.push_back(r.rel_error);
  }
  const double sd = describe(est)["std"].get<double>();
  const double med = quantile(rel, 0.5);
  res.add("estimate spread", sd > 0.1 * std::abs(truth), "std " + num(sd) + " vs 0.1|x_t| = " + num(0.1 * std::abs(truth)));
  res.add("median relative error", med > 0.1, "median " + num(med));
}

json attack_summary(const std::vector<AttackReport>& reports) {
  std::vector<double> est, rel, rank;
  for (const auto& r : reports) {
    est.push_back(r.estimate);
    rel.push_back(r.rel_error);
    rank.push_back(static_cast<double>(r.rank));
  }
  return {{"trials", reports.size()},
          {"equations", reports.front().equations},
          {"unknowns", reports.front().unknowns},
          {"rank_min", quantile(rank, 0.0)},
          {"rank_max", quantile(rank, 1.0)},
          {"estimate", describe(est)},
          {"rel_error", describe(rel)}};
}

template <typename S>
ScenarioOutcome attack_hbc(const ScenarioConfig& cfg, const std::filesystem::path& out) {
  ScenarioOutcome res{"attack-hbc", {}, json::object()};
  const auto a = attack_setup(cfg, 1000);
  const auto& g = a.graph;
  const auto seed = cfg.seed();
  RunParams p = read_params(cfg, 2, 0.01, a.M + 1);
  const auto coalition = detail::normalize_coalition(g, a.coalition);
  if (std::binary_search(coalition.begin(), coalition.end(), a.target)) {
    throw Error(Errc::target_compromised, "target belongs to H");
  }
  const auto hood = full_neighborhood(g, a.target, coalition);
  if (hood == coalition) throw Error(Errc::no_legitimate_neighbor, "every neighbour of the target is in H");
  if (cfg.has("legit")) {
    const auto l = cfg.agents("legit", "");
    if (l.size() != 1 || !(g.has_edge(a.target, l[0]) || g.has_edge(l[0], a.target)) ||
        std::binary_search(coalition.begin(), coalition.end(), l[0])) {
      throw Error(Errc::no_legitimate_neighbor, "legit must be a neighbour of the target outside H");
    }
  }

  Rng xr = trial_rng(seed, x0_stream);
  ScenarioConfig xcfg = cfg;
  if (!cfg.has("target_value")) xcfg.set("target_value", "40");
  const Matrix<S> x0 = make_x0<S>(xcfg, g.size(), "gaussian:0:50", xr);
  if (x0.cols() != 1) throw Error(Errc::dimension_mismatch, "the HBC attack scenario is scalar");
  const double truth = to_double(x0(a.target, 0));

  std::vector<AttackReport> reports(static_cast<std::size_t>(a.trials));
  std::vector<InvariantReport> invs(static_cast<std::size_t>(a.trials));
  parallel_trials(a.trials, [&](int t) {
    Rng r = trial_rng(seed, 1 + static_cast<std::uint64_t>(t));
    const auto run = private_run<S>(g, x0, p, r, seed);
    invs[static_cast<std::size_t>(t)] = check_invariants(run, p.eta);
    auto rep = hbc_attack(build_hbc_view(run, coalition), a.target, a.M);
    score(rep, truth);
    reports[static_cast<std::size_t>(t)] = rep;
  }, a.threads);

  std::vector<double> control_err(static_cast<std::size_t>(a.control_trials));
  parallel_trials(a.control_trials, [&](int t) {
    Rng r = trial_rng(seed, control_stream + static_cast<std::uint64_t>(t));
    RunParams q = p;
    q.rounds = p.horizon + 2;
    const auto run = private_run<S>(g, x0, q, r, seed);
    const S est = full_neighborhood_reconstruction(build_hbc_view(run, hood), a.target);
    control_err[static_cast<std::size_t>(t)] = to_double(S(abs_of(S(est - x0(a.target, 0))) / (S(1) + abs_of(x0(a.target, 0)))));
  }, a.threads);

  const auto bad_inv = std::find_if(invs.begin(), invs.end(), [](const auto& r) { return !r.ok; });
  res.add("invariants", bad_inv == invs.end(),
          bad_inv == invs.end() ? "all trials" : "trial " + std::to_string(bad_inv - invs.begin()) + ": " + violations(*bad_inv));

  // Counting for one row block per round: X(0..M+1), per legitimate edge two
  // columns per round, Y(1..M+1); rows are the x and y balances plus one
  // ratio row per unperturbed round.
  const int legit_edges = static_cast<int>(std::count_if(g.in_neighbors(a.target).begin(), g.in_neighbors(a.target).end(),
                                                         [&](int j) { return !std::binary_search(coalition.begin(), coalition.end(), j); }) +
                                           std::count_if(g.out_neighbors(a.target).begin(), g.out_neighbors(a.target).end(),
                                                         [&](int j) { return !std::binary_search(coalition.begin(), coalition.end(), j); }));
  const int want_eq = 2 * (a.M + 1) + std::max(0, a.M - p.horizon);
  const int want_un = (a.M + 2) + (a.M + 1) + 2 * legit_edges * (a.M + 1);
  const auto& r0 = reports.front();
  res.add("equation count", r0.equations == want_eq, std::to_string(r0.equations) + " (expected " + std::to_string(want_eq) + ")");
  res.add("unknown count", r0.unknowns == want_un, std::to_string(r0.unknowns) + " (expected " + std::to_string(want_un) + ")");
  const bool under = std::all_of(reports.begin(), reports.end(), [](const AttackReport& r) { return r.underdetermined; });
  res.add("rank deficient", under, "rank " + std::to_string(r0.rank) + " < " + std::to_string(r0.unknowns) + " in trial 0");
  add_dispersion_checks(res, reports, truth);
  const double worst_control = control_err.empty() ? 0.0 : *std::max_element(control_err.begin(), control_err.end());
  res.add("full-neighbourhood control", worst_control <= 1e-8, "worst relative error " + num(worst_control));

  res.summary = {{"scenario", "attack-hbc"}, {"config", config_echo(cfg)}, {"truth", truth}};
  res.summary.update(attack_summary(reports));
  res.summary["control"] = {{"trials", a.control_trials}, {"worst_rel_error", worst_control}};
  if (!out.empty() && bad_inv == invs.end()) {
    write_attack_csv(out / "attack.csv", reports);
    write_json(out / "summary.json", res.summary);
  }
  return res;
}

template <typename S>
ScenarioOutcome attack_eve(const ScenarioConfig& cfg, const std::filesystem::path& out) {
  ScenarioOutcome res{"attack-eve", {}, json::object()};
  const bool vector = cfg.integer("d", 1) > 1 || cfg.text("x0", "").rfind("coords:", 0) == 0;
  const auto a = attack_setup(cfg, vector ? 24 : 1000);
  const auto& g = a.graph;
  const auto seed = cfg.seed();
  const RunParams p = read_params(cfg, 2, 0.01, a.M + 1);

  Rng xr = trial_rng(seed, x0_stream);
  ScenarioConfig xcfg = cfg;
  if (!cfg.has("target_value")) xcfg.set("target_value", "40");
  const Matrix<S> x0 = make_x0<S>(xcfg, g.size(), vector ? "coords:0,20,40:50" : "gaussian:0:50", xr);
  const int d = static_cast<int>(x0.cols());

  // One report per (trial, coordinate), trial-major.
  std::vector<AttackReport> reports(static_cast<std::size_t>(a.trials * d));
  std::vector<InvariantReport> invs(static_cast<std::size_t>(a.trials));
  parallel_trials(a.trials, [&](int t) {
    Rng r = trial_rng(seed, 1 + static_cast<std::uint64_t>(t));
    const auto run = private_run<S>(g, x0, p, r, seed);
    invs[static_cast<std::size_t>(t)] = check_invariants(run, p.eta);
    const auto view = build_eve_view(run);
    for (int l = 0; l < d; ++l) {
      auto rep = eve_attack(view, a.target, a.M, p.horizon, l);
      score(rep, to_double(x0(a.target, l)));
      reports[static_cast<std::size_t>(t * d + l)] = rep;
    }
  }, a.threads);

  std::vector<double> control_err(static_cast<std::size_t>(a.control_trials));
  parallel_trials(a.control_trials, [&](int t) {
    Rng r = trial_rng(seed, control_stream + static_cast<std::uint64_t>(t));
    RunParams q = p;
    q.rounds = p.horizon + 2;
    q.sigma = SigmaLaw::constant(1.0);
    const Matrix<S> xs = x0.col(0);
    const auto run = private_run<S>(g, xs, q, r, seed);
    const S est = eve_reconstruction_sigma1_checked(run, a.target);
    control_err[static_cast<std::size_t>(t)] = to_double(S(abs_of(S(est - xs(a.target, 0))) / (S(1) + abs_of(xs(a.target, 0)))));
  }, a.threads);

  const auto bad_inv = std::find_if(invs.begin(), invs.end(), [](const auto& r) { return !r.ok; });
  res.add("invariants", bad_inv == invs.end(),
          bad_inv == invs.end() ? "all trials" : "trial " + std::to_string(bad_inv - invs.begin()) + ": " + violations(*bad_inv));
  const auto& r0 = reports.front();
  res.add("equation count", r0.equations == 1 && r0.unknowns == p.horizon + 2,
          std::to_string(r0.equations) + " equation, " + std::to_string(r0.unknowns) + " unknowns");
  for (int l = 0; l < d; ++l) {
    std::vector<AttackReport> coord;
    for (int t = 0; t < a.trials; ++t) coord.push_back(reports[static_cast<std::size_t>(t * d + l)]);
    ScenarioOutcome part;
    add_dispersion_checks(part, coord, to_double(x0(a.target, l)));
    for (auto& c : part.checks) res.add(d > 1 ? c.name + " (coord " + std::to_string(l + 1) + ")" : c.name, c.ok, c.detail);
  }
  const double worst_control = control_err.empty() ? 0.0 : *std::max_element(control_err.begin(), control_err.end());
  res.add("sigma=1 control", worst_control <= 1e-8, "worst relative error " + num(worst_control));

  res.summary = {{"scenario", "attack-eve"}, {"config", config_echo(cfg)}, {"d", d}};
  json truth = json::array();
  for (int l = 0; l < d; ++l) truth.push_back(to_double(x0(a.target, l)));
  res.summary["truth"] = truth;
  if (d == 1) {
    res.summary.update(attack_summary(reports));
  } else {
    json per = json::array();
    for (int l = 0; l < d; ++l) {
      std::vector<AttackReport> coord;
      for (int t = 0; t < a.trials; ++t) coord.push_back(reports[static_cast<std::size_t>(t * d + l)]);
      per.push_back(attack_summary(coord));
    }
    res.summary["coords"] = per;
  }
  res.summary["control"] = {{"trials", a.control_trials}, {"worst_rel_error", worst_control}};

  if (!out.empty() && bad_inv == invs.end()) {
    if (d == 1) {
      write_attack_csv(out / "attack.csv", reports);
    } else {
      std::string body = "trial,coord,target,true,estimate,rel_error,rank,eqs,unknowns\n";
      for (int t = 0; t < a.trials; ++t) {
        for (int l = 0; l < d; ++l) {
          const auto& r = reports[static_cast<std::size_t>(t * d + l)];
          body += std::to_string(t) + ',' + std::to_string(l + 1) + ',' + std::to_string(r.target + 1) + ',' + num(r.truth) +
                  ',' + num(r.estimate) + ',' + num(r.rel_error) + ',' + std::to_string(r.rank) + ',' +
                  std::to_string(r.equations) + ',' + std::to_string(r.unknowns) + '\n';
        }
      }
      write_text(out / "attack.csv", body);
    }
    write_json(out / "summary.json", res.summary);
  }
  return res;
}

// --- deniability -------------------------------------------------------------

template <typename S>
json dense_json(const MixingOf<S>& m) {
  const Matrix<S> d(m);
  json rows = json::array();
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < d.cols(); ++j) row.push_back(to_double(d(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename S>
ScenarioOutcome deniability(const ScenarioConfig& cfg, const std::filesystem::path& out) {
  ScenarioOutcome res{"deniability", {}, json::object()};
  const std::string gspec = cfg.text("graph", "g1");
  const Digraph g = parse_graph_spec(gspec);
  const auto seed = cfg.seed();
  const RunParams p = read_params(cfg, 2, 0.01, 30);
  const auto coalition = detail::normalize_coalition(g, cfg.agents("H", "4,5"));
  const auto t = cfg.agents("target", "1");
  const auto l = cfg.agents("legit", "2");
  if (t.size() != 1 || l.size() != 1) throw Error(Errc::bad_config, "target and legit must name one agent each");
  const WeightRange range = p.range;

  Rng xr = trial_rng(seed, x0_stream);
  const Matrix<S> x0 = make_x0<S>(cfg, g.size(), default_x0(gspec), xr);
  Rng wr = trial_rng(seed, 1);
  const auto run = private_run<S>(g, x0, p, wr, seed);
  const auto inv = check_invariants(run, p.eta);
  res.add("invariants", inv.ok, violations(inv));
  const auto hv = build_hbc_view(run, coalition);
  const auto ev = build_eve_view(run);
  const S mass0 = x0.sum();
  const S scale0 = S(1) + x0.cwiseAbs().sum();

  auto x_json = [](const Matrix<S>& x) {
    json a = json::array();
    for (Eigen::Index i = 0; i < x.rows(); ++i) a.push_back(to_double(x(i, 0)));
    return a;
  };

  json cases = json::array();
  std::uint64_t stream = deniability_stream;
  auto run_case = [&](const std::string& kind, double param, auto&& construct, auto&& deviation) {
    json c = {{"kind", kind}, {kind == "hbc" ? "delta" : "delta_sigma", param}};
    std::string label = kind + " " + num(param);
    Rng r = trial_rng(seed, stream++);
    try {
      const DeniableRun<S> alt = construct(r);
      const auto other = replay(run, alt);
      const double dev = deviation(other);
      const bool differs = (alt.x0 - x0).cwiseAbs().maxCoeff() > S(0);
      const double drift = to_double(S(abs_of(S(alt.x0.sum() - mass0)) / scale0));
      const bool ok = dev <= 1e-9 && differs && (kind != "hbc" || drift <= 1e-12);
      res.add("replay " + label, ok,
              "deviation " + num(dev) + (differs ? "" : ", x0 unchanged") +
                  (kind == "hbc" ? ", sum drift " + num(drift) : std::string()));
      c["case"] = alt.which_case;
      c["x0_tilde"] = x_json(alt.x0);
      c["round0_weights"] = dense_json<S>(alt.weights->x_perturbation.front().front());
      c["sigma0_tilde"] = to_double(alt.sigma0);
      c["max_view_deviation"] = dev;
      c["ok"] = ok;
    } catch (const Error& e) {
      res.add("replay " + label, false, std::string(to_string(e.code())) + ": " + e.what());
      c["error"] = std::string(to_string(e.code()));
      c["ok"] = false;
    }
    cases.push_back(std::move(c));
  };

  for (double delta : cfg.reals("deltas", "-5,3.7,100,1e6")) {
    run_case("hbc", delta,
             [&](Rng& r) { return construct_deniable_run_hbc(run, coalition, t[0], l[0], delta, r, range); },
             [&](const RunRecord<S>& other) { return max_view_deviation(hv, build_hbc_view(other, coalition)); });
  }
  for (double ds : cfg.reals("delta_sigmas", "0.5,-2,10")) {
    run_case("eve", ds, [&](Rng& r) { return construct_deniable_run_eve(run, ds, r, range); },
             [&](const RunRecord<S>& other) { return max_view_deviation(ev, build_eve_view(other)); });
  }

  res.summary = {{"scenario", "deniability"},
                 {"config", config_echo(cfg)},
                 {"x0", x_json(x0)},
                 {"sigma0", to_double(run.weights->gains.front()(0))},
                 {"cases", cases}};
  if (!out.empty() && inv.ok) write_json(out / "deniability.json", res.summary);
  return res;
}

// --- bound check -------------------------------------------------------------

template <typename S>
ScenarioOutcome bound_check(const ScenarioConfig& cfg, const std::filesystem::path& out) {
  ScenarioOutcome res{"bound-check", {}, json::object()};
  const std::string gspec = cfg.text("graph", "g1");
  const Digraph g = parse_graph_spec(gspec);
  const auto seed = cfg.seed();
  const RunParams p = read_params(cfg, 2, 0.01, 300);
  const int trials = cfg.integer("trials", 100);
  const double tail = cfg.real("tail_fraction", 0.5);
  if (trials < 1) throw Error(Errc::bad_config, "trials must be >= 1");

  struct Row {
    InvariantReport inv;
    BoundCheck check;
    double c = 0, rho = 0, fit = 0;
    bool exact = false;
  };
  std::vector<Row> rows(static_cast<std::size_t>(trials));
  parallel_trials(trials, [&](int t) {
    Rng r = trial_rng(seed, 1 + static_cast<std::uint64_t>(t));
    const Matrix<S> x0 = make_x0<S>(cfg, g.size(), "gaussian:0:10", r);
    RunOptions<S> o;
    o.record_messages = false;
    const auto run = private_run<S>(g, x0, p, r, seed, o);
    const auto e = consensus_error(run);
    const auto b = bound_constants(run, p.eta);
    const auto fit = fit_linear_rate(e, tail, fit_floor<S>());
    rows[static_cast<std::size_t>(t)] = {check_invariants(run, p.eta), verify_bound(e, b), to_double(b.c), to_double(b.rho),
                                         fit.factor, fit.exact_convergence};
  }, cfg.integer("threads", 0));

  int holds = 0, contracts = 0, clean = 0;
  double worst_ratio = 0, worst_fit = 0;
  json per = json::array();
  for (std::size_t t = 0; t < rows.size(); ++t) {
    const auto& r = rows[t];
    holds += r.check.holds;
    contracts += r.exact || r.fit < 1.0;
    clean += r.inv.ok;
    worst_ratio = std::max(worst_ratio, r.check.worst_ratio);
    worst_fit = std::max(worst_fit, r.fit);
    per.push_back({{"trial", t},
                   {"holds", r.check.holds},
                   {"worst_ratio", r.check.worst_ratio},
                   {"worst_k", r.check.worst_k},
                   {"c", r.c},
                   {"rho", r.rho},
                   {"fit_factor", r.fit}});
  }
  res.add("invariants", clean == trials, std::to_string(clean) + "/" + std::to_string(trials));
  res.add("rate bound", holds == trials, std::to_string(holds) + "/" + std::to_string(trials) + ", worst ratio " + num(worst_ratio));
  res.add("linear rate", contracts == trials, std::to_string(contracts) + "/" + std::to_string(trials) + ", worst factor " + num(worst_fit));
  res.summary = {{"scenario", "bound-check"}, {"config", config_echo(cfg)}, {"trials", per}};
  if (!out.empty() && clean == trials) write_json(out / "bound.json", res.summary);
  return res;
}

bool quad_precision(const ScenarioConfig& cfg) {
  const std::string p = cfg.text("precision", "quad");
  if (p == "quad") return true;
  if (p == "double") return false;
  throw Error(Errc::bad_config, "precision must be quad or double");
}

}  // namespace

ScenarioOutcome scenario_consensus(const ScenarioConfig& cfg, const std::filesystem::path& out) {
  return quad_precision(cfg) ? consensus<quad>(cfg, out) : consensus<double>(cfg, out);
}
ScenarioOutcome scenario_scale(const ScenarioConfig& cfg, const std::filesystem::path& out) {
  return quad_precision(cfg) ? scale<quad>(cfg, out) : scale<double>(cfg, out);
}
ScenarioOutcome scenario_attack_hbc(const ScenarioConfig& cfg, const std::filesystem::path& out) {
  return quad_precision(cfg) ? attack_hbc<quad>(cfg, out) : attack_hbc<double>(cfg, out);
}
ScenarioOutcome scenario_attack_eve(const ScenarioConfig& cfg, const std::filesystem::path& out) {
  return quad_precision(cfg) ? attack_eve<quad>(cfg, out) : attack_eve<double>(cfg, out);
}
ScenarioOutcome scenario_deniability(const ScenarioConfig& cfg, const std::filesystem::path& out) {
  return quad_precision(cfg) ? deniability<quad>(cfg, out) : deniability<double>(cfg, out);
}
ScenarioOutcome scenario_bound_check(const ScenarioConfig& cfg, const std::filesystem::path& out) {
  return quad_precision(cfg) ? bound_check<quad>(cfg, out) : bound_check<double>(cfg, out);
}

ScenarioOutcome scenario_graph_gen(const ScenarioConfig& cfg, const std::filesystem::path& out) {
  ScenarioOutcome res{"graph-gen", {}, json::object()};
  const auto seed = cfg.seed();
  const Digraph g = parse_graph_spec(cfg.text("graph", "ring+k:20:2:" + std::to_string(seed)));
  res.add("strongly connected", is_strongly_connected(g), std::to_string(strongly_connected_component_count(g)) + " component(s)");
  res.summary = {{"scenario", "graph-gen"},
                 {"config", config_echo(cfg)},
                 {"n", g.size()},
                 {"edges", g.edge_count()},
                 {"max_out_degree", g.max_out_degree()},
                 {"max_eta", max_eta(g)},
                 {"strongly_connected", is_strongly_connected(g)}};
  if (!out.empty()) {
    write_graph_file(out / "graph.txt", g);
    write_json(out / "summary.json", res.summary);
  }
  return res;
}

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"consensus",   "scale",       "attack-hbc", "attack-eve",
                                              "deniability", "bound-check", "graph-gen"};
  return names;
}

ScenarioOutcome run_scenario(const std::string& name, const ScenarioConfig& cfg, const std::filesystem::path& out) {
  if (name == "consensus") return scenario_consensus(cfg, out);
  if (name == "scale") return scenario_scale(cfg, out);
  if (name == "attack-hbc") return scenario_attack_hbc(cfg, out);
  if (name == "attack-eve") return scenario_attack_eve(cfg, out);
  if (name == "deniability") return scenario_deniability(cfg, out);
  if (name == "bound-check") return scenario_bound_check(cfg, out);
  if (name == "graph-gen") return scenario_graph_gen(cfg, out);
  throw Error(Errc::bad_config, "unknown scenario \"" + name + "\"");
}

}  // namespace privsum

#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "privsum/io.hpp"

using namespace privsum;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("privsum_io_" + name);
  std::filesystem::remove_all(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("graph text round-trip") {
  const Digraph g = reference_five_agent_graph();
  const std::string text = graph_text(g);
  CHECK(text.rfind("5 9\n1 2\n", 0) == 0);
  const Digraph back = parse_graph_text(text);
  CHECK(std::equal(g.edges().begin(), g.edges().end(), back.edges().begin(), back.edges().end()));

  const auto dir = scratch("graph");
  write_graph_file(dir / "g.txt", g);
  CHECK(read_graph_file(dir / "g.txt").edge_count() == 9);
  CHECK(parse_graph_spec((dir / "g.txt").string()).size() == 5);
  std::filesystem::remove_all(dir);
}

TEST_CASE("graph parse errors") {
  CHECK_THROWS_AS(parse_graph_text("3"), Error);
  CHECK_THROWS_AS(parse_graph_text("3 2\n1 2\n"), Error);
  CHECK_THROWS_AS(parse_graph_text("3 1\n1 4\n"), Error);
  CHECK_THROWS_AS(parse_graph_spec("ring+k:10:2"), Error);
  CHECK_THROWS_AS(parse_graph_spec("/no/such/graph"), Error);
  CHECK(parse_graph_spec("ring+k:10:2:3").edge_count() == 30);
}

TEST_CASE("schedule json round-trip") {
  const Digraph g = reference_five_agent_graph();
  Rng rng(4);
  const auto s = build_schedule(g, 2, 0.01, 8, SigmaLaw::normal(0, 10), {}, rng);
  const json j = schedule_to_json(s);
  const auto back = schedule_from_json(json::parse(j.dump()), g);
  CHECK(back.horizon == 2);
  CHECK(back.sigma == s.sigma);
  for (int k = 0; k < 8; ++k) {
    CHECK((Eigen::MatrixXd(back.x_weights(k)) - Eigen::MatrixXd(s.x_weights(k))).cwiseAbs().maxCoeff() == 0.0);
    CHECK((Eigen::MatrixXd(back.y_weights[k]) - Eigen::MatrixXd(s.y_weights[k])).cwiseAbs().maxCoeff() == 0.0);
  }

  json off = j;
  off["c2"][0][0][2] = 0.5;  // (1, 3) is not an edge
  CHECK_THROWS_AS(schedule_from_json(off, g), Error);
  json late = j;
  late["c1"][5][0][0] = 0.123;
  CHECK_THROWS_AS(schedule_from_json(late, g), Error);
}

TEST_CASE("csv and transcript layouts") {
  const Digraph g = reference_five_agent_graph();
  Rng rng(5);
  const auto s = build_schedule(g, 2, 0.01, 4, SigmaLaw::normal(0, 10), {}, rng);
  Vector<double> x0(5);
  x0 << 10, 15, 20, 25, 30;
  const auto run = run_private_push_sum<double>(g, x0, s, 4);
  const auto dir = scratch("csv");
  write_trajectory_csv(dir / "t.csv", run);
  const std::string t = slurp(dir / "t.csv");
  CHECK(t.rfind("round,agent,coord,x,y,z\n0,1,1,10,1,10\n", 0) == 0);
  CHECK(std::count(t.begin(), t.end(), '\n') == 1 + 5 * 5);

  write_error_csv(dir / "e.csv", {1.5, 0.25});
  CHECK(slurp(dir / "e.csv") == "round,error\n0,1.5\n1,0.25\n");

  AttackReport r;
  r.target = 0;
  r.estimate = 3;
  r.equations = 600;
  r.unknowns = 805;
  r.rank = 600;
  score(r, 40);
  write_attack_csv(dir / "a.csv", {r});
  CHECK(slurp(dir / "a.csv").rfind("trial,target,true,estimate,rel_error,rank,eqs,unknowns\n0,1,40,3,", 0) == 0);

  const json tr = transcript_json(run);
  CHECK(tr.size() == 4);
  CHECK(tr[0]["edges"].size() == 9);
  CHECK(tr[0]["edges"][0]["from"] == 1);
  CHECK(tr[0]["edges"][0]["mx"].size() == 1);
  std::filesystem::remove_all(dir);
}

TEST_CASE("number formatting round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17}) CHECK(std::stod(format_number(v)) == v);
}

#include <doctest.h>

#include <random>

#include "privsum/error.hpp"
#include "privsum/graph.hpp"

using namespace privsum;

namespace {

// Transitive closure by Floyd-Warshall; components are classes of mutual
// reachability.
int scc_by_closure(const Digraph& g) {
  const int n = g.size();
  std::vector<std::vector<char>> r(static_cast<std::size_t>(n), std::vector<char>(static_cast<std::size_t>(n), 0));
  for (int i = 0; i < n; ++i) r[i][i] = 1;
  for (const auto& e : g.edges()) r[e.from][e.to] = 1;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (r[i][k] && r[k][j]) r[i][j] = 1;
  std::vector<int> label(static_cast<std::size_t>(n), -1);
  int count = 0;
  for (int i = 0; i < n; ++i) {
    if (label[i] >= 0) continue;
    for (int j = 0; j < n; ++j)
      if (r[i][j] && r[j][i]) label[j] = count;
    ++count;
  }
  return count;
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return Errc::io;
}

}  // namespace

TEST_CASE("edges are sorted and indexed canonically") {
  const Digraph g(4, {{2, 0}, {0, 1}, {1, 2}, {0, 3}, {3, 2}});
  REQUIRE(g.edge_count() == 5);
  for (std::size_t e = 1; e < g.edge_count(); ++e) CHECK(g.edge(e - 1) < g.edge(e));
  for (std::size_t e = 0; e < g.edge_count(); ++e) CHECK(g.edge_index(g.edge(e).from, g.edge(e).to) == e);
  CHECK_FALSE(g.has_edge(1, 0));
  CHECK(g.out_neighbors(0).size() == 2);
  CHECK(g.in_neighbors(2).size() == 2);
  CHECK(g.max_out_degree() == 2);
  for (int i = 0; i < g.size(); ++i) {
    for (auto e : g.out_edges(i)) CHECK(g.edge(e).from == i);
    for (auto e : g.in_edges(i)) CHECK(g.edge(e).to == i);
  }
}

TEST_CASE("construction errors") {
  CHECK(code_of([] { Digraph(3, {{0, 0}}); }) == Errc::self_loop);
  CHECK(code_of([] { Digraph(3, {{0, 1}, {0, 1}}); }) == Errc::duplicate_edge);
  CHECK(code_of([] { Digraph(3, {{0, 3}}); }) == Errc::endpoint_out_of_range);
  CHECK(code_of([] { Digraph(2, {{0, 1}}); }) == Errc::too_few_agents);
  CHECK(code_of([] { generate_ring_plus_random(5, 4, 1); }) == Errc::infeasible_degree);
}

TEST_CASE("component count agrees with reachability closure") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 8);
    std::vector<Edge> edges;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j && rng() % 5 == 0) edges.push_back({i, j});
    const Digraph g(n, edges);
    CHECK(strongly_connected_component_count(g) == scc_by_closure(g));
    CHECK(is_strongly_connected(g) == (scc_by_closure(g) == 1));
  }
}

TEST_CASE("ring plus random out-neighbours") {
  for (int extra : {0, 1, 5}) {
    const Digraph g = generate_ring_plus_random(40, extra, 9);
    CHECK(is_strongly_connected(g));
    for (int i = 0; i < g.size(); ++i) {
      CHECK(static_cast<int>(g.out_neighbors(i).size()) == extra + 1);
      CHECK(g.has_edge(i, (i + 1) % 40));
    }
  }
  const auto a = generate_ring_plus_random(30, 3, 4);
  const auto b = generate_ring_plus_random(30, 3, 4);
  CHECK(std::equal(a.edges().begin(), a.edges().end(), b.edges().begin(), b.edges().end()));
}

TEST_CASE("five-agent network") {
  const Digraph g = reference_five_agent_graph();
  CHECK(g.size() == 5);
  CHECK(g.edge_count() == 9);
  CHECK(is_strongly_connected(g));
  // Agent 1 (0-based 0) with H = {4, 5}: one legitimate neighbour, agent 2.
  CHECK(g.has_edge(0, 1));
  CHECK_FALSE(g.has_edge(1, 0));
}

TEST_CASE("incidence matrix") {
  const Digraph g = reference_five_agent_graph();
  const Eigen::MatrixXi r = incidence_matrix(g);
  REQUIRE(r.rows() == 5);
  REQUIRE(r.cols() == 9);
  CHECK(r.colwise().sum().cwiseAbs().maxCoeff() == 0);
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    const auto c = static_cast<Eigen::Index>(e);
    CHECK(r(g.edge(e).to, c) == 1);
    CHECK(r(g.edge(e).from, c) == -1);
    CHECK(r.col(c).cwiseAbs().sum() == 2);
  }
}

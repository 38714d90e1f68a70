#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace privsum {

/// Directed link: `from` pushes its messages to `to`. Agents are 0-based.
struct Edge {
  int from = 0;
  int to = 0;

  auto operator<=>(const Edge&) const = default;
};

/// Communication topology. Immutable after construction.
///
/// Edges are kept sorted by (from, to); that order is the canonical edge
/// indexing used by transcripts, incidence columns and stacked message
/// vectors. This is also the column-major order of the off-diagonal
/// entries of a mixing matrix whose column j holds agent j's outgoing
/// weights.
class Digraph {
 public:
  /// Throws Error with SelfLoop, DuplicateEdge, EndpointOutOfRange or
  /// TooFewAgents (n <= 2).
  Digraph(int n, std::vector<Edge> edges);

  int size() const noexcept { return n_; }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  std::span<const Edge> edges() const noexcept { return edges_; }
  const Edge& edge(std::size_t e) const { return edges_[e]; }

  std::span<const int> in_neighbors(int i) const { return in_[static_cast<std::size_t>(i)]; }
  std::span<const int> out_neighbors(int i) const { return out_[static_cast<std::size_t>(i)]; }
  /// Canonical indices of edges entering / leaving agent i.
  std::span<const std::size_t> in_edges(int i) const { return in_edges_[static_cast<std::size_t>(i)]; }
  std::span<const std::size_t> out_edges(int i) const { return out_edges_[static_cast<std::size_t>(i)]; }

  std::optional<std::size_t> edge_index(int from, int to) const;
  bool has_edge(int from, int to) const { return edge_index(from, to).has_value(); }
  int max_out_degree() const noexcept;

 private:
  int n_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> in_;
  std::vector<std::vector<int>> out_;
  std::vector<std::vector<std::size_t>> in_edges_;
  std::vector<std::vector<std::size_t>> out_edges_;
};

Digraph build_digraph(int n, std::vector<Edge> edges);

/// Number of strongly connected components (Kosaraju, iterative).
int strongly_connected_component_count(const Digraph& g);
bool is_strongly_connected(const Digraph& g);

/// n x |E| signed incidence matrix in canonical edge order: +1 at the
/// receiving agent, -1 at the sending agent.
Eigen::MatrixXi incidence_matrix(const Digraph& g);

/// Directed ring i -> i+1 (mod n) plus `extra_out` distinct random
/// out-neighbours per agent. Throws InfeasibleDegree unless
/// 0 <= extra_out <= n - 2.
Digraph generate_ring_plus_random(int n, int extra_out, std::uint64_t seed);

/// The five-agent test network. Agent 0's out-neighbours are {1, 3, 4}
/// and its in-neighbours {3, 4}, so with the coalition {3, 4} agent 1 is
/// the single legitimate neighbour of agent 0.
Digraph reference_five_agent_graph();

}  // namespace privsum

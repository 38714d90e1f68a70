#include "privsum/graph.hpp"

#include <algorithm>
#include <random>
#include <string>

#include "privsum/error.hpp"

namespace privsum {

Digraph::Digraph(int n, std::vector<Edge> edges) : n_(n), edges_(std::move(edges)) {
  if (n_ <= 2) {
    throw Error(Errc::too_few_agents, "need more than 2 agents, got " + std::to_string(n_));
  }
  for (const auto& e : edges_) {
    if (e.from < 0 || e.from >= n_ || e.to < 0 || e.to >= n_) {
      throw Error(Errc::endpoint_out_of_range,
                  "edge (" + std::to_string(e.from) + "," + std::to_string(e.to) + ")");
    }
    if (e.from == e.to) {
      throw Error(Errc::self_loop, "agent " + std::to_string(e.from));
    }
  }
  std::sort(edges_.begin(), edges_.end());
  if (auto dup = std::adjacent_find(edges_.begin(), edges_.end()); dup != edges_.end()) {
    throw Error(Errc::duplicate_edge,
                "edge (" + std::to_string(dup->from) + "," + std::to_string(dup->to) + ")");
  }

  const auto count = static_cast<std::size_t>(n_);
  in_.resize(count);
  out_.resize(count);
  in_edges_.resize(count);
  out_edges_.resize(count);
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const auto from = static_cast<std::size_t>(edges_[e].from);
    const auto to = static_cast<std::size_t>(edges_[e].to);
    out_[from].push_back(edges_[e].to);
    out_edges_[from].push_back(e);
    in_[to].push_back(edges_[e].from);
    in_edges_[to].push_back(e);
  }
}

std::optional<std::size_t> Digraph::edge_index(int from, int to) const {
  const Edge key{from, to};
  auto it = std::lower_bound(edges_.begin(), edges_.end(), key);
  if (it == edges_.end() || *it != key) return std::nullopt;
  return static_cast<std::size_t>(it - edges_.begin());
}

int Digraph::max_out_degree() const noexcept {
  std::size_t best = 0;
  for (const auto& o : out_) best = std::max(best, o.size());
  return static_cast<int>(best);
}

Digraph build_digraph(int n, std::vector<Edge> edges) { return Digraph(n, std::move(edges)); }

namespace {

// Iterative DFS that appends vertices to `order` in post-order.
void post_order(const Digraph& g, int root, std::vector<char>& seen, std::vector<int>& order) {
  std::vector<std::pair<int, std::size_t>> stack{{root, 0}};
  seen[static_cast<std::size_t>(root)] = 1;
  while (!stack.empty()) {
    auto& [v, next] = stack.back();
    const auto out = g.out_neighbors(v);
    if (next < out.size()) {
      const int w = out[next++];
      if (!seen[static_cast<std::size_t>(w)]) {
        seen[static_cast<std::size_t>(w)] = 1;
        stack.emplace_back(w, 0);
      }
    } else {
      order.push_back(v);
      stack.pop_back();
    }
  }
}

}  // namespace

int strongly_connected_component_count(const Digraph& g) {
  const auto n = static_cast<std::size_t>(g.size());
  std::vector<char> seen(n, 0);
  std::vector<int> order;
  order.reserve(n);
  for (int v = 0; v < g.size(); ++v) {
    if (!seen[static_cast<std::size_t>(v)]) post_order(g, v, seen, order);
  }

  // Second pass on the transpose in reverse finishing order.
  std::vector<char> assigned(n, 0);
  int components = 0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (assigned[static_cast<std::size_t>(*it)]) continue;
    ++components;
    std::vector<int> stack{*it};
    assigned[static_cast<std::size_t>(*it)] = 1;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int w : g.in_neighbors(v)) {
        if (!assigned[static_cast<std::size_t>(w)]) {
          assigned[static_cast<std::size_t>(w)] = 1;
          stack.push_back(w);
        }
      }
    }
  }
  return components;
}

bool is_strongly_connected(const Digraph& g) { return strongly_connected_component_count(g) == 1; }

Eigen::MatrixXi incidence_matrix(const Digraph& g) {
  Eigen::MatrixXi r = Eigen::MatrixXi::Zero(g.size(), static_cast<Eigen::Index>(g.edge_count()));
  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    const auto col = static_cast<Eigen::Index>(e);
    r(g.edge(e).to, col) = 1;
    r(g.edge(e).from, col) = -1;
  }
  return r;
}

Digraph generate_ring_plus_random(int n, int extra_out, std::uint64_t seed) {
  if (n <= 2) {
    throw Error(Errc::too_few_agents, "need more than 2 agents, got " + std::to_string(n));
  }
  if (extra_out < 0 || extra_out > n - 2) {
    throw Error(Errc::infeasible_degree, "extra_out must lie in [0, n-2], got " + std::to_string(extra_out));
  }
  std::mt19937_64 rng(seed);
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(extra_out + 1));
  std::vector<int> candidates;
  candidates.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int next = (i + 1) % n;
    edges.push_back({i, next});
    candidates.clear();
    for (int j = 0; j < n; ++j) {
      if (j != i && j != next) candidates.push_back(j);
    }
    // Partial Fisher-Yates: the first extra_out slots become a uniform sample.
    for (int s = 0; s < extra_out; ++s) {
      std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(s), candidates.size() - 1);
      std::swap(candidates[static_cast<std::size_t>(s)], candidates[pick(rng)]);
      edges.push_back({i, candidates[static_cast<std::size_t>(s)]});
    }
  }
  return Digraph(n, std::move(edges));
}

Digraph reference_five_agent_graph() {
  return Digraph(5, {{0, 1}, {0, 3}, {0, 4}, {1, 2}, {2, 3}, {2, 4}, {3, 0}, {3, 4}, {4, 0}});
}

}  // namespace privsum

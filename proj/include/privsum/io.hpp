#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "privsum/adversary.hpp"
#include "privsum/engine.hpp"
#include "privsum/error.hpp"
#include "privsum/graph.hpp"
#include "privsum/weights.hpp"

namespace privsum {

using json = nlohmann::ordered_json;

/// "%.17g", enough digits to round-trip a double.
std::string format_number(double v);

/// Plain text: "n m", then m lines "from to", 1-based.
Digraph read_graph_file(const std::filesystem::path& path);
void write_graph_file(const std::filesystem::path& path, const Digraph& g);
Digraph parse_graph_text(const std::string& text);
std::string graph_text(const Digraph& g);

/// "g1", "ring+k:<n>:<extra>:<seed>" or a path to a graph file.
Digraph parse_graph_spec(const std::string& spec);

/// Round-indexed dense matrices. Loading needs the graph to put the entries
/// back on its support.
json schedule_to_json(const WeightSchedule& s);
WeightSchedule schedule_from_json(const json& j, const Digraph& g);

void write_text(const std::filesystem::path& path, const std::string& body);
void write_json(const std::filesystem::path& path, const json& j);
json read_json(const std::filesystem::path& path);

void write_error_csv(const std::filesystem::path& path, const std::vector<double>& series);
void write_attack_csv(const std::filesystem::path& path, const std::vector<AttackReport>& reports);

template <typename Scalar>
std::vector<double> to_double_series(const std::vector<Scalar>& s) {
  std::vector<double> out;
  out.reserve(s.size());
  for (const auto& v : s) out.push_back(to_double(v));
  return out;
}

/// round,agent,coord,x,y,z with 1-based agent and coordinate.
template <typename Scalar>
void write_trajectory_csv(const std::filesystem::path& path, const RunRecord<Scalar>& run) {
  std::string body = "round,agent,coord,x,y,z\n";
  for (const auto& s : run.states) {
    for (Eigen::Index i = 0; i < s.x.rows(); ++i) {
      for (Eigen::Index l = 0; l < s.x.cols(); ++l) {
        body += std::to_string(s.round) + ',' + std::to_string(i + 1) + ',' + std::to_string(l + 1) + ',' +
                format_number(to_double(s.x(i, l))) + ',' + format_number(to_double(s.y(i))) + ',' +
                format_number(to_double(s.z(i, l))) + '\n';
      }
    }
  }
  write_text(path, body);
}

/// [{round, edges:[{from,to,mx:[...],my}]}], agents 1-based.
template <typename Scalar>
json transcript_json(const RunRecord<Scalar>& run) {
  json rounds = json::array();
  for (std::size_t k = 0; k < run.messages.size(); ++k) {
    const auto& m = run.messages[k];
    json edges = json::array();
    for (std::size_t e = 0; e < run.graph.edge_count(); ++e) {
      const auto ei = static_cast<Eigen::Index>(e);
      json mx = json::array();
      for (Eigen::Index l = 0; l < m.mx.cols(); ++l) mx.push_back(to_double(m.mx(ei, l)));
      edges.push_back({{"from", run.graph.edge(e).from + 1},
                       {"to", run.graph.edge(e).to + 1},
                       {"mx", std::move(mx)},
                       {"my", to_double(m.my(ei))}});
    }
    rounds.push_back({{"round", k}, {"edges", std::move(edges)}});
  }
  return rounds;
}

}  // namespace privsum

#include "privsum/io.hpp"

#include <sstream>

namespace privsum {

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Digraph parse_graph_text(const std::string& text) {
  std::istringstream in(text);
  long n = 0, m = 0;
  if (!(in >> n >> m) || m < 0) throw Error(Errc::io, "graph header must be \"n m\"");
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(m));
  for (long e = 0; e < m; ++e) {
    long from = 0, to = 0;
    if (!(in >> from >> to)) throw Error(Errc::io, "expected " + std::to_string(m) + " edges, read " + std::to_string(e));
    if (from < 1 || from > n || to < 1 || to > n) {
      throw Error(Errc::endpoint_out_of_range, "edge (" + std::to_string(from) + "," + std::to_string(to) + ")");
    }
    edges.push_back({static_cast<int>(from - 1), static_cast<int>(to - 1)});
  }
  return Digraph(static_cast<int>(n), std::move(edges));
}

std::string graph_text(const Digraph& g) {
  std::string out = std::to_string(g.size()) + ' ' + std::to_string(g.edge_count()) + '\n';
  for (const auto& e : g.edges()) out += std::to_string(e.from + 1) + ' ' + std::to_string(e.to + 1) + '\n';
  return out;
}

Digraph read_graph_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_graph_text(ss.str());
}

void write_graph_file(const std::filesystem::path& path, const Digraph& g) { write_text(path, graph_text(g)); }

Digraph parse_graph_spec(const std::string& spec) {
  if (spec == "g1") return reference_five_agent_graph();
  if (spec.rfind("ring+k:", 0) == 0) {
    std::vector<std::string> parts;
    std::stringstream ss(spec.substr(7));
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw Error(Errc::bad_config, "expected ring+k:<n>:<extra>:<seed>, got " + spec);
    try {
      return generate_ring_plus_random(std::stoi(parts[0]), std::stoi(parts[1]), std::stoull(parts[2]));
    } catch (const std::logic_error&) {
      throw Error(Errc::bad_config, "bad number in " + spec);
    }
  }
  return read_graph_file(spec);
}

namespace {

json dense(const Mixing& m) {
  const Eigen::MatrixXd d(m);
  json rows = json::array();
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < d.cols(); ++j) row.push_back(d(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mixing sparse_on_support(const json& rows, const Digraph& g) {
  const int n = g.size();
  if (!rows.is_array() || static_cast<int>(rows.size()) != n) throw Error(Errc::io, "matrix must have n rows");
  Eigen::MatrixXd d(n, n);
  for (int i = 0; i < n; ++i) {
    const auto& row = rows.at(static_cast<std::size_t>(i));
    if (!row.is_array() || static_cast<int>(row.size()) != n) throw Error(Errc::io, "matrix must have n columns");
    for (int j = 0; j < n; ++j) d(i, j) = row.at(static_cast<std::size_t>(j)).get<double>();
  }
  EdgeWeights w{Eigen::VectorXd(static_cast<Eigen::Index>(g.edge_count())), Eigen::VectorXd(n)};
  for (std::size_t e = 0; e < g.edge_count(); ++e) w.edge(static_cast<Eigen::Index>(e)) = d(g.edge(e).to, g.edge(e).from);
  for (int i = 0; i < n; ++i) w.self(i) = d(i, i);
  const Mixing m = assemble_mixing(g, w);
  if ((Eigen::MatrixXd(m) - d).cwiseAbs().maxCoeff() != 0.0) {
    throw Error(Errc::schedule_mismatch, "matrix has entries off the graph support");
  }
  return m;
}

}  // namespace

json schedule_to_json(const WeightSchedule& s) {
  json j;
  j["K"] = s.horizon;
  j["eta"] = s.eta;
  j["sigma"] = s.sigma;
  json c1 = json::array(), c2 = json::array();
  for (int k = 0; k < s.rounds(); ++k) {
    c1.push_back(dense(s.x_weights(k)));
    c2.push_back(dense(s.y_weights[static_cast<std::size_t>(k)]));
  }
  j["c1"] = std::move(c1);
  j["c2"] = std::move(c2);
  return j;
}

WeightSchedule schedule_from_json(const json& j, const Digraph& g) {
  try {
    WeightSchedule s;
    s.horizon = j.at("K").get<int>();
    s.eta = j.at("eta").get<double>();
    s.sigma = j.at("sigma").get<std::vector<double>>();
    const auto& c1 = j.at("c1");
    const auto& c2 = j.at("c2");
    if (c1.size() != c2.size()) throw Error(Errc::schedule_mismatch, "c1 and c2 cover different rounds");
    for (std::size_t k = 0; k < c2.size(); ++k) {
      s.y_weights.push_back(sparse_on_support(c2[k], g));
      Mixing x = sparse_on_support(c1[k], g);
      if (static_cast<int>(k) <= s.horizon) {
        s.x_perturbation.push_back(std::move(x));
      } else if ((Eigen::MatrixXd(x) - Eigen::MatrixXd(s.y_weights.back())).cwiseAbs().maxCoeff() != 0.0) {
        throw Error(Errc::schedule_mismatch, "c1 differs from c2 at round " + std::to_string(k) + " > K");
      }
    }
    if (s.sigma.size() != static_cast<std::size_t>(s.horizon + 1)) {
      throw Error(Errc::schedule_mismatch, "sigma must have K+1 entries");
    }
    return s;
  } catch (const json::exception& e) {
    throw Error(Errc::io, std::string("schedule json: ") + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << body;
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + '\n'); }

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::io, path.string() + ": " + e.what());
  }
}

void write_error_csv(const std::filesystem::path& path, const std::vector<double>& series) {
  std::string body = "round,error\n";
  for (std::size_t k = 0; k < series.size(); ++k) body += std::to_string(k) + ',' + format_number(series[k]) + '\n';
  write_text(path, body);
}

void write_attack_csv(const std::filesystem::path& path, const std::vector<AttackReport>& reports) {
  std::string body = "trial,target,true,estimate,rel_error,rank,eqs,unknowns\n";
  for (std::size_t t = 0; t < reports.size(); ++t) {
    const auto& r = reports[t];
    body += std::to_string(t) + ',' + std::to_string(r.target + 1) + ',' + format_number(r.truth) + ',' +
            format_number(r.estimate) + ',' + format_number(r.rel_error) + ',' + std::to_string(r.rank) + ',' +
            std::to_string(r.equations) + ',' + std::to_string(r.unknowns) + '\n';
  }
  write_text(path, body);
}

}  // namespace privsum

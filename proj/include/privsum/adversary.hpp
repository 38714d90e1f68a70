#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "privsum/engine.hpp"
#include "privsum/error.hpp"
#include "privsum/graph.hpp"
#include "privsum/numerics.hpp"
#include "privsum/scalar.hpp"
#include "privsum/weights.hpp"

namespace privsum {

/// What a coalition H holds after R rounds: its own states, everything its
/// members sent together with the weights they used, what they received
/// from outside (values only, the weights stay with the sender) and the
/// public gains. Topology is public. Per-coordinate blocks are indexed
/// [l]; rows are rounds.
template <typename Scalar>
struct HbcView {
  Digraph graph;
  std::vector<int> members;  // sorted
  int rounds = 0;
  int horizon = -1;
  int dim = 1;
  std::vector<Vector<Scalar>> gains;

  std::vector<Matrix<Scalar>> member_x;  // (R+1) x |H|
  Matrix<Scalar> member_y;

  std::vector<std::size_t> sent_edges;  // canonical indices, sender in H
  std::vector<Matrix<Scalar>> sent_mx;  // R x |sent|
  Matrix<Scalar> sent_my;
  std::vector<Matrix<Scalar>> sent_w1;
  Matrix<Scalar> sent_w2;
  std::vector<Matrix<Scalar>> self_w1;  // R x |H|
  Matrix<Scalar> self_w2;

  std::vector<std::size_t> received_edges;  // sender outside H, receiver in H
  std::vector<Matrix<Scalar>> received_mx;
  Matrix<Scalar> received_my;

  bool is_member(int i) const { return std::binary_search(members.begin(), members.end(), i); }
};

/// Every message on every link, nothing else.
template <typename Scalar>
struct EveView {
  Digraph graph;
  int rounds = 0;
  int dim = 1;
  std::vector<Matrix<Scalar>> mx;  // R x |E|
  Matrix<Scalar> my;
};

struct AttackReport {
  int target = 0;
  double truth = std::numeric_limits<double>::quiet_NaN();
  double estimate = 0.0;
  int equations = 0;
  int unknowns = 0;
  long rank = 0;
  double residual = 0.0;
  std::string method;
  bool underdetermined = false;
  double rel_error = std::numeric_limits<double>::quiet_NaN();
};

/// Fills truth and |estimate - truth| / (1 + |truth|).
inline void score(AttackReport& r, double truth) {
  r.truth = truth;
  r.rel_error = std::abs(r.estimate - truth) / (1.0 + std::abs(truth));
}

namespace detail {

inline std::vector<int> normalize_coalition(const Digraph& g, std::vector<int> h) {
  std::sort(h.begin(), h.end());
  h.erase(std::unique(h.begin(), h.end()), h.end());
  if (h.empty()) throw Error(Errc::empty_coalition, "coalition is empty");
  for (int i : h) {
    if (i < 0 || i >= g.size()) throw Error(Errc::endpoint_out_of_range, "coalition member " + std::to_string(i));
  }
  if (static_cast<int>(h.size()) >= g.size()) throw Error(Errc::coalition_is_everything, "no legitimate agent left");
  return h;
}

template <typename Scalar>
void require_transcript(const RunRecord<Scalar>& run) {
  if (run.messages.empty() || run.states.size() != run.messages.size() + 1) {
    throw Error(Errc::bad_config, "the run must record states and messages");
  }
}

template <typename Scalar>
MixingOf<Scalar>& mutable_x_round0(RunWeights<Scalar>& w, int coord) {
  return w.x_perturbation.at(0).at(static_cast<std::size_t>(coord));
}

template <typename Scalar>
void set_entry(MixingOf<Scalar>& m, int row, int col, const Scalar& v) {
  m.coeffRef(row, col) = v;  // entry exists: weights are stored on the full support
}

inline double rel_dev(double a, double b) { return std::abs(a - b) / (1.0 + std::abs(a)); }

template <typename Scalar>
double max_rel_dev(const Matrix<Scalar>& a, const Matrix<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      const Scalar d = abs_of(Scalar(a(i, j) - b(i, j))) / (Scalar(1) + abs_of(a(i, j)));
      worst = std::max(worst, to_double(d));
    }
  }
  return worst;
}

template <typename Scalar>
double max_rel_dev(const std::vector<Matrix<Scalar>>& a, const std::vector<Matrix<Scalar>>& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, max_rel_dev(a[i], b[i]));
  return worst;
}

}  // namespace detail

template <typename Scalar>
HbcView<Scalar> build_hbc_view(const RunRecord<Scalar>& run, std::vector<int> coalition) {
  const auto& g = run.graph;
  coalition = detail::normalize_coalition(g, std::move(coalition));
  detail::require_transcript(run);

  HbcView<Scalar> v{g, coalition, static_cast<int>(run.messages.size()), run.weights->horizon, run.dim(), {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}};
  const int R = v.rounds;
  const int d = v.dim;
  const auto hn = static_cast<Eigen::Index>(coalition.size());
  v.gains = run.weights->gains;

  for (std::size_t e = 0; e < g.edge_count(); ++e) {
    const bool from_in = v.is_member(g.edge(e).from);
    const bool to_in = v.is_member(g.edge(e).to);
    if (from_in) v.sent_edges.push_back(e);
    else if (to_in) v.received_edges.push_back(e);
  }
  const auto ns = static_cast<Eigen::Index>(v.sent_edges.size());
  const auto nr = static_cast<Eigen::Index>(v.received_edges.size());

  v.member_x.assign(static_cast<std::size_t>(d), Matrix<Scalar>(R + 1, hn));
  v.member_y.resize(R + 1, hn);
  for (int k = 0; k <= R; ++k) {
    const auto& s = run.states[static_cast<std::size_t>(k)];
    for (Eigen::Index h = 0; h < hn; ++h) {
      const int agent = coalition[static_cast<std::size_t>(h)];
      for (int l = 0; l < d; ++l) v.member_x[static_cast<std::size_t>(l)](k, h) = s.x(agent, l);
      v.member_y(k, h) = s.y(agent);
    }
  }

  v.sent_mx.assign(static_cast<std::size_t>(d), Matrix<Scalar>(R, ns));
  v.sent_w1.assign(static_cast<std::size_t>(d), Matrix<Scalar>(R, ns));
  v.self_w1.assign(static_cast<std::size_t>(d), Matrix<Scalar>(R, hn));
  v.sent_my.resize(R, ns);
  v.sent_w2.resize(R, ns);
  v.self_w2.resize(R, hn);
  v.received_mx.assign(static_cast<std::size_t>(d), Matrix<Scalar>(R, nr));
  v.received_my.resize(R, nr);

  const auto& w = *run.weights;
  for (int k = 0; k < R; ++k) {
    const auto& m = run.messages[static_cast<std::size_t>(k)];
    const auto& c2 = w.y_weights[static_cast<std::size_t>(k)];
    for (Eigen::Index s = 0; s < ns; ++s) {
      const auto e = v.sent_edges[static_cast<std::size_t>(s)];
      const auto [from, to] = g.edge(e);
      for (int l = 0; l < d; ++l) {
        v.sent_mx[static_cast<std::size_t>(l)](k, s) = m.mx(static_cast<Eigen::Index>(e), l);
        v.sent_w1[static_cast<std::size_t>(l)](k, s) = w.x_weights(k, l).coeff(to, from);
      }
      v.sent_my(k, s) = m.my(static_cast<Eigen::Index>(e));
      v.sent_w2(k, s) = c2.coeff(to, from);
    }
    for (Eigen::Index h = 0; h < hn; ++h) {
      const int agent = coalition[static_cast<std::size_t>(h)];
      for (int l = 0; l < d; ++l) v.self_w1[static_cast<std::size_t>(l)](k, h) = w.x_weights(k, l).coeff(agent, agent);
      v.self_w2(k, h) = c2.coeff(agent, agent);
    }
    for (Eigen::Index r = 0; r < nr; ++r) {
      const auto e = static_cast<Eigen::Index>(v.received_edges[static_cast<std::size_t>(r)]);
      for (int l = 0; l < d; ++l) v.received_mx[static_cast<std::size_t>(l)](k, r) = m.mx(e, l);
      v.received_my(k, r) = m.my(e);
    }
  }
  return v;
}

template <typename Scalar>
EveView<Scalar> build_eve_view(const RunRecord<Scalar>& run) {
  detail::require_transcript(run);
  const int R = static_cast<int>(run.messages.size());
  const int d = run.dim();
  const auto ne = static_cast<Eigen::Index>(run.graph.edge_count());
  EveView<Scalar> v{run.graph, R, d, std::vector<Matrix<Scalar>>(static_cast<std::size_t>(d), Matrix<Scalar>(R, ne)),
                    Matrix<Scalar>(R, ne)};
  for (int k = 0; k < R; ++k) {
    const auto& m = run.messages[static_cast<std::size_t>(k)];
    for (int l = 0; l < d; ++l) v.mx[static_cast<std::size_t>(l)].row(k) = m.mx.col(l).transpose();
    v.my.row(k) = m.my.transpose();
  }
  return v;
}

/// Largest |a - b| / (1 + |a|) over every entry of two views.
template <typename Scalar>
double max_view_deviation(const HbcView<Scalar>& a, const HbcView<Scalar>& b) {
  if (a.members != b.members || a.sent_edges != b.sent_edges || a.received_edges != b.received_edges ||
      a.rounds != b.rounds || a.dim != b.dim || a.gains.size() != b.gains.size()) {
    return std::numeric_limits<double>::infinity();
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < a.gains.size(); ++k) {
    worst = std::max(worst, detail::max_rel_dev<Scalar>(Matrix<Scalar>(a.gains[k]), Matrix<Scalar>(b.gains[k])));
  }
  worst = std::max(worst, detail::max_rel_dev(a.member_x, b.member_x));
  worst = std::max(worst, detail::max_rel_dev<Scalar>(a.member_y, b.member_y));
  worst = std::max(worst, detail::max_rel_dev(a.sent_mx, b.sent_mx));
  worst = std::max(worst, detail::max_rel_dev<Scalar>(a.sent_my, b.sent_my));
  worst = std::max(worst, detail::max_rel_dev(a.sent_w1, b.sent_w1));
  worst = std::max(worst, detail::max_rel_dev<Scalar>(a.sent_w2, b.sent_w2));
  worst = std::max(worst, detail::max_rel_dev(a.self_w1, b.self_w1));
  worst = std::max(worst, detail::max_rel_dev<Scalar>(a.self_w2, b.self_w2));
  worst = std::max(worst, detail::max_rel_dev(a.received_mx, b.received_mx));
  worst = std::max(worst, detail::max_rel_dev<Scalar>(a.received_my, b.received_my));
  return worst;
}

template <typename Scalar>
double max_view_deviation(const EveView<Scalar>& a, const EveView<Scalar>& b) {
  if (a.rounds != b.rounds || a.dim != b.dim) return std::numeric_limits<double>::infinity();
  return std::max(detail::max_rel_dev(a.mx, b.mx), detail::max_rel_dev<Scalar>(a.my, b.my));
}

/// Counts 3M - K + 2 equations and 4M + 5 unknowns when the target has a
/// single legitimate neighbour.
template <typename Scalar>
AttackReport hbc_attack(const HbcView<Scalar>& v, int target, int M, int coord = 0) {
  const auto& g = v.graph;
  if (target < 0 || target >= g.size()) throw Error(Errc::endpoint_out_of_range, "target " + std::to_string(target));
  if (v.is_member(target)) throw Error(Errc::target_compromised, "target belongs to the coalition");
  if (coord < 0 || coord >= v.dim) throw Error(Errc::dimension_mismatch, "coordinate out of range");
  if (M < 0 || M + 1 > v.rounds) {
    throw Error(Errc::schedule_too_short, "the view covers " + std::to_string(v.rounds) + " rounds, M+1 needed");
  }
  const int K = v.horizon;
  const auto l = static_cast<std::size_t>(coord);

  auto column_of = [](const std::vector<std::size_t>& list, std::size_t e) {
    return static_cast<Eigen::Index>(std::lower_bound(list.begin(), list.end(), e) - list.begin());
  };

  // Incident edges of the target: known ones read from the view, the rest
  // (other end legitimate) become unknowns.
  struct Known {
    bool sent;
    Eigen::Index col;
    double sign;
  };
  std::vector<Known> known;
  std::vector<double> legit_sign;
  Eigen::Index ratio_col = -1;
  for (auto e : g.in_edges(target)) {
    if (v.is_member(g.edge(e).from)) known.push_back({true, column_of(v.sent_edges, e), 1.0});
    else legit_sign.push_back(1.0);
  }
  for (auto e : g.out_edges(target)) {
    if (v.is_member(g.edge(e).to)) {
      const auto col = column_of(v.received_edges, e);
      known.push_back({false, col, -1.0});
      if (ratio_col < 0) ratio_col = col;
    } else {
      legit_sign.push_back(-1.0);
    }
  }
  const auto L = static_cast<Eigen::Index>(legit_sign.size());

  auto delta = [&](int k, bool x_side) {
    double sum = 0.0;
    for (const auto& kn : known) {
      const Scalar& val = x_side ? (kn.sent ? v.sent_mx[l](k, kn.col) : v.received_mx[l](k, kn.col))
                                 : (kn.sent ? v.sent_my(k, kn.col) : v.received_my(k, kn.col));
      sum += kn.sign * to_double(val);
    }
    return sum;
  };
  auto gain = [&](int k) { return k <= K ? to_double(v.gains[static_cast<std::size_t>(k)](coord)) : 1.0; };

  // Unknown layout: X(0..M+1), P_e(0..M) per legitimate edge, Y(1..M+1), Q_e(0..M).
  const Eigen::Index nx = M + 2, np = L * (M + 1), ny = M + 1;
  const Eigen::Index px = 0, pp = nx, py = nx + np, pq = nx + np + ny;
  const Eigen::Index unknowns = pq + np;
  const int ratio_rows = ratio_col >= 0 ? std::max(0, M - K) : 0;
  const Eigen::Index equations = 2 * (M + 1) + ratio_rows;

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(equations, unknowns);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(equations);
  Eigen::Index row = 0;
  for (int k = 0; k <= M; ++k, ++row) {
    const double s = gain(k);
    A(row, px + k + 1) = 1.0;
    A(row, px + k) = -1.0;
    for (Eigen::Index e = 0; e < L; ++e) A(row, pp + e * (M + 1) + k) = -s * legit_sign[static_cast<std::size_t>(e)];
    b(row) = s * delta(k, true);
  }
  for (int k = 0; k <= M; ++k, ++row) {
    A(row, py + k) = 1.0;  // Y(k+1)
    if (k >= 1) A(row, py + k - 1) = -1.0;
    for (Eigen::Index e = 0; e < L; ++e) A(row, pq + e * (M + 1) + k) = -legit_sign[static_cast<std::size_t>(e)];
    b(row) = delta(k, false) + (k == 0 ? 1.0 : 0.0);  // y(0) = 1 is public
  }
  for (int k = K + 1; k <= M && ratio_rows > 0; ++k, ++row) {
    const double zhat = to_double(Scalar(v.received_mx[l](k, ratio_col) / v.received_my(k, ratio_col)));
    A(row, px + k) = 1.0;
    A(row, py + k - 1) = -zhat;
  }

  const auto ls = min_norm_least_squares(A, b);
  AttackReport r;
  r.target = target;
  r.estimate = ls.solution(px);
  r.equations = static_cast<int>(equations);
  r.unknowns = static_cast<int>(unknowns);
  r.rank = static_cast<long>(ls.rank);
  r.residual = ls.residual_norm;
  r.method = "hbc-min-norm-ls";
  r.underdetermined = ls.rank < unknowns;
  return r;
}

/// What an eavesdropper reads off the transcript without any unknown:
/// y_t(k) for k = 0..R, and x_t(k) for K+1 <= k < R.
template <typename Scalar>
struct EveRecovery {
  Vector<Scalar> y;
  Vector<Scalar> x;        // NaN where not recoverable
  Vector<Scalar> delta_x;  // sum_in mx - sum_out mx at each round
};

template <typename Scalar>
EveRecovery<Scalar> recover_eve_states(const EveView<Scalar>& v, int target, int K, int coord = 0) {
  const auto& g = v.graph;
  if (target < 0 || target >= g.size()) throw Error(Errc::endpoint_out_of_range, "target " + std::to_string(target));
  if (coord < 0 || coord >= v.dim) throw Error(Errc::dimension_mismatch, "coordinate out of range");
  const int R = v.rounds;
  const auto& mx = v.mx[static_cast<std::size_t>(coord)];
  EveRecovery<Scalar> out;
  out.y.resize(R + 1);
  out.x = Vector<Scalar>::Constant(R + 1, Scalar(std::numeric_limits<double>::quiet_NaN()));
  out.delta_x.resize(R);
  out.y(0) = Scalar(1);
  for (int k = 0; k < R; ++k) {
    Scalar dy{0}, dx{0};
    for (auto e : g.in_edges(target)) {
      dy += v.my(k, static_cast<Eigen::Index>(e));
      dx += mx(k, static_cast<Eigen::Index>(e));
    }
    for (auto e : g.out_edges(target)) {
      dy -= v.my(k, static_cast<Eigen::Index>(e));
      dx -= mx(k, static_cast<Eigen::Index>(e));
    }
    out.y(k + 1) = out.y(k) + dy;
    out.delta_x(k) = dx;
  }
  const auto out_edges = g.out_edges(target);
  if (out_edges.empty()) return out;
  const auto e0 = static_cast<Eigen::Index>(out_edges.front());
  for (int k = std::max(K + 1, 0); k < R; ++k) out.x(k) = mx(k, e0) / v.my(k, e0) * out.y(k);
  return out;
}

/// Only x_t(0) and sigma(0..K) stay unknown: one equation, K+2 unknowns.
template <typename Scalar>
AttackReport eve_attack(const EveView<Scalar>& v, int target, int M, int K, int coord = 0) {
  if (K < 0) throw Error(Errc::bad_config, "K must be >= 0");
  if (M < K + 1 || M + 1 > v.rounds) {
    throw Error(Errc::schedule_too_short, "need K+1 <= M and M+1 rounds in the view");
  }
  const auto rec = recover_eve_states(v, target, K, coord);
  Eigen::MatrixXd A(1, K + 2);
  Eigen::VectorXd b(1);
  A(0, 0) = 1.0;
  for (int k = 0; k <= K; ++k) A(0, k + 1) = to_double(rec.delta_x(k));
  b(0) = to_double(rec.x(K + 1));
  const auto ls = min_norm_least_squares(A, b);
  AttackReport r;
  r.target = target;
  r.estimate = ls.solution(0);
  r.equations = 1;
  r.unknowns = K + 2;
  r.rank = static_cast<long>(ls.rank);
  r.residual = ls.residual_norm;
  r.method = "eve-min-norm-ls";
  r.underdetermined = ls.rank < K + 2;
  return r;
}

/// Exact x_t(0) when every neighbour of the target is in the coalition.
template <typename Scalar>
Scalar full_neighborhood_reconstruction(const HbcView<Scalar>& v, int target, int coord = 0) {
  const auto& g = v.graph;
  if (target < 0 || target >= g.size()) throw Error(Errc::endpoint_out_of_range, "target " + std::to_string(target));
  if (v.is_member(target)) throw Error(Errc::target_compromised, "target belongs to the coalition");
  for (int j : g.in_neighbors(target)) {
    if (!v.is_member(j)) throw Error(Errc::neighborhood_not_covered, "in-neighbour " + std::to_string(j) + " is legitimate");
  }
  for (int j : g.out_neighbors(target)) {
    if (!v.is_member(j)) throw Error(Errc::neighborhood_not_covered, "out-neighbour " + std::to_string(j) + " is legitimate");
  }
  const int K = v.horizon;
  if (v.rounds < K + 2) throw Error(Errc::schedule_too_short, "need rounds past K+1");
  const auto l = static_cast<std::size_t>(coord);
  auto col = [](const std::vector<std::size_t>& list, std::size_t e) {
    return static_cast<Eigen::Index>(std::lower_bound(list.begin(), list.end(), e) - list.begin());
  };

  Vector<Scalar> y(K + 2), dx(K + 1);
  y(0) = Scalar(1);
  for (int k = 0; k <= K; ++k) {
    Scalar sy{0}, sx{0};
    for (auto e : g.in_edges(target)) {
      sy += v.sent_my(k, col(v.sent_edges, e));
      sx += v.sent_mx[l](k, col(v.sent_edges, e));
    }
    for (auto e : g.out_edges(target)) {
      sy -= v.received_my(k, col(v.received_edges, e));
      sx -= v.received_mx[l](k, col(v.received_edges, e));
    }
    y(k + 1) = y(k) + sy;
    dx(k) = sx;
  }
  const auto e0 = col(v.received_edges, g.out_edges(target).front());
  const Scalar x_next = v.received_mx[l](K + 1, e0) / v.received_my(K + 1, e0) * y(K + 1);
  Scalar x0 = x_next;
  for (int k = 0; k <= K; ++k) x0 -= v.gains[static_cast<std::size_t>(k)](coord) * dx(k);
  return x0;
}

/// Exact x_t(0) from the eavesdropper view when every gain was 1.
template <typename Scalar>
Scalar eve_reconstruction_sigma1(const EveView<Scalar>& v, int target, int K, int coord = 0) {
  if (v.rounds < K + 2) throw Error(Errc::schedule_too_short, "need rounds past K+1");
  const auto rec = recover_eve_states(v, target, K, coord);
  Scalar x0 = rec.x(K + 1);
  for (int k = 0; k <= K; ++k) x0 -= rec.delta_x(k);
  return x0;
}

/// Same, refusing runs whose gains are not all 1.
template <typename Scalar>
Scalar eve_reconstruction_sigma1_checked(const RunRecord<Scalar>& run, int target, int coord = 0) {
  for (const auto& g : run.weights->gains) {
    for (Eigen::Index l = 0; l < g.size(); ++l) {
      if (g(l) != Scalar(1)) throw Error(Errc::sigma_not_unity, "the run used a gain other than 1");
    }
  }
  return eve_reconstruction_sigma1(build_eve_view(run), target, run.weights->horizon, coord);
}

/// Alternate initial values and round-0 weights that leave a view unchanged.
template <typename Scalar>
struct DeniableRun {
  Matrix<Scalar> x0;
  std::shared_ptr<const RunWeights<Scalar>> weights;
  int which_case = 0;  // 1: legit is an out-neighbour, 2: in-neighbour, 0: eavesdropper
  Scalar sigma0{0};
};

/// Moves delta from the legitimate neighbour to the target and retunes the
/// round-0 x weights of both so every message seen by H is unchanged. When
/// legit is both an in- and out-neighbour the out-neighbour construction is
/// used. Self weights of the two are redrawn from `range`.
template <typename Scalar>
DeniableRun<Scalar> construct_deniable_run_hbc(const RunRecord<Scalar>& run, std::vector<int> coalition, int target,
                                               int legit, double delta, Rng& rng, WeightRange range = {}) {
  const auto& g = run.graph;
  coalition = detail::normalize_coalition(g, std::move(coalition));
  detail::require_transcript(run);
  if (run.dim() != 1) throw Error(Errc::dimension_mismatch, "construction is for scalar states");
  if (run.weights->horizon < 0) throw Error(Errc::schedule_mismatch, "run has no perturbed round");
  auto member = [&](int i) { return std::binary_search(coalition.begin(), coalition.end(), i); };
  if (target < 0 || target >= g.size() || member(target)) throw Error(Errc::target_compromised, "bad target");
  const bool out = g.has_edge(target, legit);
  const bool in = g.has_edge(legit, target);
  if (legit < 0 || legit >= g.size() || member(legit) || !(out || in)) {
    throw Error(Errc::no_legitimate_neighbor, "agent " + std::to_string(legit) + " is not a legitimate neighbour");
  }
  if (delta == 0.0) throw Error(Errc::degenerate_delta, "delta must be nonzero");

  const Matrix<Scalar>& x = run.states.front().x;
  const Scalar d = Scalar(delta);
  const Scalar sigma0 = run.weights->gains.front()(0);
  const Scalar xt = x(target, 0), xl = x(legit, 0);
  const Scalar xt_new = xt + d, xl_new = xl - d;
  if (xt_new == Scalar(0) || xl_new == Scalar(0) || sigma0 == Scalar(0)) {
    throw Error(Errc::zero_divisor_initial, "alternate initial value or sigma(0) would be zero");
  }

  auto w = std::make_shared<RunWeights<Scalar>>(*run.weights);
  auto& c = detail::mutable_x_round0(*w, 0);
  const auto& c_old = run.weights->x_perturbation.front().front();
  std::uniform_real_distribution<double> fresh(range.lo, range.hi);

  for (int m : g.out_neighbors(target)) {
    const Scalar old = c_old.coeff(m, target);
    if (out && m == legit) {
      detail::set_entry(c, m, target, Scalar((sigma0 * old * xt + d) / (sigma0 * xt_new)));
    } else {
      detail::set_entry(c, m, target, Scalar(old * xt / xt_new));
    }
  }
  for (int m : g.out_neighbors(legit)) {
    const Scalar old = c_old.coeff(m, legit);
    if (!out && m == target) {
      detail::set_entry(c, m, legit, Scalar((sigma0 * old * xl - d) / (sigma0 * xl_new)));
    } else {
      detail::set_entry(c, m, legit, Scalar(old * xl / xl_new));
    }
  }
  detail::set_entry(c, target, target, Scalar(fresh(rng)));
  detail::set_entry(c, legit, legit, Scalar(fresh(rng)));

  DeniableRun<Scalar> alt;
  alt.x0 = x;
  alt.x0(target, 0) = xt_new;
  alt.x0(legit, 0) = xl_new;
  alt.weights = std::move(w);
  alt.which_case = out ? 1 : 2;
  alt.sigma0 = sigma0;
  return alt;
}

/// x~(0) = x(0) + dsigma R dx(0), round-0 weights rescaled so every message
/// keeps its value, and sigma~(0) = sigma(0) - dsigma so x(1) is unchanged.
template <typename Scalar>
DeniableRun<Scalar> construct_deniable_run_eve(const RunRecord<Scalar>& run, double delta_sigma, Rng& rng,
                                               WeightRange range = {}) {
  const auto& g = run.graph;
  detail::require_transcript(run);
  if (run.dim() != 1) throw Error(Errc::dimension_mismatch, "construction is for scalar states");
  if (run.weights->horizon < 0) throw Error(Errc::schedule_mismatch, "run has no perturbed round");
  const Scalar ds = Scalar(delta_sigma);
  const Scalar sigma0 = run.weights->gains.front()(0);
  if (ds == Scalar(0) || ds == sigma0) {
    throw Error(Errc::degenerate_delta_sigma, "dsigma must be nonzero and differ from sigma(0)");
  }
  const Matrix<Scalar>& x = run.states.front().x;
  const auto& m0 = run.messages.front().mx;

  Matrix<Scalar> x_new = x;
  for (int i = 0; i < g.size(); ++i) {
    Scalar r{0};
    for (auto e : g.in_edges(i)) r += m0(static_cast<Eigen::Index>(e), 0);
    for (auto e : g.out_edges(i)) r -= m0(static_cast<Eigen::Index>(e), 0);
    x_new(i, 0) += ds * r;
    if (x(i, 0) == Scalar(0) || x_new(i, 0) == Scalar(0)) {
      throw Error(Errc::zero_initial_value, "agent " + std::to_string(i) + " has a zero initial value");
    }
  }

  auto w = std::make_shared<RunWeights<Scalar>>(*run.weights);
  auto& c = detail::mutable_x_round0(*w, 0);
  const auto& c_old = run.weights->x_perturbation.front().front();
  std::uniform_real_distribution<double> fresh(range.lo, range.hi);
  for (int n = 0; n < g.size(); ++n) {
    for (int m : g.out_neighbors(n)) detail::set_entry(c, m, n, Scalar(c_old.coeff(m, n) * x(n, 0) / x_new(n, 0)));
    detail::set_entry(c, n, n, Scalar(fresh(rng)));
  }
  w->gains.front()(0) = sigma0 - ds;

  DeniableRun<Scalar> alt;
  alt.x0 = std::move(x_new);
  alt.weights = std::move(w);
  alt.which_case = 0;
  alt.sigma0 = sigma0 - ds;
  return alt;
}

/// Re-runs the protocol from an alternate witness with the original options.
template <typename Scalar>
RunRecord<Scalar> replay(const RunRecord<Scalar>& run, const DeniableRun<Scalar>& alt) {
  RunOptions<Scalar> opts;
  opts.seed = run.config.seed;
  opts.eta = run.config.eta;
  return run_with_weights<Scalar>(run.graph, alt.x0, alt.weights, run.config.protocol,
                                  static_cast<int>(run.messages.size()), opts);
}

}  // namespace privsum

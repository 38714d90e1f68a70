#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "privsum/error.hpp"
#include "privsum/graph.hpp"
#include "privsum/scalar.hpp"
#include "privsum/weights.hpp"

namespace privsum {

enum class Protocol { conventional, private_scalar, private_vector, sum_one };

/// Snapshot after `round` updates. x and z are n x d, one row per agent.
template <typename Scalar>
struct NetworkState {
  int round = 0;
  Matrix<Scalar> x;
  Vector<Scalar> y;
  Matrix<Scalar> z;
};

/// Everything sent during one round, in canonical edge order:
/// mx.row(e) = C1(k)_{to,from} x_from(k), my(e) = C2(k)_{to,from} y_from(k).
template <typename Scalar>
struct RoundMessages {
  Matrix<Scalar> mx;
  Vector<Scalar> my;
};

template <typename Scalar>
using MixingOf = Eigen::SparseMatrix<Scalar>;

/// Weights the engine actually mixes with, in one shape for all protocols
/// and converted to the working precision. Rounds k <= horizon use
/// x_perturbation[k][l] for coordinate l and the gain gains[k](l); later
/// rounds use y_weights[k] for x as well, with gain 1. horizon is -1 when no
/// round is perturbed.
template <typename Scalar>
struct RunWeights {
  int horizon = -1;
  int dim = 1;
  std::vector<MixingOf<Scalar>> y_weights;
  std::vector<std::vector<MixingOf<Scalar>>> x_perturbation;
  std::vector<Vector<Scalar>> gains;

  int rounds() const noexcept { return static_cast<int>(y_weights.size()); }
  const MixingOf<Scalar>& x_weights(int k, int l) const {
    return k <= horizon ? x_perturbation[static_cast<std::size_t>(k)][static_cast<std::size_t>(l)]
                        : y_weights[static_cast<std::size_t>(k)];
  }
  Scalar gain(int k, int l) const { return k <= horizon ? gains[static_cast<std::size_t>(k)](l) : Scalar(1); }
};

template <typename Scalar>
RunWeights<Scalar> weights_from(const WeightSchedule& s) {
  if (s.sigma.size() != s.x_perturbation.size()) {
    throw Error(Errc::schedule_mismatch, "sigma must be given for every perturbed round");
  }
  RunWeights<Scalar> w;
  w.horizon = s.horizon;
  w.dim = 1;
  for (const auto& m : s.y_weights) w.y_weights.push_back(m.cast<Scalar>());
  for (std::size_t k = 0; k < s.x_perturbation.size(); ++k) {
    w.x_perturbation.push_back({s.x_perturbation[k].cast<Scalar>()});
    w.gains.push_back(Vector<Scalar>::Constant(1, Scalar(s.sigma[k])));
  }
  return w;
}

template <typename Scalar>
RunWeights<Scalar> weights_from(const VectorWeightSchedule& s) {
  RunWeights<Scalar> w;
  w.horizon = s.horizon;
  w.dim = s.dim;
  for (const auto& m : s.y_weights) w.y_weights.push_back(m.cast<Scalar>());
  for (const auto& round : s.x_perturbation) {
    std::vector<MixingOf<Scalar>> per_coord;
    for (const auto& m : round) per_coord.push_back(m.cast<Scalar>());
    w.x_perturbation.push_back(std::move(per_coord));
  }
  for (const auto& g : s.gains) w.gains.push_back(g.cast<Scalar>());
  return w;
}

template <typename Scalar>
RunWeights<Scalar> weights_from_conventional(const std::vector<Mixing>& rounds) {
  RunWeights<Scalar> w;
  w.horizon = -1;
  w.dim = 1;
  for (const auto& m : rounds) w.y_weights.push_back(m.cast<Scalar>());
  return w;
}

template <typename Scalar>
RunWeights<Scalar> weights_from(const SumOneSchedule& s) {
  RunWeights<Scalar> w;
  w.horizon = s.horizon;
  w.dim = 1;
  for (const auto& m : s.y_weights) w.y_weights.push_back(m.cast<Scalar>());
  for (int k = 0; k <= s.horizon && k < static_cast<int>(s.x_weights.size()); ++k) {
    w.x_perturbation.push_back({s.x_weights[static_cast<std::size_t>(k)].cast<Scalar>()});
    w.gains.push_back(Vector<Scalar>::Ones(1));
  }
  return w;
}

struct RunConfig {
  Protocol protocol = Protocol::private_scalar;
  int horizon = -1;
  double eta = 0.0;
  int rounds = 0;
  std::uint64_t seed = 0;
  int dim = 1;
};

template <typename Scalar>
struct RunRecord {
  Digraph graph;
  RunConfig config;
  std::shared_ptr<const RunWeights<Scalar>> weights;
  std::vector<NetworkState<Scalar>> states;       // rounds 0..R when recorded
  std::vector<RoundMessages<Scalar>> messages;    // rounds 0..R-1 when recorded
  NetworkState<Scalar> final_state;
  std::vector<Scalar> perturbation_imbalance;    // |sum_i Xi_i(k)| per perturbed round, max over coords
  Scalar max_l1{0};                               // max_k |x(k)|_1 over the run

  int n() const noexcept { return graph.size(); }
  int dim() const noexcept { return config.dim; }
};

template <typename Scalar>
struct RunOptions {
  bool record_states = true;
  bool record_messages = true;
  std::uint64_t seed = 0;
  double eta = 0.0;
  /// Called with every state, including round 0, in order.
  std::function<void(const NetworkState<Scalar>&)> on_state;
};

namespace detail {

template <typename Scalar>
bool on_support(const Digraph& g, const MixingOf<Scalar>& m) {
  if (m.rows() != g.size() || m.cols() != g.size()) return false;
  for (int j = 0; j < g.size(); ++j) {
    const auto out = g.out_neighbors(j);
    std::size_t s = 0;
    bool self_seen = false;
    for (typename MixingOf<Scalar>::InnerIterator it(m, j); it; ++it) {
      const auto row = static_cast<int>(it.row());
      if (row == j && !self_seen) {
        self_seen = true;
      } else if (s < out.size() && out[s] == row) {
        ++s;
      } else {
        return false;
      }
    }
    if (!self_seen || s != out.size()) return false;
  }
  return true;
}

template <typename Scalar>
bool column_stochastic(const MixingOf<Scalar>& m, double tol) {
  for (Eigen::Index j = 0; j < m.outerSize(); ++j) {
    Scalar sum{0};
    for (typename MixingOf<Scalar>::InnerIterator it(m, j); it; ++it) {
      if (it.value() < Scalar(0)) return false;
      sum += it.value();
    }
    if (abs_of(Scalar(sum - Scalar(1))) > Scalar(tol)) return false;
  }
  return true;
}

template <typename Scalar>
void validate_weights(const Digraph& g, const RunWeights<Scalar>& w, int rounds) {
  if (rounds < 0 || rounds > w.rounds()) {
    throw Error(Errc::schedule_too_short,
                "schedule covers " + std::to_string(w.rounds()) + " rounds, " + std::to_string(rounds) + " requested");
  }
  if (w.dim < 1) throw Error(Errc::dimension_mismatch, "dimension must be >= 1");
  const auto perturbed = static_cast<std::size_t>(w.horizon + 1);
  if (w.x_perturbation.size() != perturbed || w.gains.size() != perturbed) {
    throw Error(Errc::schedule_mismatch, "perturbation weights or gains missing for some round k <= K");
  }
  for (std::size_t k = 0; k < perturbed; ++k) {
    if (w.x_perturbation[k].size() != static_cast<std::size_t>(w.dim) || w.gains[k].size() != w.dim) {
      throw Error(Errc::dimension_mismatch, "round " + std::to_string(k) + " does not carry one entry per coordinate");
    }
    for (const auto& m : w.x_perturbation[k]) {
      if (!on_support<Scalar>(g, m)) {
        throw Error(Errc::schedule_mismatch, "perturbation round " + std::to_string(k) + " leaves the graph support");
      }
    }
  }
  for (int k = 0; k < rounds; ++k) {
    const auto& m = w.y_weights[static_cast<std::size_t>(k)];
    if (!on_support<Scalar>(g, m)) {
      throw Error(Errc::schedule_mismatch, "round " + std::to_string(k) + " leaves the graph support");
    }
    if (!column_stochastic<Scalar>(m, 1e-12)) {
      throw Error(Errc::not_column_stochastic, "round " + std::to_string(k));
    }
  }
}

template <typename Scalar>
void fill_ratio(NetworkState<Scalar>& s) {
  s.z.resize(s.x.rows(), s.x.cols());
  for (Eigen::Index i = 0; i < s.x.rows(); ++i) s.z.row(i) = s.x.row(i) / s.y(i);
}

template <typename Scalar>
Scalar l1_norm(const Matrix<Scalar>& x) {
  return x.cwiseAbs().sum();
}

}  // namespace detail

/// x_i(k+1) = x_i(k) + s(k) (sum_in mx - sum_out mx), and the same for y with
/// s = 1. For unperturbed rounds this is C x with the kept share computed as
/// the complement of what was sent, which keeps 1'x exact in working
/// precision even though the double weights only sum to 1 up to rounding.
template <typename Scalar>
RunRecord<Scalar> run_with_weights(const Digraph& g, const Matrix<Scalar>& x0,
                                   std::shared_ptr<const RunWeights<Scalar>> weights, Protocol protocol, int rounds,
                                   const RunOptions<Scalar>& opts = {}) {
  const int n = g.size();
  const int d = weights->dim;
  if (x0.rows() != n || x0.cols() != d) {
    throw Error(Errc::dimension_mismatch, "initial state must be " + std::to_string(n) + " x " + std::to_string(d));
  }
  detail::validate_weights(g, *weights, rounds);

  const auto edge_count = static_cast<Eigen::Index>(g.edge_count());

  RunRecord<Scalar> rec{g, RunConfig{protocol, weights->horizon, opts.eta, rounds, opts.seed, d}, weights, {}, {}, {}, {}, {}};

  NetworkState<Scalar> cur;
  cur.round = 0;
  cur.x = x0;
  cur.y = Vector<Scalar>::Ones(n);
  detail::fill_ratio(cur);
  rec.max_l1 = detail::l1_norm(cur.x);
  if (opts.record_states) {
    rec.states.reserve(static_cast<std::size_t>(rounds) + 1);
    rec.states.push_back(cur);
  }
  if (opts.record_messages) rec.messages.reserve(static_cast<std::size_t>(rounds));
  if (opts.on_state) opts.on_state(cur);

  RoundMessages<Scalar> msg{Matrix<Scalar>(edge_count, d), Vector<Scalar>(edge_count)};
  NetworkState<Scalar> next;
  next.x.resize(n, d);
  next.y.resize(n);

  for (int k = 0; k < rounds; ++k) {
    // Sends: column j of a mixing matrix lists agent j's out-edges in
    // canonical order after skipping the diagonal.
    for (int l = 0; l < d; ++l) {
      const MixingOf<Scalar>& w = weights->x_weights(k, l);
      Eigen::Index e = 0;
      for (int j = 0; j < n; ++j) {
        for (typename MixingOf<Scalar>::InnerIterator it(w, j); it; ++it) {
          if (it.row() == j) continue;
          msg.mx(e++, l) = it.value() * cur.x(j, l);
        }
      }
    }
    {
      const MixingOf<Scalar>& w = weights->y_weights[static_cast<std::size_t>(k)];
      Eigen::Index e = 0;
      for (int j = 0; j < n; ++j) {
        for (typename MixingOf<Scalar>::InnerIterator it(w, j); it; ++it) {
          if (it.row() == j) continue;
          msg.my(e++) = it.value() * cur.y(j);
        }
      }
    }

    // Updates read only round-k values.
    Scalar imbalance{0};
    for (int l = 0; l < d; ++l) {
      const Scalar s = weights->gain(k, l);
      Scalar xi_sum{0};
      for (int i = 0; i < n; ++i) {
        Scalar in{0}, out{0};
        for (auto e : g.in_edges(i)) in += msg.mx(static_cast<Eigen::Index>(e), l);
        for (auto e : g.out_edges(i)) out += msg.mx(static_cast<Eigen::Index>(e), l);
        next.x(i, l) = cur.x(i, l) + s * (in - out);
        xi_sum += in - out;
      }
      using std::abs;
      if (k <= weights->horizon && abs(xi_sum) > imbalance) imbalance = abs(xi_sum);
    }
    for (int i = 0; i < n; ++i) {
      Scalar in{0}, out{0};
      for (auto e : g.in_edges(i)) in += msg.my(static_cast<Eigen::Index>(e));
      for (auto e : g.out_edges(i)) out += msg.my(static_cast<Eigen::Index>(e));
      next.y(i) = cur.y(i) + (in - out);
    }
    if (k <= weights->horizon) rec.perturbation_imbalance.push_back(imbalance);

    next.round = k + 1;
    detail::fill_ratio(next);
    const Scalar l1 = detail::l1_norm(next.x);
    if (l1 > rec.max_l1) rec.max_l1 = l1;
    if (opts.record_messages) rec.messages.push_back(msg);
    if (opts.record_states) rec.states.push_back(next);
    if (opts.on_state) opts.on_state(next);
    std::swap(cur, next);
  }
  rec.final_state = std::move(cur);
  return rec;
}

/// Conventional push-sum: every round mixes x and y with the same
/// column-stochastic matrix.
template <typename Scalar>
RunRecord<Scalar> run_push_sum(const Digraph& g, const Vector<Scalar>& x0, const std::vector<Mixing>& weights, int rounds,
                               const RunOptions<Scalar>& opts = {}) {
  auto w = std::make_shared<const RunWeights<Scalar>>(weights_from_conventional<Scalar>(weights));
  return run_with_weights<Scalar>(g, Matrix<Scalar>(x0), w, Protocol::conventional, rounds, opts);
}

/// Baseline with sum-one real weights on the x side for k <= K.
template <typename Scalar>
RunRecord<Scalar> run_sum_one_push_sum(const Digraph& g, const Vector<Scalar>& x0, const SumOneSchedule& s,
                                       int rounds, const RunOptions<Scalar>& opts = {}) {
  auto w = std::make_shared<const RunWeights<Scalar>>(weights_from<Scalar>(s));
  return run_with_weights<Scalar>(g, Matrix<Scalar>(x0), w, Protocol::sum_one, rounds, opts);
}

template <typename Scalar>
RunRecord<Scalar> run_private_push_sum(const Digraph& g, const Vector<Scalar>& x0, const WeightSchedule& s,
                                       int rounds, RunOptions<Scalar> opts = {}) {
  auto w = std::make_shared<const RunWeights<Scalar>>(weights_from<Scalar>(s));
  if (opts.eta == 0.0) opts.eta = s.eta;
  return run_with_weights<Scalar>(g, Matrix<Scalar>(x0), w, Protocol::private_scalar, rounds, opts);
}

template <typename Scalar>
RunRecord<Scalar> run_private_push_sum_vector(const Digraph& g, const Matrix<Scalar>& x0,
                                              const VectorWeightSchedule& s, int rounds,
                                              RunOptions<Scalar> opts = {}) {
  if (x0.cols() != s.dim) {
    throw Error(Errc::dimension_mismatch,
                "state has " + std::to_string(x0.cols()) + " coordinates, schedule " + std::to_string(s.dim));
  }
  auto w = std::make_shared<const RunWeights<Scalar>>(weights_from<Scalar>(s));
  if (opts.eta == 0.0) opts.eta = s.eta;
  return run_with_weights<Scalar>(g, x0, w, Protocol::private_vector, rounds, opts);
}

/// max_i |z_i - target| < eps, the norm taken over coordinates.
template <typename Scalar>
bool stopping_check(const NetworkState<Scalar>& s, const RowVector<Scalar>& target, double eps) {
  for (Eigen::Index i = 0; i < s.z.rows(); ++i) {
    if (!((s.z.row(i) - target).norm() < Scalar(eps))) return false;
  }
  return true;
}

/// Practical stop that needs no knowledge of the average:
/// max_i |z_i(k+1) - z_i(k)| < eps.
template <typename Scalar>
bool increment_check(const NetworkState<Scalar>& prev, const NetworkState<Scalar>& next, double eps) {
  for (Eigen::Index i = 0; i < next.z.rows(); ++i) {
    if (!((next.z.row(i) - prev.z.row(i)).norm() < Scalar(eps))) return false;
  }
  return true;
}

/// Rebuilds every recorded state from the previous state and the round's
/// messages alone, and checks the messages against the sender's weights.
/// Returns the first round that fails, or nullopt.
template <typename Scalar>
std::optional<int> replay_transcript(const RunRecord<Scalar>& rec) {
  const auto& g = rec.graph;
  const auto& w = *rec.weights;
  if (rec.states.size() != rec.messages.size() + 1) return 0;
  for (std::size_t k = 0; k < rec.messages.size(); ++k) {
    const auto& cur = rec.states[k];
    const auto& nxt = rec.states[k + 1];
    const auto& m = rec.messages[k];
    const int kk = static_cast<int>(k);
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
      const auto [from, to] = g.edge(e);
      const auto ei = static_cast<Eigen::Index>(e);
      for (int l = 0; l < rec.dim(); ++l) {
        if (m.mx(ei, l) != w.x_weights(kk, l).coeff(to, from) * cur.x(from, l)) return kk;
      }
      if (m.my(ei) != w.y_weights[k].coeff(to, from) * cur.y(from)) return kk;
    }
    for (int i = 0; i < g.size(); ++i) {
      for (int l = 0; l < rec.dim(); ++l) {
        Scalar in{0}, out{0};
        for (auto e : g.in_edges(i)) in += m.mx(static_cast<Eigen::Index>(e), l);
        for (auto e : g.out_edges(i)) out += m.mx(static_cast<Eigen::Index>(e), l);
        if (nxt.x(i, l) != cur.x(i, l) + w.gain(kk, l) * (in - out)) return kk;
      }
      Scalar in{0}, out{0};
      for (auto e : g.in_edges(i)) in += m.my(static_cast<Eigen::Index>(e));
      for (auto e : g.out_edges(i)) out += m.my(static_cast<Eigen::Index>(e));
      if (nxt.y(i) != cur.y(i) + (in - out)) return kk;
    }
  }
  return std::nullopt;
}

struct InvariantReport {
  bool ok = true;
  double worst_x_mass = 0.0;    // max_k,l |1'x(k) - 1'x(0)| / (1 + |x(0)|_1)
  double worst_y_mass = 0.0;    // max_k |1'y(k) - n| / n
  double min_y_over_floor = 0.0;  // min_{k>=1,i} y_i(k) / eta^N
  double worst_imbalance = 0.0;   // max_k |sum_i Xi_i(k)| / (1 + max_k |x(k)|_1)
  std::vector<std::string> violations;
};

struct InvariantTolerances {
  double mass = 1e-9;
  double floor = 1e-12;
  double imbalance = 1e-9;
};

/// Streaming form of the invariant suite, for runs that do not keep their
/// states.
template <typename Scalar>
class InvariantMonitor {
 public:
  InvariantMonitor(int n, double eta, InvariantTolerances tol = {}) : n_(n), tol_(tol) {
    using std::pow;
    floor_ = pow(Scalar(eta), Scalar(n));
    rep_.min_y_over_floor = std::numeric_limits<double>::infinity();
  }

  void observe(const NetworkState<Scalar>& s) {
    const RowVector<Scalar> mass = s.x.colwise().sum();
    if (!started_) {
      mass0_ = mass;
      scale_x_ = Scalar(1) + s.x.cwiseAbs().sum();
      started_ = true;
    }
    const double dx = to_double(Scalar((mass - mass0_).cwiseAbs().maxCoeff() / scale_x_));
    const double dy = to_double(Scalar(abs_of(Scalar(s.y.sum() - Scalar(n_))) / Scalar(n_)));
    rep_.worst_x_mass = std::max(rep_.worst_x_mass, dx);
    rep_.worst_y_mass = std::max(rep_.worst_y_mass, dy);
    if (dx > tol_.mass) rep_.violations.push_back("x mass at round " + std::to_string(s.round));
    if (dy > tol_.mass) rep_.violations.push_back("y mass at round " + std::to_string(s.round));
    if (s.round >= 1) {
      const Scalar ymin = s.y.minCoeff();
      rep_.min_y_over_floor = std::min(rep_.min_y_over_floor, to_double(Scalar(ymin / floor_)));
      if (ymin < floor_ * Scalar(1.0 - tol_.floor)) rep_.violations.push_back("y floor at round " + std::to_string(s.round));
    }
  }

  InvariantReport finish(const RunRecord<Scalar>& rec) {
    if (!started_) rep_.violations.push_back("no recorded states");
    const Scalar scale_i = Scalar(1) + rec.max_l1;
    for (std::size_t k = 0; k < rec.perturbation_imbalance.size(); ++k) {
      const double r = to_double(Scalar(rec.perturbation_imbalance[k] / scale_i));
      rep_.worst_imbalance = std::max(rep_.worst_imbalance, r);
      if (r > tol_.imbalance) rep_.violations.push_back("perturbation imbalance at round " + std::to_string(k));
    }
    rep_.ok = rep_.violations.empty();
    return rep_;
  }

 private:
  int n_;
  InvariantTolerances tol_;
  Scalar floor_{0};
  bool started_ = false;
  RowVector<Scalar> mass0_;
  Scalar scale_x_{1};
  InvariantReport rep_;
};

/// Mass conservation for x and y, the y floor eta^N and the zero-sum of the
/// perturbation, over every recorded state.
template <typename Scalar>
InvariantReport check_invariants(const RunRecord<Scalar>& rec, double eta, InvariantTolerances tol = {}) {
  InvariantMonitor<Scalar> mon(rec.n(), eta, tol);
  for (const auto& s : rec.states) mon.observe(s);
  return mon.finish(rec);
}

}  // namespace privsum

#include <doctest.h>

#include <numeric>

#include "privsum/analysis.hpp"
#include "privsum/engine.hpp"

using namespace privsum;

namespace {

Eigen::MatrixXd dense(const Mixing& m) { return Eigen::MatrixXd(m); }

// The engine keeps 1 - (what was sent) rather than the stored diagonal, which
// differs from it by the rounding of the double weights.
Matrix<quad> kept_share(const Mixing& m) {
  Matrix<quad> d = dense(m).cast<quad>();
  d.diagonal().setZero();
  const RowVector<quad> sent = d.colwise().sum();
  for (Eigen::Index j = 0; j < d.cols(); ++j) d(j, j) = quad(1) - sent(j);
  return d;
}

template <typename S>
double rel(const Matrix<S>& a, const Matrix<S>& b) {
  return to_double(S((a - b).cwiseAbs().maxCoeff() / (S(1) + b.cwiseAbs().maxCoeff())));
}

Mixing on_graph(const Digraph& g, const Eigen::MatrixXd& d) {
  EdgeWeights w{Eigen::VectorXd(static_cast<Eigen::Index>(g.edge_count())), Eigen::VectorXd(g.size())};
  for (std::size_t e = 0; e < g.edge_count(); ++e) w.edge(static_cast<Eigen::Index>(e)) = d(g.edge(e).to, g.edge(e).from);
  for (int i = 0; i < g.size(); ++i) w.self(i) = d(i, i);
  return assemble_mixing(g, w);
}

const SigmaLaw sigma10 = SigmaLaw::normal(0.0, 10.0);

}  // namespace

TEST_CASE("conventional push-sum equals the product of its mixing matrices") {
  for (int n = 3; n <= 6; ++n) {
    const Digraph g = generate_ring_plus_random(n, 1, static_cast<std::uint64_t>(n));
    Rng rng(static_cast<std::uint64_t>(100 + n));
    const auto ws = build_conventional_weights(g, 0.5 * max_eta(g), 30, rng);
    Vector<double> x0(n);
    for (int i = 0; i < n; ++i) x0(i) = 3.0 * i - 4.0;
    const auto rec = run_push_sum<double>(g, x0, ws, 30);
    Eigen::MatrixXd phi = Eigen::MatrixXd::Identity(n, n);
    for (int k = 0; k <= 30; ++k) {
      const auto& s = rec.states[static_cast<std::size_t>(k)];
      const Eigen::VectorXd x = phi * x0;
      const Eigen::VectorXd y = phi * Eigen::VectorXd::Ones(n);
      CHECK(rel<double>(s.x, x) < 1e-12);
      CHECK(rel<double>(s.y, y) < 1e-12);
      CHECK(rel<double>(s.z, Eigen::MatrixXd(x.cwiseQuotient(y))) < 1e-12);
      if (k < 30) phi = dense(ws[static_cast<std::size_t>(k)]) * phi;
    }
  }
}

TEST_CASE("private update: perturbation rounds and plain rounds") {
  const Digraph g = reference_five_agent_graph();
  Rng rng(4);
  const auto s = build_schedule(g, 2, 0.01, 12, sigma10, {}, rng);
  Vector<quad> x0(5);
  x0 << 10, 15, 20, 25, 30;
  const auto rec = run_private_push_sum<quad>(g, x0, s, 12);
  for (int k = 0; k < 12; ++k) {
    const Eigen::MatrixXd c1 = dense(s.x_weights(k));
    const Matrix<quad> c2 = kept_share(s.y_weights[static_cast<std::size_t>(k)]);
    const Matrix<quad> x = rec.states[static_cast<std::size_t>(k)].x;
    const Matrix<quad> y = rec.states[static_cast<std::size_t>(k)].y;
    Matrix<quad> want_x;
    if (k <= 2) {
      // x + sigma (W - diag(colsum W)) x with W the off-diagonal part.
      Matrix<quad> l = c1.cast<quad>();
      l.diagonal().setZero();
      const RowVector<quad> out = l.colwise().sum();
      for (Eigen::Index j = 0; j < l.cols(); ++j) l(j, j) = -out(j);
      want_x = x + quad(s.sigma[static_cast<std::size_t>(k)]) * (l * x);
    } else {
      want_x = c2 * x;
    }
    CHECK(rel<quad>(rec.states[static_cast<std::size_t>(k + 1)].x, want_x) < 1e-25);
    CHECK(rel<quad>(rec.states[static_cast<std::size_t>(k + 1)].y, Matrix<quad>(c2 * y)) < 1e-25);
  }
}

TEST_CASE("private run conserves mass and reaches the average") {
  const Digraph g = reference_five_agent_graph();
  Rng rng(7);
  const auto s = build_schedule(g, 2, 0.01, 300, sigma10, {}, rng);
  Vector<quad> x0(5);
  x0 << 10, 15, 20, 25, 30;
  const auto rec = run_private_push_sum<quad>(g, x0, s, 300);
  const auto inv = check_invariants(rec, 0.01);
  CHECK(inv.ok);
  CHECK(inv.min_y_over_floor >= 1.0);
  CHECK(abs_of(quad(rec.final_state.z.maxCoeff() - 20)) < quad(1e-12));
  CHECK(abs_of(quad(rec.final_state.z.minCoeff() - 20)) < quad(1e-12));
  CHECK_FALSE(replay_transcript(rec).has_value());
}

TEST_CASE("invariant suite and replay catch tampering") {
  const Digraph g = reference_five_agent_graph();
  Rng rng(7);
  const auto s = build_schedule(g, 2, 0.01, 20, sigma10, {}, rng);
  Vector<quad> x0(5);
  x0 << 1, 2, 3, 4, 5;
  auto rec = run_private_push_sum<quad>(g, x0, s, 20);
  auto bad = rec;
  bad.states[6].x(2, 0) += quad(1);
  CHECK_FALSE(check_invariants(bad, 0.01).ok);
  CHECK(replay_transcript(bad).has_value());
  auto bad_msg = rec;
  bad_msg.messages[3].my(0) *= quad(1.5);
  CHECK(replay_transcript(bad_msg).has_value());
  auto low_y = rec;
  low_y.states[4].y(1) = quad(1e-30);
  CHECK_FALSE(check_invariants(low_y, 0.01).ok);
}

TEST_CASE("vector protocol with one coordinate reproduces the scalar protocol") {
  const Digraph g = generate_ring_plus_random(8, 2, 5);
  Rng a(3), b(3);
  const auto s = build_schedule(g, 3, 0.05, 50, sigma10, {}, a);
  const auto v = build_vector_schedule(g, 3, 0.05, 50, 1, sigma10, {}, b);
  Vector<quad> x0(8);
  for (int i = 0; i < 8; ++i) x0(i) = quad(i * i) - 7;
  const auto rs = run_private_push_sum<quad>(g, x0, s, 50);
  const auto rv = run_private_push_sum_vector<quad>(g, Matrix<quad>(x0), v, 50);
  for (std::size_t k = 0; k < rs.states.size(); ++k) {
    CHECK(rel<quad>(rv.states[k].x, rs.states[k].x) < 1e-12);
    CHECK(rel<quad>(rv.states[k].y, rs.states[k].y) < 1e-12);
  }
}

TEST_CASE("vector coordinates each reach their own average") {
  const Digraph g = reference_five_agent_graph();
  Rng rng(9);
  const auto v = build_vector_schedule(g, 2, 0.01, 300, 3, sigma10, {}, rng);
  Matrix<quad> x0(5, 3);
  for (int i = 0; i < 5; ++i)
    for (int l = 0; l < 3; ++l) x0(i, l) = quad(20 * l + i);
  const auto rec = run_private_push_sum_vector<quad>(g, x0, v, 300);
  const RowVector<quad> target = consensus_target<quad>(x0);
  CHECK(stopping_check(rec.final_state, target, 1e-9));
  CHECK(check_invariants(rec, 0.01).ok);
}

TEST_CASE("relabelling agents permutes the trajectory") {
  const Digraph g = generate_ring_plus_random(6, 2, 12);
  const std::vector<int> p{3, 0, 5, 1, 4, 2};
  std::vector<Edge> edges;
  for (const auto& e : g.edges()) edges.push_back({p[e.from], p[e.to]});
  const Digraph h(6, edges);
  Rng rng(13);
  const auto s = build_schedule(g, 2, 0.05, 40, sigma10, {}, rng);
  auto permute = [&](const Mixing& m) {
    const Eigen::MatrixXd d = dense(m);
    Eigen::MatrixXd q(6, 6);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) q(p[i], p[j]) = d(i, j);
    return on_graph(h, q);
  };
  WeightSchedule t = s;
  for (auto& m : t.y_weights) m = permute(m);
  for (auto& m : t.x_perturbation) m = permute(m);
  Vector<quad> x0(6), y0(6);
  for (int i = 0; i < 6; ++i) {
    x0(i) = quad(5 * i - 2);
    y0(p[i]) = x0(i);
  }
  const auto a = run_private_push_sum<quad>(g, x0, s, 40);
  const auto b = run_private_push_sum<quad>(h, y0, t, 40);
  for (std::size_t k = 0; k < a.states.size(); ++k) {
    Matrix<quad> back(6, 1);
    for (int i = 0; i < 6; ++i) back(i, 0) = b.states[k].x(p[i], 0);
    CHECK(rel<quad>(back, a.states[k].x) < 1e-25);
  }
}

TEST_CASE("sum-one baseline conserves mass") {
  const Digraph g = reference_five_agent_graph();
  Rng rng(2);
  const auto s = build_sum_one_schedule(g, 2, 0.01, 200, rng);
  Vector<quad> x0(5);
  x0 << 10, 15, 20, 25, 30;
  const auto rec = run_sum_one_push_sum<quad>(g, x0, s, 200);
  CHECK(check_invariants(rec, 0.01).ok);
  CHECK(stopping_check(rec.final_state, consensus_target<quad>(Matrix<quad>(x0)), 1e-6));
}

TEST_CASE("stopping rules") {
  NetworkState<double> a, b;
  a.z = Eigen::MatrixXd::Constant(3, 1, 2.0);
  b.z = a.z;
  b.z(1, 0) += 1e-7;
  RowVector<double> t(1);
  t << 2.0;
  CHECK(stopping_check(a, t, 1e-6));
  CHECK(stopping_check(b, t, 1e-6));
  CHECK_FALSE(stopping_check(b, t, 1e-8));
  CHECK(increment_check(a, b, 1e-6));
  CHECK_FALSE(increment_check(a, b, 1e-8));
}

TEST_CASE("engine preconditions") {
  const Digraph g = reference_five_agent_graph();
  Rng rng(1);
  const auto s = build_schedule(g, 2, 0.01, 10, sigma10, {}, rng);
  CHECK_THROWS_AS(run_private_push_sum<double>(g, Vector<double>::Ones(5), s, 11), Error);
  CHECK_THROWS_AS(run_private_push_sum<double>(g, Vector<double>::Ones(4), s, 10), Error);
  const auto v = build_vector_schedule(g, 2, 0.01, 10, 2, sigma10, {}, rng);
  CHECK_THROWS_AS(run_private_push_sum_vector<double>(g, Matrix<double>::Ones(5, 3), v, 10), Error);
  // Column sums of the y weights are checked.
  auto broken = s;
  broken.y_weights[4].coeffRef(0, 0) += 0.1;
  CHECK_THROWS_AS(run_private_push_sum<double>(g, Vector<double>::Ones(5), broken, 10), Error);
}

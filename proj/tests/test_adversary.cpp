#include <doctest.h>

#include "privsum/adversary.hpp"

using namespace privsum;

namespace {

const SigmaLaw sigma10 = SigmaLaw::normal(0.0, 10.0);

RunRecord<quad> g1_run(std::uint64_t seed, int rounds, const SigmaLaw& sigma = sigma10, int K = 2) {
  const Digraph g = reference_five_agent_graph();
  Rng rng(seed);
  const auto s = build_schedule(g, K, 0.01, rounds, sigma, {}, rng);
  Vector<quad> x0(5);
  x0 << 40, -3, 7.5, 11, -20;
  return run_private_push_sum<quad>(g, x0, s, rounds);
}

// Target 0 has out-neighbour 1 and in-neighbours 2, 3; with H = {1, 2},
// agent 3 is a legitimate in-neighbour only.
Digraph in_neighbour_graph() { return Digraph(4, {{0, 1}, {1, 2}, {2, 0}, {2, 3}, {3, 0}}); }

template <typename F>
Errc code_of(F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return Errc::io;
}

}  // namespace

TEST_CASE("hbc counts for one legitimate neighbour") {
  const auto run = g1_run(1, 201);
  const auto view = build_hbc_view(run, {3, 4});
  for (int M : {10, 50, 200}) {
    const auto r = hbc_attack(view, 0, M);
    CHECK(r.equations == 3 * M - 2 + 2);
    CHECK(r.unknowns == 4 * M + 5);
    CHECK(r.rank < r.unknowns);
    CHECK(r.underdetermined);
  }
  const auto k3 = g1_run(1, 60, sigma10, 3);
  const auto r = hbc_attack(build_hbc_view(k3, {3, 4}), 0, 40);
  CHECK(r.equations == 3 * 40 - 3 + 2);
  CHECK(r.unknowns == 4 * 40 + 5);
}

TEST_CASE("hbc system is consistent with the true trajectory") {
  // The residual of the least-squares fit must vanish: the truth solves it.
  const auto run = g1_run(2, 60);
  const auto r = hbc_attack(build_hbc_view(run, {3, 4}), 0, 50);
  CHECK(r.residual < 1e-6);
}

TEST_CASE("hbc estimates move with the schedule") {
  std::vector<double> est;
  for (std::uint64_t s = 0; s < 8; ++s) {
    const auto run = g1_run(10 + s, 41);
    est.push_back(hbc_attack(build_hbc_view(run, {3, 4}), 0, 40).estimate);
  }
  const auto [lo, hi] = std::minmax_element(est.begin(), est.end());
  CHECK(*hi - *lo > 1.0);
}

TEST_CASE("coalition and target checks") {
  const auto run = g1_run(3, 20);
  CHECK(code_of([&] { build_hbc_view(run, {}); }) == Errc::empty_coalition);
  CHECK(code_of([&] { build_hbc_view(run, {0, 1, 2, 3, 4}); }) == Errc::coalition_is_everything);
  const auto view = build_hbc_view(run, {3, 4});
  CHECK(code_of([&] { hbc_attack(view, 3, 10); }) == Errc::target_compromised);
  CHECK(code_of([&] { hbc_attack(view, 0, 25); }) == Errc::schedule_too_short);
  CHECK(code_of([&] { full_neighborhood_reconstruction(view, 0); }) == Errc::neighborhood_not_covered);
}

TEST_CASE("view excludes what the coalition cannot see") {
  const auto run = g1_run(4, 10);
  const auto v = build_hbc_view(run, {3, 4});
  for (auto e : v.sent_edges) CHECK(v.is_member(v.graph.edge(e).from));
  for (auto e : v.received_edges) {
    CHECK(v.is_member(v.graph.edge(e).to));
    CHECK_FALSE(v.is_member(v.graph.edge(e).from));
  }
  // Edge 1 -> 2 (0-based 0 -> 1) is between legitimate agents.
  const auto e01 = *v.graph.edge_index(0, 1);
  CHECK(std::find(v.sent_edges.begin(), v.sent_edges.end(), e01) == v.sent_edges.end());
  CHECK(std::find(v.received_edges.begin(), v.received_edges.end(), e01) == v.received_edges.end());
}

TEST_CASE("full neighbourhood reconstruction is exact") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto run = g1_run(20 + s, 6);
    const quad est = full_neighborhood_reconstruction(build_hbc_view(run, {1, 3, 4}), 0);
    CHECK(to_double(abs_of(quad(est - 40))) < 1e-20);
  }
}

TEST_CASE("eavesdropper recovers y and the late x of the target") {
  const auto run = g1_run(5, 30);
  const auto ev = build_eve_view(run);
  const auto rec = recover_eve_states(ev, 0, 2);
  for (int k = 0; k < 30; ++k) {
    CHECK(to_double(abs_of(quad(rec.y(k) - run.states[k].y(0)))) < 1e-9);
    if (k >= 3) CHECK(to_double(abs_of(quad(rec.x(k) - run.states[k].x(0, 0)))) < 1e-9 * (1 + to_double(abs_of(run.states[k].x(0, 0)))));
  }
}

TEST_CASE("eavesdropper estimate is the minimum-norm solution of one equation") {
  const auto run = g1_run(6, 30);
  const auto ev = build_eve_view(run);
  const auto r = eve_attack(ev, 0, 29, 2);
  CHECK(r.equations == 1);
  CHECK(r.unknowns == 4);
  CHECK(r.underdetermined);
  const auto rec = recover_eve_states(ev, 0, 2);
  double norm2 = 1.0;
  for (int k = 0; k <= 2; ++k) norm2 += to_double(rec.delta_x(k)) * to_double(rec.delta_x(k));
  CHECK(r.estimate == doctest::Approx(to_double(rec.x(3)) / norm2).epsilon(1e-9));
}

TEST_CASE("sigma = 1 lets the eavesdropper invert exactly") {
  const auto run = g1_run(7, 10, SigmaLaw::constant(1.0));
  CHECK(to_double(abs_of(quad(eve_reconstruction_sigma1_checked(run, 0) - 40))) < 1e-20);
  const auto noisy = g1_run(7, 10);
  CHECK(code_of([&] { eve_reconstruction_sigma1_checked(noisy, 0); }) == Errc::sigma_not_unity);
}

TEST_CASE("deniable run: legitimate out-neighbour") {
  const auto run = g1_run(8, 40);
  const auto hv = build_hbc_view(run, {3, 4});
  Rng rng(1);
  for (double delta : {-5.0, 3.7, 100.0, 1e6}) {
    const auto alt = construct_deniable_run_hbc(run, {3, 4}, 0, 1, delta, rng);
    CHECK(alt.which_case == 1);
    CHECK(to_double(alt.x0(0, 0)) == doctest::Approx(40 + delta));
    CHECK(to_double(quad(alt.x0.sum() - run.states[0].x.sum())) == 0.0);
    const auto other = replay(run, alt);
    CHECK(max_view_deviation(hv, build_hbc_view(other, {3, 4})) < 1e-9);
    // The legitimate neighbour's own messages do change.
    CHECK((other.messages[0].mx - run.messages[0].mx).cwiseAbs().maxCoeff() > quad(0));
  }
}

TEST_CASE("deniable run: legitimate in-neighbour") {
  const Digraph g = in_neighbour_graph();
  Rng rng(3);
  const auto s = build_schedule(g, 2, 0.05, 30, sigma10, {}, rng);
  Vector<quad> x0(4);
  x0 << 9, 1, 2, 3;
  const auto run = run_private_push_sum<quad>(g, x0, s, 30);
  const auto hv = build_hbc_view(run, {1, 2});
  for (double delta : {-5.0, 3.7, 100.0}) {
    const auto alt = construct_deniable_run_hbc(run, {1, 2}, 0, 3, delta, rng);
    CHECK(alt.which_case == 2);
    CHECK(max_view_deviation(hv, build_hbc_view(replay(run, alt), {1, 2})) < 1e-9);
  }
}

TEST_CASE("deniable run: eavesdropper") {
  const auto run = g1_run(9, 40);
  const auto ev = build_eve_view(run);
  Rng rng(2);
  for (double ds : {0.5, -2.0, 10.0}) {
    const auto alt = construct_deniable_run_eve(run, ds, rng);
    CHECK((alt.x0 - run.states[0].x).cwiseAbs().maxCoeff() > quad(0));
    CHECK(to_double(alt.sigma0) == doctest::Approx(to_double(run.weights->gains[0](0)) - ds));
    CHECK(max_view_deviation(ev, build_eve_view(replay(run, alt))) < 1e-9);
  }
}

TEST_CASE("deniability preconditions") {
  const auto run = g1_run(10, 20);
  Rng rng(1);
  CHECK(code_of([&] { construct_deniable_run_hbc(run, {3, 4}, 0, 1, 0.0, rng); }) == Errc::degenerate_delta);
  CHECK(code_of([&] { construct_deniable_run_hbc(run, {3, 4}, 0, 2, 1.0, rng); }) == Errc::no_legitimate_neighbor);
  CHECK(code_of([&] { construct_deniable_run_eve(run, 0.0, rng); }) == Errc::degenerate_delta_sigma);
}

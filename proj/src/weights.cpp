#include "privsum/weights.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "privsum/error.hpp"

namespace privsum {

namespace {

// Builds a matrix on the support of g; `fill(j, slots)` writes the weights of
// column j, where slot 0 is the diagonal and slot s > 0 the s-th out-edge.
template <typename Fill>
Mixing build_on_support(const Digraph& g, Fill&& fill) {
  const int n = g.size();
  Mixing m(n, n);
  Eigen::VectorXi reserve(n);
  for (int j = 0; j < n; ++j) reserve(j) = static_cast<int>(g.out_neighbors(j).size()) + 1;
  m.reserve(reserve);

  std::vector<double> slots;
  for (int j = 0; j < n; ++j) {
    const auto out = g.out_neighbors(j);
    slots.assign(out.size() + 1, 0.0);
    fill(j, slots);
    // Inner indices must be inserted in ascending row order.
    bool self_done = false;
    for (std::size_t s = 0; s < out.size(); ++s) {
      if (!self_done && j < out[s]) {
        m.insert(j, j) = slots[0];
        self_done = true;
      }
      m.insert(out[s], j) = slots[s + 1];
    }
    if (!self_done) m.insert(j, j) = slots[0];
  }
  m.makeCompressed();
  return m;
}

void check_eta(const Digraph& g, double eta) {
  const double bound = max_eta(g);
  if (!(eta > 0.0) || !(eta < bound)) {
    throw Error(Errc::eta_too_large,
                "eta must lie in (0, " + std::to_string(bound) + "), got " + std::to_string(eta));
  }
}

// Three independent streams so that changing K leaves the y weights and the
// shared perturbation prefix untouched.
struct Streams {
  Rng y;
  Rng x;
  Rng gain;
};

Streams split_streams(Rng& rng) {
  const auto a = rng();
  const auto b = rng();
  const auto c = rng();
  return {Rng(a), Rng(b), Rng(c)};
}

double draw_nonzero_gain(const SigmaLaw& law, Rng& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double s = law.draw(rng);
    if (s != 0.0) return s;
  }
  throw Error(Errc::bad_sigma, "sigma(0) keeps drawing zero");
}

void check_horizon(int horizon, int rounds) {
  if (horizon < 1) throw Error(Errc::bad_config, "K must be >= 1");
  if (rounds <= horizon + 1) {
    throw Error(Errc::schedule_too_short, "rounds must exceed K+1");
  }
}

}  // namespace

EdgeWeights split_weights(const Digraph& g, const Mixing& m) {
  const int n = g.size();
  if (m.rows() != n || m.cols() != n || !on_support(g, m)) {
    throw Error(Errc::schedule_mismatch, "mixing matrix is not stored on the graph support");
  }
  EdgeWeights w{Eigen::VectorXd(static_cast<Eigen::Index>(g.edge_count())), Eigen::VectorXd(n)};
  Eigen::Index e = 0;
  for (int j = 0; j < n; ++j) {
    for (Mixing::InnerIterator it(m, j); it; ++it) {
      if (it.row() == j) {
        w.self(j) = it.value();
      } else {
        w.edge(e++) = it.value();
      }
    }
  }
  return w;
}

Mixing assemble_mixing(const Digraph& g, const EdgeWeights& w) {
  return build_on_support(g, [&](int j, std::vector<double>& slots) {
    slots[0] = w.self(j);
    const auto out = g.out_edges(j);
    for (std::size_t s = 0; s < out.size(); ++s) slots[s + 1] = w.edge(static_cast<Eigen::Index>(out[s]));
  });
}

bool on_support(const Digraph& g, const Mixing& m) {
  if (m.rows() != g.size() || m.cols() != g.size()) return false;
  for (int j = 0; j < g.size(); ++j) {
    const auto out = g.out_neighbors(j);
    std::size_t s = 0;
    bool self_seen = false;
    for (Mixing::InnerIterator it(m, j); it; ++it) {
      const auto row = static_cast<int>(it.row());
      if (row == j) {
        if (self_seen) return false;
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

double max_eta(const Digraph& g) { return 1.0 / (g.max_out_degree() + 1.0); }

Mixing generate_c2_round(const Digraph& g, double eta, Rng& rng) {
  check_eta(g, eta);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> cuts;
  return build_on_support(g, [&](int, std::vector<double>& slots) {
    const auto d = slots.size();
    // Uniform point of the (d-1)-simplex from sorted-uniform gaps, then
    // shifted so every entry exceeds eta and the column still sums to one.
    const double free_mass = 1.0 - static_cast<double>(d) * eta;
    for (;;) {
      cuts.assign(1, 0.0);
      for (std::size_t s = 0; s + 1 < d; ++s) cuts.push_back(unit(rng));
      cuts.push_back(1.0);
      std::sort(cuts.begin(), cuts.end());
      bool degenerate = false;
      for (std::size_t s = 0; s < d; ++s) {
        const double gap = cuts[s + 1] - cuts[s];
        degenerate = degenerate || gap <= 0.0;
        slots[s] = eta + free_mass * gap;
      }
      if (!degenerate) break;
    }
  });
}

Mixing generate_c1_perturbation_round(const Digraph& g, double lo, double hi, Rng& rng) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw Error(Errc::bad_range, "need lo < hi, got (" + std::to_string(lo) + ", " + std::to_string(hi) + ")");
  }
  std::uniform_real_distribution<double> uniform(lo, hi);
  return build_on_support(g, [&](int, std::vector<double>& slots) {
    for (auto& s : slots) s = uniform(rng);
  });
}

Mixing generate_protocol1_round(const Digraph& g, Rng& rng, double spread) {
  if (!(spread > 0.0)) throw Error(Errc::bad_range, "spread must be positive");
  std::uniform_real_distribution<double> uniform(-spread, spread);
  return build_on_support(g, [&](int, std::vector<double>& slots) {
    double partial = 0.0;
    for (std::size_t s = 1; s < slots.size(); ++s) {
      slots[s] = uniform(rng);
      partial += slots[s];
    }
    slots[0] = 1.0 - partial;
  });
}

SigmaLaw::SigmaLaw(bool constant, double mean, double variance)
    : constant_(constant), mean_(mean), variance_(variance) {}

SigmaLaw SigmaLaw::normal(double mean, double variance) {
  if (!(variance > 0.0)) throw Error(Errc::bad_sigma, "variance must be positive");
  return SigmaLaw(false, mean, variance);
}

SigmaLaw SigmaLaw::constant(double value) {
  if (value == 0.0) throw Error(Errc::bad_sigma, "a constant zero gain disables the perturbation");
  return SigmaLaw(true, value, 0.0);
}

double SigmaLaw::draw(Rng& rng) const {
  if (constant_) return mean_;
  std::normal_distribution<double> normal(mean_, std::sqrt(variance_));
  return normal(rng);
}

const Mixing& WeightSchedule::x_weights(int k) const {
  const auto idx = static_cast<std::size_t>(k);
  return k <= horizon ? x_perturbation.at(idx) : y_weights.at(idx);
}

WeightSchedule build_schedule(const Digraph& g, int horizon, double eta, int rounds, const SigmaLaw& sigma,
                              WeightRange c1_range, Rng& rng) {
  check_horizon(horizon, rounds);
  check_eta(g, eta);
  auto streams = split_streams(rng);

  WeightSchedule s;
  s.horizon = horizon;
  s.eta = eta;
  s.y_weights.reserve(static_cast<std::size_t>(rounds));
  for (int k = 0; k < rounds; ++k) s.y_weights.push_back(generate_c2_round(g, eta, streams.y));
  for (int k = 0; k <= horizon; ++k) {
    s.x_perturbation.push_back(generate_c1_perturbation_round(g, c1_range.lo, c1_range.hi, streams.x));
    s.sigma.push_back(k == 0 ? draw_nonzero_gain(sigma, streams.gain) : sigma.draw(streams.gain));
  }
  return s;
}

VectorWeightSchedule build_vector_schedule(const Digraph& g, int horizon, double eta, int rounds, int dim,
                                           const SigmaLaw& sigma, WeightRange c1_range, Rng& rng) {
  check_horizon(horizon, rounds);
  check_eta(g, eta);
  if (dim < 1) throw Error(Errc::dimension_mismatch, "dimension must be >= 1");
  auto streams = split_streams(rng);

  VectorWeightSchedule s;
  s.horizon = horizon;
  s.eta = eta;
  s.dim = dim;
  s.y_weights.reserve(static_cast<std::size_t>(rounds));
  for (int k = 0; k < rounds; ++k) s.y_weights.push_back(generate_c2_round(g, eta, streams.y));
  for (int k = 0; k <= horizon; ++k) {
    std::vector<Mixing> per_coord;
    Eigen::VectorXd gain(dim);
    for (int l = 0; l < dim; ++l) {
      per_coord.push_back(generate_c1_perturbation_round(g, c1_range.lo, c1_range.hi, streams.x));
    }
    for (int l = 0; l < dim; ++l) {
      gain(l) = k == 0 ? draw_nonzero_gain(sigma, streams.gain) : sigma.draw(streams.gain);
    }
    s.x_perturbation.push_back(std::move(per_coord));
    s.gains.push_back(std::move(gain));
  }
  return s;
}

std::vector<Mixing> build_conventional_weights(const Digraph& g, double eta, int rounds, Rng& rng) {
  std::vector<Mixing> out;
  out.reserve(static_cast<std::size_t>(rounds));
  for (int k = 0; k < rounds; ++k) out.push_back(generate_c2_round(g, eta, rng));
  return out;
}

SumOneSchedule build_sum_one_schedule(const Digraph& g, int horizon, double eta, int rounds, Rng& rng) {
  check_horizon(horizon, rounds);
  auto streams = split_streams(rng);
  SumOneSchedule s;
  s.horizon = horizon;
  for (int k = 0; k < rounds; ++k) s.y_weights.push_back(generate_c2_round(g, eta, streams.y));
  for (int k = 0; k < rounds; ++k) {
    s.x_weights.push_back(k <= horizon ? generate_protocol1_round(g, streams.x)
                                       : s.y_weights[static_cast<std::size_t>(k)]);
  }
  return s;
}

bool validate_column_stochastic(const Eigen::MatrixXd& m, double tol) {
  if (m.rows() != m.cols()) return false;
  if ((m.array() < 0.0).any()) return false;
  return ((m.colwise().sum().array() - 1.0).abs() <= tol).all();
}

bool validate_column_stochastic(const Mixing& m, double tol) {
  if (m.rows() != m.cols()) return false;
  for (Eigen::Index j = 0; j < m.outerSize(); ++j) {
    double sum = 0.0;
    for (Mixing::InnerIterator it(m, j); it; ++it) {
      if (it.value() < 0.0) return false;
      sum += it.value();
    }
    if (std::abs(sum - 1.0) > tol) return false;
  }
  return true;
}

}  // namespace privsum

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "privsum/graph.hpp"

namespace privsum {

using Rng = std::mt19937_64;

/// Per-round mixing matrix. Column j holds the weights agent j applies to
/// what it pushes: entry (i, j) scales agent j's value on edge j -> i and
/// (j, j) is the share it keeps. Stored on the support N_j^out u {j} only,
/// with every supported slot present even when its value is zero.
using Mixing = Eigen::SparseMatrix<double>;

/// Edge-indexed split of a mixing matrix: `edge[e]` is the weight on
/// canonical edge e, `self[i]` the diagonal entry of agent i.
struct EdgeWeights {
  Eigen::VectorXd edge;
  Eigen::VectorXd self;
};

/// Throws ScheduleMismatch if the matrix is not stored exactly on the
/// support of g.
EdgeWeights split_weights(const Digraph& g, const Mixing& m);
Mixing assemble_mixing(const Digraph& g, const EdgeWeights& w);
bool on_support(const Digraph& g, const Mixing& m);

/// Largest admissible eta: 1 / (max_i |N_i^out| + 1).
double max_eta(const Digraph& g);

/// Column-stochastic, every supported entry in (eta, 1). Throws EtaTooLarge
/// unless 0 < eta < max_eta(g).
Mixing generate_c2_round(const Digraph& g, double eta, Rng& rng);

/// Supported entries i.i.d. uniform on (lo, hi), no sum constraint.
Mixing generate_c1_perturbation_round(const Digraph& g, double lo, double hi, Rng& rng);

/// Arbitrary real weights whose columns sum to exactly one: every slot but
/// the diagonal is uniform on (-spread, spread), the diagonal closes the sum.
Mixing generate_protocol1_round(const Digraph& g, Rng& rng, double spread = 100.0);

/// Law for the public perturbation gain sigma(k).
class SigmaLaw {
 public:
  static SigmaLaw normal(double mean, double variance);
  static SigmaLaw constant(double value);

  double draw(Rng& rng) const;
  bool is_constant() const noexcept { return constant_; }
  double mean() const noexcept { return mean_; }
  double variance() const noexcept { return variance_; }

 private:
  SigmaLaw(bool constant, double mean, double variance);

  bool constant_;
  double mean_;
  double variance_;
};

struct WeightRange {
  double lo = -100.0;
  double hi = 100.0;
};

/// Weights for the scalar private protocol.
struct WeightSchedule {
  int horizon = 1;                     // K
  double eta = 0.0;
  std::vector<Mixing> y_weights;       // C2(k), every round
  std::vector<Mixing> x_perturbation;  // C1(k) for k = 0..K
  std::vector<double> sigma;           // sigma(k) for k = 0..K

  int rounds() const noexcept { return static_cast<int>(y_weights.size()); }
  /// C1(k): the perturbation weights up to K, C2(k) afterwards.
  const Mixing& x_weights(int k) const;
};

/// Weights for the vector-state protocol. Coordinate l of every agent uses
/// its own perturbation matrix and gain during the first K+1 rounds.
struct VectorWeightSchedule {
  int horizon = 1;
  double eta = 0.0;
  int dim = 1;
  std::vector<Mixing> y_weights;                    // every round
  std::vector<std::vector<Mixing>> x_perturbation;  // [k][l], k = 0..K
  std::vector<Eigen::VectorXd> gains;               // diag Lambda(k), k = 0..K

  int rounds() const noexcept { return static_cast<int>(y_weights.size()); }
};

/// Draws the three random streams (y weights, x perturbation, gains) from
/// independent generators seeded off `rng`. Schedules built from the same
/// rng state with different K therefore share their y weights and the
/// common prefix of their perturbation rounds. sigma(0) == 0 is redrawn.
WeightSchedule build_schedule(const Digraph& g, int horizon, double eta, int rounds,
                              const SigmaLaw& sigma, WeightRange c1_range, Rng& rng);

/// Same streams as build_schedule; with dim == 1 the result carries exactly
/// the weights and gains of the scalar schedule built from the same state.
VectorWeightSchedule build_vector_schedule(const Digraph& g, int horizon, double eta, int rounds, int dim,
                                           const SigmaLaw& sigma, WeightRange c1_range, Rng& rng);

/// Column-stochastic rounds for the conventional protocol.
std::vector<Mixing> build_conventional_weights(const Digraph& g, double eta, int rounds, Rng& rng);

/// Sum-one baseline: x weights drawn by generate_protocol1_round for k <= K
/// and equal to the y weights afterwards.
struct SumOneSchedule {
  int horizon = 1;
  std::vector<Mixing> x_weights;
  std::vector<Mixing> y_weights;
};
SumOneSchedule build_sum_one_schedule(const Digraph& g, int horizon, double eta, int rounds, Rng& rng);

bool validate_column_stochastic(const Eigen::MatrixXd& m, double tol);
bool validate_column_stochastic(const Mixing& m, double tol);

}  // namespace privsum

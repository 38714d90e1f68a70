#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "privsum/engine.hpp"
#include "privsum/error.hpp"
#include "privsum/scalar.hpp"

namespace privsum {

/// Average of the initial rows, the value every z_i should reach.
template <typename Scalar>
RowVector<Scalar> consensus_target(const Matrix<Scalar>& x0) {
  return x0.colwise().mean();
}

/// |z - 1 (x) target|, the Euclidean norm over all agents and coordinates.
template <typename Scalar>
Scalar consensus_error(const NetworkState<Scalar>& s, const RowVector<Scalar>& target) {
  return (s.z.rowwise() - target).norm();
}

/// e(k) for every recorded round.
template <typename Scalar>
std::vector<Scalar> consensus_error(const RunRecord<Scalar>& rec) {
  if (rec.states.empty()) throw Error(Errc::bad_config, "run has no recorded states");
  const RowVector<Scalar> target = consensus_target<Scalar>(rec.states.front().x);
  std::vector<Scalar> out;
  out.reserve(rec.states.size());
  for (const auto& s : rec.states) out.push_back(consensus_error(s, target));
  return out;
}

/// First k with e(k) < eps, if any.
template <typename Scalar>
std::optional<int> first_round_below(const std::vector<Scalar>& series, double eps) {
  for (std::size_t k = 0; k < series.size(); ++k) {
    if (series[k] < Scalar(eps)) return static_cast<int>(k);
  }
  return std::nullopt;
}

/// (1 - eta^(N-1))^(1/(N-1)), evaluated through log1p so that tiny eta does
/// not round to exactly 1.
template <typename Scalar>
Scalar theoretical_rho(int n, double eta) {
  if (n <= 2) throw Error(Errc::too_few_agents, "rate needs N > 2");
  if (!(eta > 0.0 && eta < 1.0)) throw Error(Errc::bad_range, "eta must lie in (0, 1)");
  using std::exp;
  using std::pow;
  const Scalar m = Scalar(n - 1);
  return exp(log1p_of(Scalar(-pow(Scalar(eta), Scalar(n - 1)))) / m);
}

template <typename Scalar>
struct RateBound {
  Scalar rho{0};
  Scalar c0{0}, c1{0}, c2{0}, c3{0}, c{0};
  double eta = 0.0;
  int n = 0;
  int horizon = 0;
  int dim = 1;
  /// |x(k)|_1 for k = 0..K+1, one row per coordinate.
  std::vector<std::vector<Scalar>> x_l1_norms;
};

/// Constants of the envelope c rho^k. With d coordinates each coordinate
/// gets its own c and the envelope of the stacked error is sqrt(d) times the
/// largest of them.
template <typename Scalar>
RateBound<Scalar> bound_constants(const RunRecord<Scalar>& rec, double eta) {
  const int n = rec.n();
  const int horizon = std::max(rec.config.horizon, 0);
  if (static_cast<int>(rec.states.size()) < horizon + 2) {
    throw Error(Errc::schedule_too_short, "bound needs states up to round K+1");
  }
  using std::pow;
  using std::sqrt;
  RateBound<Scalar> b;
  b.eta = eta;
  b.n = n;
  b.horizon = horizon;
  b.dim = rec.dim();
  b.rho = theoretical_rho<Scalar>(n, eta);

  const Scalar sn = sqrt(Scalar(n));
  const Scalar eta_n = pow(Scalar(eta), Scalar(n));
  // 1 - rho^(N-1) is eta^(N-1) by definition of rho.
  const Scalar eta_n1 = pow(Scalar(eta), Scalar(n - 1));
  const Scalar rho_n1 = Scalar(1) - eta_n1;
  b.c0 = Scalar(2) * (Scalar(1) + Scalar(1) / rho_n1) / eta_n1;
  b.c2 = Scalar(2) * sn / eta_n - Scalar(n - 1) / sn;
  b.c3 = b.c0 / (sn * eta_n * b.rho);

  Scalar worst_c{0}, worst_c1{0};
  for (int l = 0; l < b.dim; ++l) {
    std::vector<Scalar> norms;
    for (int k = 0; k <= horizon + 1; ++k) {
      norms.push_back(rec.states[static_cast<std::size_t>(k)].x.col(l).cwiseAbs().sum());
    }
    const Scalar c1 = Scalar(2) * sn * b.c0 * norms.back() / eta_n * pow(b.rho, Scalar(-(horizon + 2)));
    Scalar c = c1;
    for (int t = 0; t <= horizon + 1; ++t) {
      const Scalar cand = (b.c2 * pow(b.rho, Scalar(-t)) + b.c3) * norms[static_cast<std::size_t>(t)];
      if (cand > c) c = cand;
    }
    if (c1 > worst_c1) worst_c1 = c1;
    if (c > worst_c) worst_c = c;
    b.x_l1_norms.push_back(std::move(norms));
  }
  b.c1 = worst_c1;
  b.c = sqrt(Scalar(b.dim)) * worst_c;
  return b;
}

struct BoundCheck {
  bool holds = true;
  int worst_k = 0;
  double worst_ratio = 0.0;  // max_k e(k) / (c rho^k)
};

template <typename Scalar>
BoundCheck verify_bound(const std::vector<Scalar>& series, const RateBound<Scalar>& b) {
  BoundCheck out;
  using std::pow;
  Scalar worst{-1};
  for (std::size_t k = 0; k < series.size(); ++k) {
    const Scalar env = b.c * pow(b.rho, Scalar(static_cast<double>(k)));
    const Scalar ratio = series[k] / env;
    if (ratio > worst) {
      worst = ratio;
      out.worst_k = static_cast<int>(k);
    }
    if (series[k] > env * Scalar(1.0 + 1e-9)) out.holds = false;
  }
  out.worst_ratio = to_double(worst);
  return out;
}

struct RateFit {
  double factor = 0.0;          // exp(slope of log e(k))
  int points = 0;
  bool exact_convergence = false;  // every tail entry was zero
};

/// Least-squares slope of log e(k) over the last `tail_fraction` of the
/// series. With floor_rel > 0 the series is first cut where e(k) falls to
/// floor_rel * max_k e(k) for good, so the round-off floor (which scales with
/// the largest state seen, not with e(0)) does not flatten the fit.
template <typename Scalar>
RateFit fit_linear_rate(const std::vector<Scalar>& series, double tail_fraction, double floor_rel = 0.0) {
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) throw Error(Errc::bad_range, "tail_fraction must lie in (0, 1]");
  if (series.empty()) throw Error(Errc::non_positive_error, "empty series");
  const Scalar cut = Scalar(floor_rel) * *std::max_element(series.begin(), series.end());
  std::size_t count = series.size();
  if (floor_rel > 0.0) {
    while (count > 0 && series[count - 1] <= cut) --count;
  }
  const auto tail = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(count))));
  const std::size_t start = count > tail ? count - tail : 0;

  std::vector<double> ks, logs;
  bool any_zero = false;
  for (std::size_t k = start; k < count; ++k) {
    if (series[k] < Scalar(0)) throw Error(Errc::non_positive_error, "negative error at round " + std::to_string(k));
    if (series[k] == Scalar(0)) {
      any_zero = true;
      continue;
    }
    using std::log;
    ks.push_back(static_cast<double>(k));
    logs.push_back(to_double(Scalar(log(series[k]))));
  }
  RateFit fit;
  fit.points = static_cast<int>(ks.size());
  if (ks.size() < 2) {
    if (ks.empty() && (any_zero || count == 0)) {
      fit.exact_convergence = true;
      return fit;
    }
    throw Error(Errc::non_positive_error, "fewer than two usable points in the tail");
  }
  Eigen::MatrixXd a(static_cast<Eigen::Index>(ks.size()), 2);
  Eigen::VectorXd b(static_cast<Eigen::Index>(ks.size()));
  for (std::size_t i = 0; i < ks.size(); ++i) {
    a(static_cast<Eigen::Index>(i), 0) = ks[i];
    a(static_cast<Eigen::Index>(i), 1) = 1.0;
    b(static_cast<Eigen::Index>(i)) = logs[i];
  }
  const Eigen::Vector2d coef = a.colPivHouseholderQr().solve(b);
  fit.factor = std::exp(coef(0));
  return fit;
}

}  // namespace privsum

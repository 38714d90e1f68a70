#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace privsum {

enum class Errc {
  self_loop,
  duplicate_edge,
  endpoint_out_of_range,
  too_few_agents,
  infeasible_degree,
  eta_too_large,
  bad_range,
  bad_sigma,
  schedule_too_short,
  not_column_stochastic,
  schedule_mismatch,
  dimension_mismatch,
  empty_coalition,
  coalition_is_everything,
  target_compromised,
  neighborhood_not_covered,
  sigma_not_unity,
  no_legitimate_neighbor,
  degenerate_delta,
  zero_divisor_initial,
  zero_initial_value,
  degenerate_delta_sigma,
  non_finite,
  non_positive_error,
  bad_config,
  io,
};

std::string_view to_string(Errc code) noexcept;

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace privsum

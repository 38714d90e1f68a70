#include "privsum/error.hpp"

namespace privsum {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::self_loop: return "SelfLoop";
    case Errc::duplicate_edge: return "DuplicateEdge";
    case Errc::endpoint_out_of_range: return "EndpointOutOfRange";
    case Errc::too_few_agents: return "TooFewAgents";
    case Errc::infeasible_degree: return "InfeasibleDegree";
    case Errc::eta_too_large: return "EtaTooLarge";
    case Errc::bad_range: return "BadRange";
    case Errc::bad_sigma: return "BadSigma";
    case Errc::schedule_too_short: return "ScheduleTooShort";
    case Errc::not_column_stochastic: return "NotColumnStochastic";
    case Errc::schedule_mismatch: return "ScheduleMismatch";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::empty_coalition: return "EmptyH";
    case Errc::coalition_is_everything: return "HIsEverything";
    case Errc::target_compromised: return "TargetCompromised";
    case Errc::neighborhood_not_covered: return "NeighborhoodNotCovered";
    case Errc::sigma_not_unity: return "SigmaNotUnity";
    case Errc::no_legitimate_neighbor: return "NoLegitimateNeighbor";
    case Errc::degenerate_delta: return "DegenerateDelta";
    case Errc::zero_divisor_initial: return "ZeroDivisorInitial";
    case Errc::zero_initial_value: return "ZeroInitialValue";
    case Errc::degenerate_delta_sigma: return "DegenerateDeltaSigma";
    case Errc::non_finite: return "NonFinite";
    case Errc::non_positive_error: return "NonPositiveError";
    case Errc::bad_config: return "BadConfig";
    case Errc::io: return "IoError";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

}  // namespace privsum

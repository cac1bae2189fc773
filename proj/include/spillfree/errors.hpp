#pragma once

#include <stdexcept>
#include <string>

namespace spillfree {

/// Argument outside the mathematical domain of an operation.
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A liquid level became non-positive; the model presupposes h > 0.
struct PositivityViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The strict gain admissibility inequality on k failed.
struct GainConditionViolated : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The derived decay constant omega is non-positive; no certificate exists
/// for this parameter/gain combination.
struct DesignInfeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A small-state hypothesis (tolerance bound or norm bound) does not hold.
struct HypothesisViolated : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The requested settling tolerance is too large for the admissible region.
struct ToleranceTooLarge : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The planner search exhausted its ladder without an admissible gain set.
struct NoFeasibleGain : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace spillfree

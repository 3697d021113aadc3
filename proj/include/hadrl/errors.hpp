#pragma once

#include <stdexcept>
#include <string>

namespace hadrl {

/// Scenario or run configuration violates an invariant. The message names it.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-finite values reached an update.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A bounded computation (e.g. the search oracle) ran out of budget.
struct ResourceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// The goal cannot be reached from the start state.
struct UnreachableError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// API used out of protocol, e.g. stepping a finished episode.
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

}  // namespace hadrl

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace oblivagg {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid construction arguments: non-prime modulus, K < 2, L < 1, bad ids.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Two vectors live in different fields.
class SpecMismatchError : public Error {
public:
    using Error::Error;
};

/// Two vectors (or a vector and a session) disagree on length.
class LengthMismatchError : public Error {
public:
    using Error::Error;
};

/// An aggregate over zero vectors was requested.
class EmptyAggregateError : public Error {
public:
    using Error::Error;
};

/// Base for violations of the two-phase exchange contract.
class ProtocolError : public Error {
public:
    using Error::Error;
};

/// Operation invoked in the wrong state-machine phase.
class PhaseError : public ProtocolError {
public:
    using ProtocolError::ProtocolError;
};

/// A user key does not belong to this session or user.
class KeyMismatchError : public ProtocolError {
public:
    using ProtocolError::ProtocolError;
};

/// Malformed survivor set, or a reply addressed outside of it.
class SurvivorSetError : public ProtocolError {
public:
    using ProtocolError::ProtocolError;
};

/// The no-dropout scheme was asked to serve a session that lost users.
/// Its keys carry only the full-group noise total, so subset sums are
/// undecodable; failing loudly is the only correct behavior.
class DroppedUserUnderNoDropoutScheme : public ProtocolError {
public:
    using ProtocolError::ProtocolError;
};

/// Malformed bytes: truncation, range violations, bad magic or tags.
class WireFormatError : public Error {
public:
    using Error::Error;
};

/// An exhaustive audit would need more states than the configured budget.
class BudgetExceededError : public Error {
public:
    BudgetExceededError(std::uint64_t required, std::uint64_t budget, bool saturated = false)
        : Error("audit requires " + std::string(saturated ? "more than " : "") +
                std::to_string(required) + " states, budget is " + std::to_string(budget)),
          required_states(required),
          budget(budget) {}

    std::uint64_t required_states;
    std::uint64_t budget;
};

}  // namespace oblivagg

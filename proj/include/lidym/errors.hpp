#pragma once

#include <stdexcept>
#include <string>

namespace lidym {

/// Violated precondition or invalid combination of arguments.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Input value outside the domain an operation accepts (non-finite, too short, ...).
class InputDomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// No feasible candidate exists or could be found within the attempt budget.
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File system or parse failure; the message carries the offending path.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by training when the loss stops being finite.
class TrainingFault : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
    if (!condition) {
        throw ContractError(message);
    }
}

}  // namespace detail

}  // namespace lidym

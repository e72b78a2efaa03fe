#pragma once

#include <stdexcept>
#include <string>

namespace actguide {

/// Failure categories. The CLI maps each one to a distinct exit code.
enum class ErrorCategory {
    invalid_input = 2,
    io = 3,
    numerical = 4,
    training = 5,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

struct InvalidInput : Error {
    explicit InvalidInput(const std::string& what) : Error(ErrorCategory::invalid_input, what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

/// Raised when sampling produces a non-finite value. `step()` is the diffusion
/// step at which it was detected (0 when not tied to a step).
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, int step = 0)
        : Error(ErrorCategory::numerical, what), step_(step) {}
    int step() const noexcept { return step_; }

private:
    int step_;
};

struct TrainingError : Error {
    explicit TrainingError(const std::string& what) : Error(ErrorCategory::training, what) {}
};

}  // namespace actguide

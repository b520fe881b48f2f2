#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace divctl {

enum class ErrorCode {
    InvalidArgument,
    InvalidRetention,
    OutOfSupport,
    BadRegime,
    BadState,
    DegenerateKernel,
    CannotPayAtRuin,
    NotAtReflectingBoundary,
    MissingPolicy,
    OracleUndefined,
};

std::string_view to_string(ErrorCode code);

/// Thrown for precondition failures. The code identifies which contract was broken.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace divctl

#pragma once

#include <stdexcept>
#include <string>

namespace sentinel {

enum class ErrorCode {
    BadDimensions,
    RankDeficient,
    NonPositiveVariance,
    DimensionMismatch,
    InvalidArgument,
    SteppedAfterAlarm,
    TooLarge,
    SyntaxError,
    SemanticError,
    PlacementError,
    SingularSystem,
};

const char* to_string(ErrorCode code) noexcept;

// Every failure raised by the library carries a code so callers (the CLI in
// particular) can map it onto a stable exit status.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace sentinel

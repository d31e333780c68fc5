#pragma once

#include <stdexcept>
#include <string>

namespace lcd {

/// Failure categories surfaced by the library. The CLI maps every one of
/// them to a nonzero exit status.
enum class ErrorKind {
    invalid_input,
    degenerate_input,
    format,
    missing_ground_truth,
    no_evidence,
    undefined_metric,
    io,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace lcd

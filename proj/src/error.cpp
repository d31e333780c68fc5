#include "lcd/error.hpp"

namespace lcd {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::invalid_input: return "invalid input";
        case ErrorKind::degenerate_input: return "degenerate input";
        case ErrorKind::format: return "format error";
        case ErrorKind::missing_ground_truth: return "missing ground truth";
        case ErrorKind::no_evidence: return "no evidence";
        case ErrorKind::undefined_metric: return "undefined metric";
        case ErrorKind::io: return "I/O error";
    }
    return "error";
}

}  // namespace lcd

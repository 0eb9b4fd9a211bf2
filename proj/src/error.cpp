#include "adpm/error.hpp"

namespace adpm {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InsufficientData: return "insufficient-data";
        case ErrorKind::InvalidInput: return "invalid-input";
        case ErrorKind::InvalidRange: return "invalid-range";
        case ErrorKind::InvalidAction: return "invalid-action";
        case ErrorKind::InvalidState: return "invalid-state";
        case ErrorKind::InvalidCost: return "invalid-cost";
        case ErrorKind::Capacity: return "capacity";
        case ErrorKind::Configuration: return "configuration";
        case ErrorKind::ArityMismatch: return "arity-mismatch";
        case ErrorKind::Format: return "format";
        case ErrorKind::Provider: return "provider";
        case ErrorKind::UndefinedRatio: return "undefined-ratio";
        case ErrorKind::UndefinedAp: return "undefined-ap";
        case ErrorKind::InsufficientScript: return "insufficient-script";
    }
    return "unknown";
}

}  // namespace adpm

#pragma once

#include <stdexcept>
#include <string>

namespace firefda {

/// Raised when inputs violate a documented contract (bad CSV, mismatched
/// grids, out-of-range arguments). The CLI maps this to exit code 1.
class validation_error : public std::invalid_argument {
public:
    explicit validation_error(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Raised when a computation cannot proceed numerically (rank deficiency,
/// singular systems). The CLI maps this to exit code 2.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

inline const char* version() {
#ifdef FIREFDA_VERSION
    return FIREFDA_VERSION;
#else
    return "0.1.0";
#endif
}

}  // namespace firefda

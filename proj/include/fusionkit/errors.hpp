#pragma once

#include <stdexcept>
#include <string>

namespace fusionkit {

// Error taxonomy shared by the library and the CLI. The CLI maps each kind
// onto one of three exit-code buckets: usage (1), data (2), numeric (3).
enum class ErrorKind {
    Usage,       // bad flags, unknown config keys
    Config,      // inconsistent run configuration
    Parse,       // malformed record / file
    Schema,      // record disagrees with manifest
    Label,       // label out of range / missing
    Alignment,   // prediction sets do not cover the same ids
    Dimension,   // tensor shape mismatch
    Contract,    // precondition violated (empty batch, non-scalar root, ...)
    Domain,      // math domain violation (log of non-positive value)
    Numeric,     // non-finite value encountered
};

class FusionError : public std::runtime_error {
public:
    FusionError(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

    const char* category() const {
        switch (kind_) {
            case ErrorKind::Usage:
            case ErrorKind::Config:
                return "usage";
            case ErrorKind::Domain:
            case ErrorKind::Numeric:
                return "numeric";
            default:
                return "data";
        }
    }

    int exit_code() const {
        switch (kind_) {
            case ErrorKind::Usage:
            case ErrorKind::Config:
                return 1;
            case ErrorKind::Domain:
            case ErrorKind::Numeric:
                return 3;
            default:
                return 2;
        }
    }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
    throw FusionError(kind, message);
}

}  // namespace fusionkit

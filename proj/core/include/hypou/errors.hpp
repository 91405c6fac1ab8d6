#pragma once

#include <stdexcept>
#include <string>

namespace hypou {

/// Base for all library errors; `code()` is stable and machine-readable.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& msg)
        : std::runtime_error(msg), code_(std::move(code)) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

struct DimensionError : Error {
    explicit DimensionError(const std::string& msg) : Error("dimension", msg) {}
};

/// Raised when a system is not hypoelliptic or its block chain is broken.
/// `block` is the offending block index, or -1 when not block-specific.
struct StructureError : Error {
    explicit StructureError(const std::string& msg, int block = -1)
        : Error("structure", msg), block(block) {}
    int block;
};

struct QuadratureError : Error {
    explicit QuadratureError(const std::string& msg) : Error("quadrature", msg) {}
};

/// Raised when a matrix required to be positive semi-definite has an
/// eigenvalue below the clamping tolerance.
struct PsdError : Error {
    explicit PsdError(const std::string& msg) : Error("psd", msg) {}
};

struct SingularCovariance : Error {
    explicit SingularCovariance(const std::string& msg) : Error("singular_covariance", msg) {}
};

/// Grid box does not cover the region required by a solve or a resampling op.
struct CoverageError : Error {
    explicit CoverageError(const std::string& msg) : Error("coverage", msg) {}
};

struct SplitStepError : Error {
    explicit SplitStepError(const std::string& msg) : Error("split_step", msg) {}
};

struct ExponentError : Error {
    explicit ExponentError(const std::string& msg) : Error("exponent", msg) {}
};

/// Raised when an estimate requires the homogeneous class (block-subdiagonal
/// drift matrix) and the system is not in it.
struct ClassError : Error {
    explicit ClassError(const std::string& msg) : Error("class", msg) {}
};

struct SchemaError : Error {
    explicit SchemaError(const std::string& msg) : Error("schema", msg) {}
};

/// A convergence ladder whose error table is not decreasing. Reported as a
/// flag in convergence tables; thrown only by callers that require decay.
struct NonmonotoneConvergence : Error {
    explicit NonmonotoneConvergence(const std::string& msg)
        : Error("nonmonotone_convergence", msg) {}
};

} // namespace hypou

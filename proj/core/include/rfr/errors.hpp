#pragma once

#include <stdexcept>
#include <string>

namespace rfr {

// Error category determines the CLI exit code:
//   validation -> 2, numeric -> 3, io -> 4.
enum class ErrorKind { validation, numeric, io };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& msg) : Error(ErrorKind::validation, msg) {}
};

// State left IEEE range during integration or model evaluation.
struct NonFiniteState : Error {
    explicit NonFiniteState(const std::string& msg) : Error(ErrorKind::numeric, msg) {}
};

// Normal-equation factorization failed (rank-deficient system at lambda = 0).
struct SingularSystem : Error {
    explicit SingularSystem(const std::string& msg) : Error(ErrorKind::numeric, msg) {}
};

// Delay buffer cannot cover the requested lookback.
struct InsufficientHistory : Error {
    explicit InsufficientHistory(const std::string& msg) : Error(ErrorKind::validation, msg) {}
};

// A component of the series is constant, so it cannot be standardized.
struct DegenerateSeries : Error {
    explicit DegenerateSeries(const std::string& msg) : Error(ErrorKind::validation, msg) {}
};

// Series too short for the requested embedding window.
struct InsufficientLength : Error {
    explicit InsufficientLength(const std::string& msg) : Error(ErrorKind::validation, msg) {}
};

// Series too short for the requested finite-difference stencil.
struct SeriesTooShort : Error {
    explicit SeriesTooShort(const std::string& msg) : Error(ErrorKind::validation, msg) {}
};

// Kept-center count exceeded the configured cap (grid too fine for memory).
struct TooManyCenters : Error {
    explicit TooManyCenters(const std::string& msg) : Error(ErrorKind::validation, msg) {}
};

struct InvalidParams : Error {
    explicit InvalidParams(const std::string& msg) : Error(ErrorKind::validation, msg) {}
};

// Requested regression sample count exceeds the usable population.
struct NotEnoughSamples : Error {
    explicit NotEnoughSamples(const std::string& msg) : Error(ErrorKind::validation, msg) {}
};

// Stagger-and-step could not keep the trajectory near the saddle.
struct SaddleEscape : Error {
    explicit SaddleEscape(const std::string& msg) : Error(ErrorKind::numeric, msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(ErrorKind::io, msg) {}
};

// File body did not match its checksum or declared structure.
struct CorruptFile : Error {
    explicit CorruptFile(const std::string& msg) : Error(ErrorKind::io, msg) {}
};

struct FormatVersionMismatch : Error {
    explicit FormatVersionMismatch(const std::string& msg) : Error(ErrorKind::io, msg) {}
};

} // namespace rfr

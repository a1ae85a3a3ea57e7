#ifndef UGV_ERRORS_HPP
#define UGV_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ugv {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or unsupported input bytes (bad magic, unknown image format, ...).
struct FormatError : Error {
    using Error::Error;
};

// Stream ended before the declared payload.
struct TruncationError : Error {
    using Error::Error;
};

// Declared dimensions overflow or disagree with the data.
struct OverflowError : Error {
    using Error::Error;
};

// Tensor / feature-map dimension mismatch.
struct ShapeError : Error {
    using Error::Error;
};

// Reading or writing a file / stream failed.
struct IoError : Error {
    using Error::Error;
};

// 3D point at or behind the camera plane during projection.
struct BehindCameraError : Error {
    using Error::Error;
};

// Pose initialization from a degenerate pixel quad failed.
struct InitializationError : Error {
    using Error::Error;
};

// Rank-deficient or collinear configuration in a solver.
struct DegenerateConfigurationError : Error {
    using Error::Error;
};

// Coincident candidates given to a connection score.
struct DegenerateConnectionError : Error {
    using Error::Error;
};

// Loss mask excludes every pixel.
struct DegenerateMaskError : Error {
    using Error::Error;
};

// Weight store is missing a layer, has extras, or a tensor is mis-shaped.
struct ParameterError : Error {
    using Error::Error;
};

// Scene sampling could not satisfy the in-frame constraint.
struct FeasibilityError : Error {
    using Error::Error;
};

// Calibration solve failed.
struct CalibrationError : Error {
    using Error::Error;
};

// Bad CLI arguments or config contents.
struct ValidationError : Error {
    using Error::Error;
};

} // namespace ugv

#endif // UGV_ERRORS_HPP

// Exception hierarchy shared by all slc3dmm modules. Every failure mode the
// library can report is a named subclass of slc::Error so callers can match
// on the condition rather than parse message strings.
#pragma once

#include <stdexcept>
#include <string>

namespace slc {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// --- mesh / model I/O ---
struct ParseError : Error {
    using Error::Error;
};
struct IndexError : Error {
    using Error::Error;
};
struct UnsupportedFormat : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};
struct BadMagic : Error {
    using Error::Error;
};
struct DimensionMismatch : Error {
    using Error::Error;
};

// --- geometry / fitting ---
struct EmptyResult : Error {
    using Error::Error;
};
struct EmptyInput : Error {
    using Error::Error;
};
struct DegenerateConfiguration : Error {
    using Error::Error;
};
struct SingularSystem : Error {
    using Error::Error;
};

// --- learning / evaluation ---
struct InvalidHyperparam : Error {
    using Error::Error;
};
struct KTooLarge : Error {
    using Error::Error;
};

// --- annotation transfer ---
struct TargetTooSmall : Error {
    using Error::Error;
};
struct NoSharedLandmarks : Error {
    using Error::Error;
};

} // namespace slc

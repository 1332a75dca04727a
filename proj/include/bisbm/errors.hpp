#ifndef BISBM_ERRORS_HPP
#define BISBM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace bisbm {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or size mismatch between inputs.
struct DimensionError : Error {
    using Error::Error;
};

// Block or element index outside its declared range.
struct IndexError : Error {
    using Error::Error;
};

// Invalid data fed to an algorithm (non-finite entries, broken invariants).
struct InputError : Error {
    using Error::Error;
};

// Estimation failed numerically (all restarts diverged).
struct FitError : Error {
    using Error::Error;
};

// A column with zero variance cannot be standardized.
struct ZeroVarianceError : Error {
    using Error::Error;
};

// Malformed file content; message carries the (row, column) location.
struct ParseError : Error {
    using Error::Error;
};

// Well-formed file whose values violate a kind invariant, or a config
// document with unknown/invalid keys.
struct ValidationError : Error {
    using Error::Error;
};

}  // namespace bisbm

#endif  // BISBM_ERRORS_HPP

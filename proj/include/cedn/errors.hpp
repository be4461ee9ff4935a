#pragma once

#include <stdexcept>
#include <string>

namespace cedn {

/// Base of every exception thrown by the library.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad argument to a pure function (non-finite phase, negative voltage, ...).
class invalid_input : public error {
public:
    using error::error;
};

/// BSGU -> PBSU wiring that breaks the topology invariants.
class topology_error : public error {
public:
    using error::error;
};

/// Inconsistent scenario, loss budget or detector configuration.
class config_error : public error {
public:
    using error::error;
};

/// Calibration sweep requested on a user pair the swept BSGU cannot split onto.
class calibration_pair_error : public invalid_input {
public:
    using invalid_input::invalid_input;
};

/// Malformed measurement data: unsorted streams, key length mismatch, bad files.
class data_error : public error {
public:
    using error::error;
};

/// Calibration fit could not be performed or produced no usable signal.
class fit_error : public error {
public:
    using error::error;
};

/// Query outside a tabulated range.
class range_error : public error {
public:
    using error::error;
};

} // namespace cedn

#pragma once

#include <stdexcept>
#include <string>

namespace vfm {

/// Invalid or inconsistent configuration (bad flags, unfitted statistics, shape/variant mismatch).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input data that violates a domain invariant.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor dimensions that do not line up.
class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The well oracle failed to find a steady state.
class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite loss or gradient during optimisation.
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace vfm

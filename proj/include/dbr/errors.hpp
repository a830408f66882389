#pragma once

#include <stdexcept>
#include <string>

namespace dbr {

/// Tensor shapes or dimensions that do not agree.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A class label outside [0, num_classes).
class LabelError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// An operation invoked in the wrong lifecycle state (e.g. backward before forward).
class StateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Input data or a trained artifact violates a documented invariant.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A cached artifact was produced from different upstream inputs.
class StaleArtifactError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MissingArtifactError : public IoError {
public:
    using IoError::IoError;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace dbr

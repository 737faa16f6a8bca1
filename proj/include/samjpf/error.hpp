#ifndef SAMJPF_ERROR_HPP
#define SAMJPF_ERROR_HPP

#include <stdexcept>
#include <string>

namespace samjpf {

/// Base of every error raised by the library. `what()` carries a human
/// readable message; the concrete type says which contract was broken.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input data violates a precondition (too short, non-monotone, non-finite).
class DataError : public Error {
public:
    using Error::Error;
};

/// A named column or channel is missing.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Streams cannot be put on a common time base.
class SyncError : public Error {
public:
    using Error::Error;
};

/// A constant channel cannot be min-max scaled.
class NormalizationError : public Error {
public:
    using Error::Error;
};

/// Invalid parameter value.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Serialized model is structurally invalid or has the wrong version.
class ModelFormatError : public Error {
public:
    using Error::Error;
};

/// File could not be parsed at all.
class ParseError : public Error {
public:
    using Error::Error;
};

/// A model is unusable for inference (e.g. empty dictionary).
class ModelError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

/// Every particle weight underflowed. Recoverable: the filter reinitializes.
class FilterDivergence : public Error {
public:
    using Error::Error;
};

class EvalError : public Error {
public:
    using Error::Error;
};

class SpecError : public Error {
public:
    using Error::Error;
};

/// Wraps an error raised inside a named pipeline stage.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)) {}

    [[nodiscard]] const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

} // namespace samjpf

#endif // SAMJPF_ERROR_HPP

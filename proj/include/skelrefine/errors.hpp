#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace skelrefine {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input data: wrong encoding, wrong shapes, too few frames, unparsable files.
class DataError : public Error {
public:
    using Error::Error;
};

class EncodingError : public DataError {
public:
    using DataError::DataError;
};

class DimensionError : public DataError {
public:
    using DataError::DataError;
};

class InsufficientFramesError : public DataError {
public:
    InsufficientFramesError(std::size_t got, std::size_t needed)
        : DataError("insufficient frames: got " + std::to_string(got) + ", need at least " +
                    std::to_string(needed)),
          got_(got), needed_(needed) {}

    std::size_t got() const noexcept { return got_; }
    std::size_t needed() const noexcept { return needed_; }

private:
    std::size_t got_;
    std::size_t needed_;
};

class DegenerateGeometryError : public DataError {
public:
    using DataError::DataError;
};

class ParseError : public DataError {
public:
    using DataError::DataError;
};

// Misconfiguration: invalid parameters, missing models, unknown variants.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A pipeline stage was requested before the stage it depends on.
class DependencyError : public ConfigError {
public:
    DependencyError(const std::string& stage, const std::string& missing)
        : ConfigError("stage '" + stage + "' requires '" + missing + "', which is missing"),
          missing_(missing) {}

    const std::string& missing() const noexcept { return missing_; }

private:
    std::string missing_;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

class TrainingDivergedError : public NumericalError {
public:
    explicit TrainingDivergedError(int iteration)
        : NumericalError("training diverged at iteration " + std::to_string(iteration)),
          iteration_(iteration) {}

    int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

}  // namespace skelrefine

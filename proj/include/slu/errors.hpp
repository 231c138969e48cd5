#pragma once

#include <stdexcept>
#include <string>

namespace slu {

// Contract violations (bad arguments, malformed data, config errors).
// The CLI maps these to exit status 1.
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem / network failures. CLI exit status 2.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ParseError : ContractError {
    explicit ParseError(const std::string& msg) : ContractError(msg) {}
};

struct AlignmentError : ContractError {
    explicit AlignmentError(const std::string& msg) : ContractError(msg) {}
};

struct EncodingError : ContractError {
    explicit EncodingError(const std::string& msg) : ContractError(msg) {}
};

struct ShapeError : ContractError {
    explicit ShapeError(const std::string& msg) : ContractError(msg) {}
};

struct ConfigError : ContractError {
    explicit ConfigError(const std::string& msg) : ContractError(msg) {}
};

struct SegmentationError : ContractError {
    explicit SegmentationError(const std::string& msg) : ContractError(msg) {}
};

struct OptimizerError : ContractError {
    explicit OptimizerError(const std::string& msg) : ContractError(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace slu

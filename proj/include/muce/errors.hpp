#pragma once

#include <stdexcept>
#include <string>

namespace muce {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionError : Error {
    explicit DimensionError(const std::string& msg) : Error("dimension error: " + msg) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error("config error: " + msg) {}
};

struct DomainError : Error {
    explicit DomainError(const std::string& msg) : Error("domain error: " + msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& path, const std::string& msg)
        : Error("io error: " + path + ": " + msg) {}
};

struct TrainingError : Error {
    int64_t epoch;
    TrainingError(int64_t ep, const std::string& msg)
        : Error("training error at epoch " + std::to_string(ep) + ": " + msg), epoch(ep) {}
    explicit TrainingError(const std::string& msg) : Error("training error: " + msg), epoch(-1) {}
};

struct DispatchError : Error {
    explicit DispatchError(const std::string& msg) : Error("dispatch error: " + msg) {}
};

struct UsageError : Error {
    explicit UsageError(const std::string& msg) : Error("usage error: " + msg) {}
};

}  // namespace muce

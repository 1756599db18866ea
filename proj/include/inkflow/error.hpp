#ifndef INKFLOW_ERROR_HPP
#define INKFLOW_ERROR_HPP

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace inkflow {

// Failure classes map one-to-one onto CLI exit codes.
enum class ErrorClass { config, io, numerical };

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), cls_(cls) {}
    ErrorClass error_class() const noexcept { return cls_; }

private:
    ErrorClass cls_;
};

// Precondition violated by a numeric argument (negative radius, s outside [0,1], ...).
class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(ErrorClass::numerical, what) {}
};

class CalibrationError : public Error {
public:
    explicit CalibrationError(const std::string& what) : Error(ErrorClass::numerical, what) {}
};

class DegenerateMatrixError : public Error {
public:
    DegenerateMatrixError(const std::string& what, double condition)
        : Error(ErrorClass::numerical, what), condition_(condition) {}
    double condition() const noexcept { return condition_; }

private:
    double condition_;
};

class FitError : public Error {
public:
    explicit FitError(const std::string& what) : Error(ErrorClass::numerical, what) {}
};

class SyncError : public Error {
public:
    explicit SyncError(const std::string& what) : Error(ErrorClass::numerical, what) {}
};

class DetectionError : public Error {
public:
    explicit DetectionError(const std::string& what) : Error(ErrorClass::numerical, what) {}
};

class SynthesisError : public Error {
public:
    SynthesisError(const std::string& what, std::vector<std::size_t> truncated)
        : Error(ErrorClass::numerical, what), truncated_(std::move(truncated)) {}
    const std::vector<std::size_t>& truncated_events() const noexcept { return truncated_; }

private:
    std::vector<std::size_t> truncated_;
};

// Invalid scenario/config values; `path` is the offending field, e.g. "geometry.diameter_mm".
class ConfigError : public Error {
public:
    ConfigError(std::string path, const std::string& what)
        : Error(ErrorClass::config, path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorClass::io, what) {}
};

/// Structured non-fatal warnings (modeling assumptions violated, singularities clamped).
struct Diagnostic {
    std::string code;
    std::string message;
};

class Diagnostics {
public:
    void warn(std::string code, std::string message) {
        entries_.push_back({std::move(code), std::move(message)});
    }
    const std::vector<Diagnostic>& entries() const noexcept { return entries_; }
    bool empty() const noexcept { return entries_.empty(); }
    bool contains(const std::string& code) const {
        for (const auto& d : entries_)
            if (d.code == code) return true;
        return false;
    }

private:
    std::vector<Diagnostic> entries_;
};

namespace detail {

inline void warn(Diagnostics* diag, std::string code, std::string message) {
    if (diag) diag->warn(std::move(code), std::move(message));
}

inline void require_positive(double v, const char* name) {
    if (!(v > 0.0)) throw DomainError(std::string(name) + " must be > 0, got " + std::to_string(v));
}

}  // namespace detail

}  // namespace inkflow

#endif

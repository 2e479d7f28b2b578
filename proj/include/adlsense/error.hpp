#pragma once

#include <stdexcept>
#include <string>

namespace adlsense {

// Root of every error the library throws. Callers that only want to report
// and exit can catch this one type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input violates a documented invariant (joint count, finiteness, ranges).
class ValidationError : public Error {
public:
    using Error::Error;
};

// Text record could not be parsed. Carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Format tag or version field does not match what this build reads.
class VersionError : public Error {
public:
    using Error::Error;
};

// Tensor shapes disagree with the contract (expected vs found).
class ShapeError : public Error {
public:
    using Error::Error;
};

// Binary payload ends before the header says it should.
class TruncationError : public Error {
public:
    TruncationError(std::size_t expected_end, std::size_t actual_size, const std::string& what)
        : Error(what + " (payload needs bytes up to offset " + std::to_string(expected_end) +
                ", file has " + std::to_string(actual_size) + ")"),
          expected_end_(expected_end), actual_size_(actual_size) {}

    std::size_t expected_end() const noexcept { return expected_end_; }
    std::size_t actual_size() const noexcept { return actual_size_; }

private:
    std::size_t expected_end_;
    std::size_t actual_size_;
};

// Stored checksum or redundant statistics disagree with the content.
class CorruptionError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Sampler rejected a frame whose timestamp does not advance.
class OrderError : public Error {
public:
    OrderError(double previous, double offered)
        : Error("non-monotone timestamp: previous accepted " + std::to_string(previous) +
                ", offered " + std::to_string(offered)),
          previous_(previous), offered_(offered) {}

    double previous() const noexcept { return previous_; }
    double offered() const noexcept { return offered_; }

private:
    double previous_;
    double offered_;
};

// Wraps an error raised while a pipeline stage was running.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace adlsense

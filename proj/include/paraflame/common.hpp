#pragma once

#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>

namespace paraflame {

/// Base class for all library errors.
class Error : public std::runtime_error {
  public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Shape or precondition violation in an operation contract.
class ContractError : public Error {
  public:
    explicit ContractError(const std::string& msg) : Error(msg) {}
};

/// Malformed or truncated file. Carries the byte offset where parsing stopped.
class FormatError : public Error {
  public:
    FormatError(const std::string& msg, std::uint64_t offset)
        : Error(msg + " (byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
    std::uint64_t offset() const { return offset_; }

  private:
    std::uint64_t offset_;
};

/// Time integration could not continue (step-size underflow). Reports the time reached.
class IntegrationError : public Error {
  public:
    IntegrationError(const std::string& msg, double t_reached)
        : Error(msg + " (t reached = " + std::to_string(t_reached) + ")"), t_reached_(t_reached) {}
    double t_reached() const { return t_reached_; }

  private:
    double t_reached_;
};

/// Non-finite loss or gradient during training.
class TrainingDivergence : public Error {
  public:
    explicit TrainingDivergence(const std::string& msg) : Error(msg) {}
};

/// Configuration / usage error (maps to exit code 64 in the CLI).
class ConfigError : public Error {
  public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/// Worker-thread cap. PARAFLAME_THREADS overrides hardware concurrency.
inline unsigned worker_threads() {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (const char* env = std::getenv("PARAFLAME_THREADS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v >= 1 && v < 1024) return static_cast<unsigned>(v);
    }
    return hw;
}

}  // namespace paraflame

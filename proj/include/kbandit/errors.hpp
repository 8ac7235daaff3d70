#pragma once

#include <stdexcept>
#include <string>

namespace kbandit {

/// Precondition violated by caller-supplied data (dimensions, ranges, probabilities).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Operation requested on an object that is not in the required state (e.g. predicting with an unfitted arm).
class StateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Linear-algebra failure that survived jitter escalation.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, double condition_estimate, double jitter)
        : std::runtime_error(what), condition_estimate_(condition_estimate), jitter_(jitter) {}

    [[nodiscard]] double condition_estimate() const noexcept { return condition_estimate_; }
    [[nodiscard]] double jitter() const noexcept { return jitter_; }

private:
    double condition_estimate_;
    double jitter_;
};

/// Configuration parse or validation failure. `key()` names the offending key path
/// (e.g. "schedule.beta"); `line()` is 0 when the error is not tied to a line.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& message, int line = 0)
        : std::runtime_error(format(key, message, line)), key_(std::move(key)), line_(line) {}

    [[nodiscard]] const std::string& key() const noexcept { return key_; }
    [[nodiscard]] int line() const noexcept { return line_; }

private:
    static std::string format(const std::string& key, const std::string& message, int line) {
        std::string out;
        if (line > 0) out += "line " + std::to_string(line) + ": ";
        if (!key.empty()) out += key + ": ";
        return out + message;
    }

    std::string key_;
    int line_;
};

}  // namespace kbandit

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rada {

// Base for every error the library raises on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid input data or configuration. The CLI maps these to exit code 2.
class SchemaError : public Error {
public:
    explicit SchemaError(const std::string& message) : Error(message) {}
    SchemaError(const std::string& file, std::size_t line, const std::string& message)
        : Error(file + ":" + std::to_string(line) + ": " + message), file_(file), line_(line) {}

    const std::string& file() const noexcept { return file_; }
    // 1-based; 0 when the error is not tied to a line.
    std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_ = 0;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace rada

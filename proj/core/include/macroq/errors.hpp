#pragma once

#include <stdexcept>
#include <string>

namespace macroq {

// Error families map onto CLI exit codes: config 1, data 2, job 3.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

class JobError : public std::runtime_error {
public:
    explicit JobError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace macroq

#pragma once

#include <stdexcept>
#include <string>

namespace rockcluster {

// Error raised for every domain failure in this library: bad input data,
// violated operation preconditions, malformed files, invalid configs.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& message) : std::runtime_error(message) {}
};

[[noreturn]] inline void fail(const std::string& message) { throw Error(message); }

inline void require(bool condition, const std::string& message) {
    if (!condition) fail(message);
}

}  // namespace rockcluster

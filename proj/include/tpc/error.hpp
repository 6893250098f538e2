#pragma once

#include <stdexcept>
#include <string>

namespace tpc {

/// Coarse classification of failures; the CLI maps each to its own exit code.
enum class Errc {
    invalid_argument = 3,
    dimension_mismatch = 4,
    format = 5,
    io = 6,
    overflow = 7,
};

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

namespace detail {

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Errc code, const std::string& what) {
    if (!cond) fail(code, what);
}

} // namespace detail
} // namespace tpc

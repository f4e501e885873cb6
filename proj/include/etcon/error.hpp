#pragma once

#include <stdexcept>
#include <string>

namespace etcon {

// Error categories map one-to-one onto the C API status codes.
enum class ErrorKind {
    kStructural,  // dimension / shape mismatch
    kValidation,  // input violates a documented precondition
    kSynthesis,   // gain synthesis impossible (uncontrollable, unobservable)
    kInfeasible,  // an LMI problem has no certified solution
    kDesign,      // design artifacts inconsistent (e.g. eta too small)
    kSchema,      // malformed configuration or design file
    kIo,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) fail(kind, what);
}

}  // namespace etcon

#pragma once

#include <stdexcept>
#include <string>

namespace plab {

// One exception type with a machine-checkable kind. Contracts across the
// library map errors onto these kinds so tests and the CLI can tell them apart.
enum class ErrorKind {
    config,        // invalid configuration / empty corpus / bad spec
    length,        // sequence exceeds the context window
    shape,         // tensor / matrix dimension mismatch
    vocab,         // token outside the vocabulary
    domain,        // value outside the mathematical domain (negative mass, ...)
    data,          // empty or degenerate input data
    unsupported,   // operation not defined for this input type
    optimization,  // optimizer diverged (non-finite loss)
    io,            // file read/write failure
    undefined,     // result mathematically undefined (zero vector cosine, ...)
};

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

  private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) {
        fail(kind, what);
    }
}

inline const char* error_kind_name(ErrorKind k) {
    switch (k) {
        case ErrorKind::config: return "config";
        case ErrorKind::length: return "length";
        case ErrorKind::shape: return "shape";
        case ErrorKind::vocab: return "vocab";
        case ErrorKind::domain: return "domain";
        case ErrorKind::data: return "data";
        case ErrorKind::unsupported: return "unsupported";
        case ErrorKind::optimization: return "optimization";
        case ErrorKind::io: return "io";
        case ErrorKind::undefined: return "undefined";
    }
    return "unknown";
}

} // namespace plab

#pragma once

#include <stdexcept>
#include <string>

namespace trnr {

/// Base class for every error raised by the toolkit. Messages start with a
/// short stable tag (e.g. "unreadable file") followed by context.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when training loss becomes non-finite or explodes.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& what) : Error(what) {}
};

[[noreturn]] void fail(const std::string& tag, const std::string& detail = {});

inline void require(bool condition, const std::string& tag, const std::string& detail = {}) {
  if (!condition) fail(tag, detail);
}

}  // namespace trnr

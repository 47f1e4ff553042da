#pragma once

#include <stdexcept>
#include <string>

namespace cico {

// Malformed or inconsistent user-supplied data. The CLI maps this to exit 1.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem or stream failure. The CLI maps this to exit 2.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cico

#pragma once

#include <stdexcept>
#include <string>

namespace rampage {

// Caller broke a precondition (dimension mismatch, non-skew input, ...).
class ContractViolation : public std::logic_error {
 public:
  explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

// A printed constant or bound is undefined for the supplied parameters.
class NotComputable : public std::domain_error {
 public:
  explicit NotComputable(const std::string& what) : std::domain_error(what) {}
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

class SearchFailed : public std::runtime_error {
 public:
  explicit SearchFailed(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rampage

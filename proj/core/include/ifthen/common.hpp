#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ifthen {

inline constexpr std::string_view kVersion = "0.1.0";

// Error taxonomy shared across the toolkit. The CLI maps these onto stable
// exit codes: IoError -> 1, ValidationError (and subclasses) -> 2,
// NonFiniteGradient -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NonFiniteGradient : public Error {
 public:
  explicit NonFiniteGradient(const std::string& parameter_name)
      : Error("non-finite gradient in parameter '" + parameter_name + "'"),
        parameter(parameter_name) {}
  std::string parameter;
};

class IncompatibleCheckpoint : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Splits on runs of ASCII whitespace; never produces empty tokens.
std::vector<std::string> whitespace_tokens(std::string_view text);

// Folds A-Z to a-z, leaves every other byte (including multi-byte UTF-8)
// untouched.
std::string ascii_lower(std::string_view text);

std::string join_tokens(const std::vector<std::string>& tokens, std::string_view sep = " ");

// FNV-1a over raw bytes; used for vocabulary and input-file fingerprints.
std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t fnv1a64(std::uint64_t seed, std::string_view bytes);

}  // namespace ifthen

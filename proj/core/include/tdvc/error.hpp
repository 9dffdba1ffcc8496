#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tdvc {

enum class ErrorCategory {
  kDomain = 1,
  kConvergence,
  kContract,
  kResource,
  kBitstream,
  kFormat,
  kUnsupportedVersion,
  kUnsupportedFormat,
  kIo,
  kExternalTool,
};

const char* category_name(ErrorCategory category);

// Base of every error thrown by the library. The category doubles as the
// CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorCategory::kDomain, what) {}
};

class ConvergenceError : public Error {
 public:
  explicit ConvergenceError(const std::string& what) : Error(ErrorCategory::kConvergence, what) {}
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(ErrorCategory::kContract, what) {}
};

class ResourceError : public Error {
 public:
  explicit ResourceError(const std::string& what) : Error(ErrorCategory::kResource, what) {}
};

class BitstreamError : public Error {
 public:
  BitstreamError(const std::string& what, std::size_t offset)
      : Error(ErrorCategory::kBitstream, what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(ErrorCategory::kFormat, what) {}
};

class UnsupportedVersionError : public Error {
 public:
  explicit UnsupportedVersionError(const std::string& what)
      : Error(ErrorCategory::kUnsupportedVersion, what) {}
};

class UnsupportedFormatError : public Error {
 public:
  explicit UnsupportedFormatError(const std::string& what)
      : Error(ErrorCategory::kUnsupportedFormat, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::kIo, what) {}
};

class ExternalToolError : public Error {
 public:
  ExternalToolError(const std::string& what, std::string diagnostics)
      : Error(ErrorCategory::kExternalTool, what), diagnostics_(std::move(diagnostics)) {}

  const std::string& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::string diagnostics_;
};

}  // namespace tdvc

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tiercache {

enum class ErrorKind {
  kInvalidConfig,
  kParse,
  kValidation,
  kIo,
  kDegenerateFit,
  kMissingArtifact,
  kVocabularyMismatch,
  kNonFinite,
  kOutOfRange,
};

/// Machine-parsable category name, e.g. "parse" or "vocabulary-mismatch".
std::string_view to_string(ErrorKind kind);

/// All library failures are reported as this exception. The category is
/// stable and is what the CLI prints as the first token of an error line.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace tiercache

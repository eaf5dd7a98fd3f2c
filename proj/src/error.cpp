#include "tiercache/error.hpp"

namespace tiercache {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidConfig: return "invalid-config";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kDegenerateFit: return "degenerate-fit";
    case ErrorKind::kMissingArtifact: return "missing-artifact";
    case ErrorKind::kVocabularyMismatch: return "vocabulary-mismatch";
    case ErrorKind::kNonFinite: return "non-finite";
    case ErrorKind::kOutOfRange: return "out-of-range";
  }
  return "unknown";
}

}  // namespace tiercache

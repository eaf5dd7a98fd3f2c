#pragma once

#include <filesystem>
#include <iosfwd>

#include "tiercache/nn/model.hpp"

namespace tiercache::nn {

/// Text header (shape, vocabulary, vocabulary hash, tensor table) followed by
/// the parameter values as raw little-endian doubles.
void save_checkpoint(const ModelParameters& model, std::ostream& out);
void save_checkpoint(const ModelParameters& model, const std::filesystem::path& path);

/// Throws kParse on a malformed header or payload.
ModelParameters load_checkpoint(std::istream& in);
/// kMissingArtifact when the file does not exist.
ModelParameters load_checkpoint(const std::filesystem::path& path);
/// Also refuses (kVocabularyMismatch) a checkpoint trained on another vocabulary.
ModelParameters load_checkpoint(const std::filesystem::path& path, const Vocabulary& expected);

}  // namespace tiercache::nn

#pragma once

#include <stdexcept>
#include <string>

namespace midistyle {

// Every failure the library raises carries one of these codes so callers
// (and the command-line driver) can map it to an exit status without
// string-matching messages.
enum class errc {
  // file formats
  malformed_midi,
  bad_magic,
  corrupt_file,
  unsupported_dtype,
  shape_mismatch,
  non_binary_values,
  corrupt_checkpoint,
  // piano-roll / grid
  invalid_grid,
  invalid_threshold,
  non_binary_roll,
  empty_after_quantization,
  filter_rejected,
  // dataset
  empty_genre,
  empty_domain,
  invalid_count,
  invalid_split,
  // classifiers
  empty_class,
  invalid_hyperparam,
  unfitted_model,
  empty_test_set,
  layout_mismatch,
  unsupported_shape,
  empty_scores,
  // losses / training
  missing_term,
  invalid_margin,
  invalid_weight,
  non_finite_loss,
  empty_batch,
  bad_config,
  // generic
  invalid_argument,
  io_error,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::malformed_midi: return "MalformedMidi";
    case errc::bad_magic: return "BadMagic";
    case errc::corrupt_file: return "CorruptFile";
    case errc::unsupported_dtype: return "UnsupportedDtype";
    case errc::shape_mismatch: return "ShapeMismatch";
    case errc::non_binary_values: return "NonBinaryValues";
    case errc::corrupt_checkpoint: return "CorruptCheckpoint";
    case errc::invalid_grid: return "InvalidGrid";
    case errc::invalid_threshold: return "InvalidThreshold";
    case errc::non_binary_roll: return "NonBinaryRoll";
    case errc::empty_after_quantization: return "EmptyAfterQuantization";
    case errc::filter_rejected: return "FilterRejected";
    case errc::empty_genre: return "EmptyGenre";
    case errc::empty_domain: return "EmptyDomain";
    case errc::invalid_count: return "InvalidCount";
    case errc::invalid_split: return "InvalidSplit";
    case errc::empty_class: return "EmptyClass";
    case errc::invalid_hyperparam: return "InvalidHyperparam";
    case errc::unfitted_model: return "UnfittedModel";
    case errc::empty_test_set: return "EmptyTestSet";
    case errc::layout_mismatch: return "LayoutMismatch";
    case errc::unsupported_shape: return "UnsupportedShape";
    case errc::empty_scores: return "EmptyScores";
    case errc::missing_term: return "MissingTerm";
    case errc::invalid_margin: return "InvalidMargin";
    case errc::invalid_weight: return "InvalidWeight";
    case errc::non_finite_loss: return "NonFiniteLoss";
    case errc::empty_batch: return "EmptyBatch";
    case errc::bad_config: return "BadConfig";
    case errc::invalid_argument: return "InvalidArgument";
    case errc::io_error: return "IoError";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  errc code() const { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void raise(errc code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool ok, errc code, const std::string& message) {
  if (!ok) raise(code, message);
}

}  // namespace midistyle

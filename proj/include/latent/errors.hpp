#pragma once

#include <stdexcept>
#include <string>

namespace latent {

// Thrown when a training loop produces non-finite losses/gradients or the
// GAN collapse detector fires. The CLI maps this to exit code 3.
struct TrainingDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class IoCode {
  bad_magic,
  bad_version,
  bad_dtype,
  bad_shape,
  truncated,
  trailing_data,
  header_mismatch,
  out_of_range,
};

const char* to_string(IoCode code);

struct IoError : std::runtime_error {
  IoCode code;
  IoError(IoCode c, const std::string& message)
      : std::runtime_error(std::string(to_string(c)) + ": " + message), code(c) {}
};

}  // namespace latent

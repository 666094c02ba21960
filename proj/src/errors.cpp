#include "latent/errors.hpp"

namespace latent {

const char* to_string(IoCode code) {
  switch (code) {
    case IoCode::bad_magic: return "bad magic";
    case IoCode::bad_version: return "unsupported version";
    case IoCode::bad_dtype: return "unsupported dtype";
    case IoCode::bad_shape: return "bad shape";
    case IoCode::truncated: return "truncated file";
    case IoCode::trailing_data: return "trailing data";
    case IoCode::header_mismatch: return "header mismatch";
    case IoCode::out_of_range: return "value out of range";
  }
  return "io error";
}

}  // namespace latent

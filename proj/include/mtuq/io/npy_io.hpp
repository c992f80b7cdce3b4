#pragma once

#include <string>

#include "mtuq/core/tensor.hpp"

namespace mtuq::io {

// Minimal NPY (format version 1.0) support for little-endian float32 arrays
// of rank 1 or 2. Enough to exchange depth and uncertainty maps.
void write_npy(const std::string& path, const Tensor& t);
Tensor read_npy(const std::string& path);

} // namespace mtuq::io

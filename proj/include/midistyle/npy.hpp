#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "midistyle/pianoroll.hpp"

namespace midistyle {

// Minimal NPY v1.0 array container support — just enough to exchange
// N x 64 x 84 roll stacks with standard numeric tooling. Element types:
// unsigned byte ('|u1') for binary rolls, little-endian 32-bit float
// ('<f4') for continuous ones.
struct NpyArray {
  std::string descr;            // dtype string as stored in the header
  std::vector<int64_t> shape;
  std::vector<uint8_t> raw;     // payload bytes, C order
};

NpyArray read_npy(const std::vector<uint8_t>& bytes);
std::vector<uint8_t> write_npy(const NpyArray& array);

// Roll-stack convenience wrappers. Saving picks '|u1' when every roll is
// binary and '<f4' otherwise (continuous entries are rounded to 32-bit
// float precision by the container format; a second round trip is exact).
// Loading validates the N x 64 x 84 shape and, for byte data, that every
// entry is 0 or 1.
std::vector<PianoRoll> load_rolls(const std::string& path,
                                  bool require_binary = false);
void save_rolls(const std::string& path, const std::vector<PianoRoll>& rolls);

}  // namespace midistyle

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "midistyle/tensor.hpp"

namespace midistyle {

// Simple binary container for model state: a free-form JSON metadata string
// plus an ordered list of named double tensors. Layout (little-endian):
//   magic "MSAR" | u32 format version | u64 meta length | meta bytes |
//   u64 entry count | entries
// entry: u16 name length | name | u8 rank | u64 dims... | raw doubles
// Writing the same logical content always produces identical bytes, which
// the determinism guarantees rely on.
class Archive {
 public:
  std::string meta;  // JSON text, interpreted by the caller

  void add(const std::string& name, Tensor tensor);
  bool has(const std::string& name) const;
  const Tensor& get(const std::string& name) const;
  const std::vector<std::pair<std::string, Tensor>>& entries() const {
    return entries_;
  }

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

std::vector<uint8_t> serialize_archive(const Archive& archive);
Archive deserialize_archive(const std::vector<uint8_t>& bytes);

void write_archive(const std::string& path, const Archive& archive);
Archive read_archive(const std::string& path);

}  // namespace midistyle

#include "midistyle/archive.hpp"

#include <cstring>

#include "midistyle/midi.hpp"  // read_binary_file / write_binary_file

namespace midistyle {

namespace {

constexpr char kMagic[4] = {'M', 'S', 'A', 'R'};
constexpr uint32_t kVersion = 1;

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> 8 * i));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> 8 * i));
}

class Cursor {
 public:
  Cursor(const std::vector<uint8_t>& bytes) : bytes_(bytes) {}

  void expect(size_t n) const {
    require(pos_ + n <= bytes_.size(), errc::corrupt_checkpoint,
            "container truncated");
  }
  uint8_t u8() {
    expect(1);
    return bytes_[pos_++];
  }
  uint16_t u16() {
    expect(2);
    uint16_t v = static_cast<uint16_t>(bytes_[pos_] | bytes_[pos_ + 1] << 8);
    pos_ += 2;
    return v;
  }
  uint32_t u32() {
    expect(4);
    uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = v << 8 | bytes_[pos_ + i];
    pos_ += 4;
    return v;
  }
  uint64_t u64() {
    expect(8);
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = v << 8 | bytes_[pos_ + i];
    pos_ += 8;
    return v;
  }
  std::string str(size_t n) {
    expect(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data()) + pos_, n);
    pos_ += n;
    return s;
  }
  void doubles(double* dst, size_t n) {
    expect(n * 8);
    std::memcpy(dst, bytes_.data() + pos_, n * 8);
    pos_ += n * 8;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<uint8_t>& bytes_;
  size_t pos_ = 0;
};

}  // namespace

void Archive::add(const std::string& name, Tensor tensor) {
  require(!has(name), errc::invalid_argument,
          "duplicate archive entry " + name);
  entries_.emplace_back(name, std::move(tensor));
}

bool Archive::has(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return true;
  }
  return false;
}

const Tensor& Archive::get(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  raise(errc::corrupt_checkpoint, "missing archive entry " + name);
}

std::vector<uint8_t> serialize_archive(const Archive& archive) {
  std::vector<uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, kVersion);
  put_u64(out, archive.meta.size());
  out.insert(out.end(), archive.meta.begin(), archive.meta.end());
  put_u64(out, archive.entries().size());
  for (const auto& [name, tensor] : archive.entries()) {
    require(name.size() <= 0xffff, errc::invalid_argument,
            "entry name too long");
    put_u16(out, static_cast<uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(static_cast<uint8_t>(tensor.rank()));
    for (int64_t d : tensor.shape()) put_u64(out, static_cast<uint64_t>(d));
    const size_t bytes = static_cast<size_t>(tensor.size()) * 8;
    const size_t at = out.size();
    out.resize(at + bytes);
    std::memcpy(out.data() + at, tensor.data(), bytes);
  }
  return out;
}

Archive deserialize_archive(const std::vector<uint8_t>& bytes) {
  Cursor c(bytes);
  require(c.str(4) == std::string(kMagic, 4), errc::corrupt_checkpoint,
          "bad container magic");
  const uint32_t version = c.u32();
  require(version == kVersion, errc::corrupt_checkpoint,
          "unsupported container version " + std::to_string(version) +
              " (expected " + std::to_string(kVersion) + ")");
  Archive archive;
  archive.meta = c.str(c.u64());
  const uint64_t n_entries = c.u64();
  for (uint64_t i = 0; i < n_entries; ++i) {
    std::string name = c.str(c.u16());
    const int rank = c.u8();
    std::vector<int64_t> shape(static_cast<size_t>(rank));
    for (int64_t& d : shape) d = static_cast<int64_t>(c.u64());
    Tensor t(shape);
    c.doubles(t.data(), static_cast<size_t>(t.size()));
    archive.add(name, std::move(t));
  }
  require(c.done(), errc::corrupt_checkpoint, "trailing bytes in container");
  return archive;
}

void write_archive(const std::string& path, const Archive& archive) {
  write_binary_file(path, serialize_archive(archive));
}

Archive read_archive(const std::string& path) {
  return deserialize_archive(read_binary_file(path));
}

}  // namespace midistyle

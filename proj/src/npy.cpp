#include "midistyle/npy.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "midistyle/midi.hpp"  // read_binary_file / write_binary_file

namespace midistyle {

namespace {

constexpr char kMagic[] = "\x93NUMPY";

size_t dtype_size(const std::string& descr) {
  if (descr == "|u1") return 1;
  if (descr == "<f4") return 4;
  raise(errc::unsupported_dtype, "unsupported element type " + descr);
}

// pull the value of a quoted or bare python literal following "'key':"
std::string header_field(const std::string& header, const std::string& key) {
  const std::string needle = "'" + key + "':";
  size_t pos = header.find(needle);
  require(pos != std::string::npos, errc::corrupt_file,
          "container header lacks '" + key + "'");
  pos += needle.size();
  while (pos < header.size() && header[pos] == ' ') ++pos;
  require(pos < header.size(), errc::corrupt_file, "truncated header");
  if (header[pos] == '\'') {
    size_t end = header.find('\'', pos + 1);
    require(end != std::string::npos, errc::corrupt_file, "unclosed quote");
    return header.substr(pos + 1, end - pos - 1);
  }
  if (header[pos] == '(') {
    size_t end = header.find(')', pos);
    require(end != std::string::npos, errc::corrupt_file, "unclosed tuple");
    return header.substr(pos, end - pos + 1);
  }
  size_t end = header.find_first_of(",}", pos);
  require(end != std::string::npos, errc::corrupt_file, "unterminated value");
  return header.substr(pos, end - pos);
}

std::vector<int64_t> parse_shape(const std::string& tuple) {
  std::vector<int64_t> shape;
  int64_t current = -1;
  for (char c : tuple) {
    if (c >= '0' && c <= '9') {
      current = (current < 0 ? 0 : current) * 10 + (c - '0');
    } else if (current >= 0) {
      shape.push_back(current);
      current = -1;
    }
  }
  if (current >= 0) shape.push_back(current);
  return shape;
}

}  // namespace

NpyArray read_npy(const std::vector<uint8_t>& bytes) {
  require(bytes.size() >= 10, errc::bad_magic, "file too short for container");
  require(std::memcmp(bytes.data(), kMagic, 6) == 0, errc::bad_magic,
          "not an NPY container");
  const int major = bytes[6];
  const int minor = bytes[7];
  require(major == 1 && minor == 0, errc::corrupt_file,
          "unsupported container version");
  const size_t header_len = bytes[8] | bytes[9] << 8;
  require(bytes.size() >= 10 + header_len, errc::corrupt_file,
          "truncated header");
  const std::string header(reinterpret_cast<const char*>(bytes.data()) + 10,
                           header_len);

  NpyArray array;
  array.descr = header_field(header, "descr");
  const std::string order = header_field(header, "fortran_order");
  require(order.rfind("False", 0) == 0, errc::corrupt_file,
          "column-major storage is not supported");
  array.shape = parse_shape(header_field(header, "shape"));

  size_t count = 1;
  for (int64_t d : array.shape) count *= static_cast<size_t>(d);
  const size_t payload = count * dtype_size(array.descr);
  require(bytes.size() == 10 + header_len + payload, errc::corrupt_file,
          "payload size disagrees with header");
  array.raw.assign(bytes.begin() + 10 + static_cast<long>(header_len),
                   bytes.end());
  return array;
}

std::vector<uint8_t> write_npy(const NpyArray& array) {
  size_t count = 1;
  std::ostringstream shape;
  shape << "(";
  for (size_t i = 0; i < array.shape.size(); ++i) {
    count *= static_cast<size_t>(array.shape[i]);
    shape << array.shape[i] << (i + 1 < array.shape.size() ? ", " : "");
  }
  if (array.shape.size() == 1) shape << ",";
  shape << ")";
  require(array.raw.size() == count * dtype_size(array.descr),
          errc::shape_mismatch, "payload does not match shape");

  std::string header = "{'descr': '" + array.descr +
                       "', 'fortran_order': False, 'shape': " + shape.str() +
                       ", }";
  // pad so the full preamble is a multiple of 64 bytes, newline-terminated
  const size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');
  require(header.size() <= 0xffff, errc::invalid_argument, "header too large");

  std::vector<uint8_t> out;
  out.reserve(10 + header.size() + array.raw.size());
  out.insert(out.end(), kMagic, kMagic + 6);
  out.push_back(1);
  out.push_back(0);
  out.push_back(static_cast<uint8_t>(header.size() & 0xff));
  out.push_back(static_cast<uint8_t>(header.size() >> 8));
  out.insert(out.end(), header.begin(), header.end());
  out.insert(out.end(), array.raw.begin(), array.raw.end());
  return out;
}

std::vector<PianoRoll> load_rolls(const std::string& path,
                                  bool require_binary) {
  NpyArray array = read_npy(read_binary_file(path));
  require(array.shape.size() == 3 && array.shape[1] == PianoRoll::kSteps &&
              array.shape[2] == PianoRoll::kPitches,
          errc::shape_mismatch,
          path + ": expected shape N x 64 x 84");
  const size_t n = static_cast<size_t>(array.shape[0]);
  std::vector<PianoRoll> rolls(n);

  if (array.descr == "|u1") {
    const uint8_t* src = array.raw.data();
    for (size_t i = 0; i < n; ++i) {
      for (int c = 0; c < PianoRoll::kCells; ++c) {
        uint8_t v = *src++;
        require(v <= 1, errc::non_binary_values,
                path + ": byte entries must be 0 or 1");
        rolls[i].values[static_cast<size_t>(c)] = v;
      }
      rolls[i].binary = true;
    }
  } else if (array.descr == "<f4") {
    const uint8_t* src = array.raw.data();
    for (size_t i = 0; i < n; ++i) {
      bool binary = true;
      for (int c = 0; c < PianoRoll::kCells; ++c) {
        float f;
        std::memcpy(&f, src, 4);
        src += 4;
        require(std::isfinite(f) && f >= 0.0f && f <= 1.0f,
                errc::corrupt_file, path + ": entries must lie in [0,1]");
        rolls[i].values[static_cast<size_t>(c)] = f;
        binary &= (f == 0.0f || f == 1.0f);
      }
      rolls[i].binary = binary;
    }
    if (require_binary) {
      for (const PianoRoll& r : rolls) {
        require(r.binary, errc::non_binary_values,
                path + ": binary rolls required");
      }
    }
  } else {
    raise(errc::unsupported_dtype,
          path + ": unsupported element type " + array.descr);
  }
  return rolls;
}

void save_rolls(const std::string& path, const std::vector<PianoRoll>& rolls) {
  bool all_binary = true;
  for (const PianoRoll& r : rolls) all_binary &= r.check_binary();

  NpyArray array;
  array.shape = {static_cast<int64_t>(rolls.size()), PianoRoll::kSteps,
                 PianoRoll::kPitches};
  if (all_binary) {
    array.descr = "|u1";
    array.raw.reserve(rolls.size() * PianoRoll::kCells);
    for (const PianoRoll& r : rolls) {
      for (double v : r.values) {
        array.raw.push_back(v != 0.0 ? 1 : 0);
      }
    }
  } else {
    array.descr = "<f4";
    array.raw.resize(rolls.size() * PianoRoll::kCells * 4);
    uint8_t* dst = array.raw.data();
    for (const PianoRoll& r : rolls) {
      for (double v : r.values) {
        float f = static_cast<float>(v);
        std::memcpy(dst, &f, 4);
        dst += 4;
      }
    }
  }
  write_binary_file(path, write_npy(array));
}

}  // namespace midistyle

#include "midistyle/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "midistyle/errors.hpp"

namespace midistyle {

uint64_t Rng::uniform_int(uint64_t n) {
  require(n > 0, errc::invalid_argument, "uniform_int: n must be positive");
  if (n == 1) return 0;
  // reject draws above the largest multiple of n to avoid modulo bias
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  // Box-Muller, using the cosine branch only
  double u1 = uniform();
  double u2 = uniform();
  while (u1 <= 0.0) u1 = uniform();  // guard log(0)
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<size_t> Rng::sample_without_replacement(size_t n, size_t k) {
  require(k <= n, errc::invalid_argument,
          "sample_without_replacement: k exceeds n");
  // partial Fisher-Yates over an index array
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  for (size_t i = 0; i < k; ++i) {
    size_t j = i + static_cast<size_t>(uniform_int(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

std::string Rng::state() const {
  std::ostringstream out;
  out << engine_;
  return out.str();
}

void Rng::set_state(const std::string& s) {
  std::istringstream in(s);
  in >> engine_;
  require(!in.fail(), errc::corrupt_checkpoint, "bad rng state string");
}

uint64_t mix_seed(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t combine_seeds(uint64_t a, uint64_t b) {
  return mix_seed(a ^ mix_seed(b + 0x632be59bd9b4e019ULL));
}

}  // namespace midistyle

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace midistyle {

// Deterministic random source. All distributions are implemented here (not
// via std::uniform_*_distribution, whose output is implementation-defined)
// so that a seed pins the exact stream on every platform, and so the
// engine state can be serialized into checkpoints and restored bit-exactly.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // uniform in [0, 1) with 53 random mantissa bits
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // unbiased integer in [0, n) by rejection
  uint64_t uniform_int(uint64_t n);

  // standard normal via Box-Muller; no cached spare, so each call consumes
  // exactly two uniforms and the stream position stays predictable
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Fisher-Yates
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct indices from [0, n), sampled without replacement
  std::vector<size_t> sample_without_replacement(size_t n, size_t k);

  // engine state as decimal words, restorable with set_state
  std::string state() const;
  void set_state(const std::string& s);

 private:
  std::mt19937_64 engine_;
};

// SplitMix64; used to derive independent child seeds from a master seed.
uint64_t mix_seed(uint64_t x);
uint64_t combine_seeds(uint64_t a, uint64_t b);

}  // namespace midistyle

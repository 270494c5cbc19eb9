#include "midistyle/dataset.hpp"

#include <algorithm>
#include <sstream>

namespace midistyle {

const char* genre_name(GenreLabel label) {
  return label == GenreLabel::Classic ? "Classic" : "Jazz";
}

GenreLabel genre_from_name(const std::string& name) {
  if (name == "Classic" || name == "classic") return GenreLabel::Classic;
  if (name == "Jazz" || name == "jazz") return GenreLabel::Jazz;
  raise(errc::invalid_argument, "unknown genre '" + name + "'");
}

DomainSplit split(const std::vector<LabeledSample>& samples,
                  double test_fraction, uint64_t seed) {
  require(test_fraction > 0.0 && test_fraction < 1.0, errc::invalid_split,
          "test_fraction must lie strictly between 0 and 1");

  DomainSplit out;
  out.seed = seed;
  Rng rng(seed);

  // genre order fixed (Classic, then Jazz) so the rng stream is pinned
  for (GenreLabel label : {GenreLabel::Classic, GenreLabel::Jazz}) {
    std::vector<size_t> idx;
    for (size_t i = 0; i < samples.size(); ++i) {
      if (samples[i].label == label) idx.push_back(i);
    }
    require(!idx.empty(), errc::empty_genre,
            std::string("no samples labeled ") + genre_name(label));
    rng.shuffle(idx);
    const size_t n_test =
        static_cast<size_t>(static_cast<double>(idx.size()) * test_fraction);
    auto& train = label == kDomainA ? out.train_a : out.train_b;
    auto& test = label == kDomainA ? out.test_a : out.test_b;
    for (size_t i = 0; i < idx.size(); ++i) {
      (i < n_test ? test : train).push_back(samples[idx[i]]);
    }
  }
  return out;
}

std::vector<LabeledSample> sample_domain(const DomainSplit& split,
                                         GenreLabel domain, size_t n,
                                         Rng& rng) {
  require(n >= 1, errc::invalid_count, "sample count must be at least 1");
  const std::vector<LabeledSample>& pool = split.train(domain);
  require(!pool.empty(), errc::empty_domain,
          std::string("train set for ") + genre_name(domain) + " is empty");
  std::vector<LabeledSample> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    out.push_back(pool[static_cast<size_t>(rng.uniform_int(pool.size()))]);
  }
  return out;
}

std::vector<LabeledSample> sample_mixed(const DomainSplit& split, size_t n,
                                        Rng& rng) {
  require(n >= 1, errc::invalid_count, "sample count must be at least 1");
  const size_t total = split.mixed_size();
  require(total > 0, errc::empty_domain, "mixed train set is empty");
  std::vector<LabeledSample> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    size_t j = static_cast<size_t>(rng.uniform_int(total));
    out.push_back(j < split.train_a.size()
                      ? split.train_a[j]
                      : split.train_b[j - split.train_a.size()]);
  }
  return out;
}

void SyntheticSpec::validate() const {
  require(0 <= a_row_lo && a_row_lo <= a_row_hi &&
              a_row_hi < PianoRoll::kPitches,
          errc::invalid_argument, "genre-A row band out of range");
  require(0 <= b_row_lo && b_row_lo <= b_row_hi &&
              b_row_hi < PianoRoll::kPitches,
          errc::invalid_argument, "genre-B row band out of range");
  require(a_row_hi < b_row_lo || b_row_hi < a_row_lo, errc::invalid_argument,
          "genre row bands must be disjoint");
  require(notes_per_phrase >= 0, errc::invalid_argument,
          "notes_per_phrase must be non-negative");
  if (anchors) {
    require(anchor_row_a >= a_row_lo && anchor_row_a <= a_row_hi,
            errc::invalid_argument, "anchor_row_a outside genre-A band");
    require(anchor_row_b >= b_row_lo && anchor_row_b <= b_row_hi,
            errc::invalid_argument, "anchor_row_b outside genre-B band");
  }
}

namespace {

LabeledSample synthetic_sample(const SyntheticSpec& spec, GenreLabel label,
                               size_t index, Rng& rng) {
  const bool is_a = label == kDomainA;
  const int row_lo = is_a ? spec.a_row_lo : spec.b_row_lo;
  const int row_hi = is_a ? spec.a_row_hi : spec.b_row_hi;
  // genre A fires on off-beats (step % 4 == 2), genre B on down-beats
  const int beat_offset = is_a ? 2 : 0;

  LabeledSample s;
  s.label = label;
  s.source_id = std::string(is_a ? "synthA#" : "synthB#") +
                std::to_string(index);
  s.roll.binary = true;

  if (spec.anchors) {
    const int anchor = is_a ? spec.anchor_row_a : spec.anchor_row_b;
    for (int step = beat_offset; step < PianoRoll::kSteps; step += 4) {
      s.roll.at(step, anchor) = 1.0;
    }
  }
  const int n_beats = PianoRoll::kSteps / 4;
  for (int i = 0; i < spec.notes_per_phrase; ++i) {
    const int row = row_lo + static_cast<int>(rng.uniform_int(
                                 static_cast<uint64_t>(row_hi - row_lo + 1)));
    const int step =
        4 * static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n_beats))) +
        beat_offset;
    const int duration = 1 + static_cast<int>(rng.uniform_int(2));
    for (int t = step; t < std::min(step + duration, PianoRoll::kSteps); ++t) {
      s.roll.at(t, row) = 1.0;
    }
  }
  return s;
}

}  // namespace

std::vector<LabeledSample> make_synthetic(const SyntheticSpec& spec,
                                          size_t n_per_genre, uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  std::vector<LabeledSample> out;
  out.reserve(2 * n_per_genre);
  for (size_t i = 0; i < n_per_genre; ++i) {
    out.push_back(synthetic_sample(spec, kDomainA, i, rng));
  }
  for (size_t i = 0; i < n_per_genre; ++i) {
    out.push_back(synthetic_sample(spec, kDomainB, i, rng));
  }
  return out;
}

GenreLabel pitch_band_oracle(const SyntheticSpec& spec, const PianoRoll& roll) {
  double mass_a = 0.0, mass_b = 0.0;
  for (int t = 0; t < PianoRoll::kSteps; ++t) {
    for (int p = spec.a_row_lo; p <= spec.a_row_hi; ++p) {
      mass_a += roll.at(t, p);
    }
    for (int p = spec.b_row_lo; p <= spec.b_row_hi; ++p) {
      mass_b += roll.at(t, p);
    }
  }
  if (mass_a > mass_b) return kDomainA;
  return kDomainB;  // ties go to Classic
}

std::string split_manifest(const DomainSplit& split) {
  std::ostringstream out;
  out << "seed=" << split.seed << "\n";
  auto emit = [&out](const char* key, const std::vector<LabeledSample>& list) {
    for (const LabeledSample& s : list) {
      out << key << "=" << s.source_id << "\n";
    }
  };
  emit("train_a", split.train_a);
  emit("test_a", split.test_a);
  emit("train_b", split.train_b);
  emit("test_b", split.test_b);
  return out.str();
}

}  // namespace midistyle

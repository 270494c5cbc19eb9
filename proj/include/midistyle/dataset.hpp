#pragma once

#include <string>
#include <vector>

#include "midistyle/pianoroll.hpp"
#include "midistyle/rng.hpp"

namespace midistyle {

// The two genres. Classic sorts first lexicographically, which fixes every
// deterministic tie-break in the classifiers.
enum class GenreLabel { Classic = 0, Jazz = 1 };

constexpr int kGenreCount = 2;

// Domain A is Jazz, domain B is Classic; transfer direction A->B is J2C.
constexpr GenreLabel kDomainA = GenreLabel::Jazz;
constexpr GenreLabel kDomainB = GenreLabel::Classic;

const char* genre_name(GenreLabel label);
GenreLabel genre_from_name(const std::string& name);

struct LabeledSample {
  PianoRoll roll;
  GenreLabel label = GenreLabel::Classic;
  std::string source_id;
};

// Stratified train/test partition; A-lists hold Jazz, B-lists Classic.
struct DomainSplit {
  std::vector<LabeledSample> train_a, test_a;
  std::vector<LabeledSample> train_b, test_b;
  uint64_t seed = 0;

  const std::vector<LabeledSample>& train(GenreLabel label) const {
    return label == kDomainA ? train_a : train_b;
  }
  const std::vector<LabeledSample>& test(GenreLabel label) const {
    return label == kDomainA ? test_a : test_b;
  }
  size_t mixed_size() const { return train_a.size() + train_b.size(); }
};

// Deterministic per-genre split: each genre is shuffled with the seed and
// floor(n * test_fraction) samples go to its test list.
DomainSplit split(const std::vector<LabeledSample>& samples,
                  double test_fraction, uint64_t seed);

// Uniform draws with replacement from the domain's train list.
std::vector<LabeledSample> sample_domain(const DomainSplit& split,
                                         GenreLabel domain, size_t n,
                                         Rng& rng);

// Uniform draws with replacement from train_a ∪ train_b (the mixed set).
std::vector<LabeledSample> sample_mixed(const DomainSplit& split, size_t n,
                                        Rng& rng);

// Synthetic two-genre corpus for desk-scale tests. The genres occupy
// disjoint pitch bands and beat grids, so an analytic classifier exists:
// genre A (Jazz) plays rows a_row_lo..a_row_hi on off-beats, genre B
// (Classic) rows b_row_lo..b_row_hi on down-beats. Each roll also carries
// an always-on anchor pulse row, making single-cell splits perfect.
struct SyntheticSpec {
  int a_row_lo = 0;
  int a_row_hi = 41;
  int b_row_lo = 42;
  int b_row_hi = 83;
  int notes_per_phrase = 24;
  int anchor_row_a = 21;
  int anchor_row_b = 62;
  bool anchors = true;

  void validate() const;
};

// 2*n_per_genre samples: genre A first, then genre B.
std::vector<LabeledSample> make_synthetic(const SyntheticSpec& spec,
                                          size_t n_per_genre, uint64_t seed);

// The analytic judge for synthetic data: whichever pitch band holds more
// active cells wins (ties go to Classic, the lexicographically first label).
GenreLabel pitch_band_oracle(const SyntheticSpec& spec, const PianoRoll& roll);

// Plain-text record of which source ids landed in which split list.
std::string split_manifest(const DomainSplit& split);

}  // namespace midistyle

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "midistyle/errors.hpp"

namespace midistyle {

// One sounding note in tick time.
struct NoteEvent {
  int pitch = 0;        // MIDI note number 0..127
  int64_t onset = 0;    // ticks, >= 0
  int64_t duration = 1; // ticks, >= 1
  int velocity = 90;    // 1..127

  bool operator==(const NoteEvent&) const = default;
};

// Fixed-size phrase matrix: 64 time steps x 84 pitch rows, time-major.
// Entries are in [0,1]; `binary` records that every entry is exactly 0 or 1.
struct PianoRoll {
  static constexpr int kSteps = 64;
  static constexpr int kPitches = 84;
  static constexpr int kCells = kSteps * kPitches;

  std::array<double, kCells> values{};
  bool binary = false;

  double& at(int step, int pitch_row) {
    return values[static_cast<size_t>(step * kPitches + pitch_row)];
  }
  double at(int step, int pitch_row) const {
    return values[static_cast<size_t>(step * kPitches + pitch_row)];
  }

  bool check_binary() const {
    for (double v : values) {
      if (v != 0.0 && v != 1.0) return false;
    }
    return true;
  }

  int active_cells() const {
    int n = 0;
    for (double v : values) n += (v != 0.0);
    return n;
  }

  bool operator==(const PianoRoll&) const = default;
};

// How tick time maps onto the 64x84 grid.
struct GridConfig {
  int steps_per_bar = 16;
  int bars_per_phrase = 4;
  int pitch_floor = 24;  // MIDI note of roll row 0
  int pitch_count = PianoRoll::kPitches;

  int steps_per_phrase() const { return steps_per_bar * bars_per_phrase; }

  void validate() const {
    require(steps_per_bar >= 1 && bars_per_phrase >= 1, errc::invalid_grid,
            "grid steps must be positive");
    require(steps_per_phrase() == PianoRoll::kSteps, errc::invalid_grid,
            "steps_per_bar * bars_per_phrase must equal 64");
    require(pitch_count == PianoRoll::kPitches, errc::invalid_grid,
            "pitch_count must equal 84");
    require(pitch_floor >= 0 && pitch_floor + pitch_count <= 128,
            errc::invalid_grid, "pitch range must fit in MIDI notes 0..127");
  }
};

// Defaults applied when rendering rolls back to MIDI.
struct ExportConfig {
  int tempo_bpm = 120;
  int velocity = 90;
  int program = 0;  // acoustic grand
};

// threshold in (0,1): entry >= threshold -> 1, else 0
PianoRoll binarize(const PianoRoll& roll, double threshold = 0.5);

// Quantize a filtered song onto the step grid and cut consecutive 64-step
// phrases; the trailing partial phrase is dropped. A cell is active iff a
// note overlaps that step's tick interval. Pitches outside the grid's range
// are dropped and counted in *dropped_pitches. song_end_ticks extends the
// song beyond the last note (e.g. to an end-of-track marker) so trailing
// silence still produces steps.
std::vector<PianoRoll> events_to_rolls(const std::vector<NoteEvent>& events,
                                       const GridConfig& grid,
                                       int64_t ticks_per_beat,
                                       int64_t song_end_ticks = 0,
                                       int* dropped_pitches = nullptr);

// Inverse direction: every maximal run of consecutive active cells in a
// pitch row becomes one sustained note. Rolls are laid out back to back,
// phrase i starting at tick i * 64 * ticks_per_step.
std::vector<NoteEvent> rolls_to_events(const std::vector<PianoRoll>& rolls,
                                       const GridConfig& grid,
                                       int64_t ticks_per_beat,
                                       const ExportConfig& exp = {});

inline std::vector<NoteEvent> roll_to_events(const PianoRoll& roll,
                                             const GridConfig& grid,
                                             int64_t ticks_per_beat,
                                             const ExportConfig& exp = {}) {
  return rolls_to_events({roll}, grid, ticks_per_beat, exp);
}

}  // namespace midistyle

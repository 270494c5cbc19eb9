#include "midistyle/pianoroll.hpp"

#include <algorithm>

namespace midistyle {

namespace {

int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

// ticks in one bar, assuming 4/4 after filtering
int64_t bar_ticks(int64_t ticks_per_beat) { return 4 * ticks_per_beat; }

}  // namespace

PianoRoll binarize(const PianoRoll& roll, double threshold) {
  require(threshold > 0.0 && threshold < 1.0, errc::invalid_threshold,
          "threshold must lie strictly between 0 and 1");
  PianoRoll out;
  for (size_t i = 0; i < roll.values.size(); ++i) {
    out.values[i] = roll.values[i] >= threshold ? 1.0 : 0.0;
  }
  out.binary = true;
  return out;
}

std::vector<PianoRoll> events_to_rolls(const std::vector<NoteEvent>& events,
                                       const GridConfig& grid,
                                       int64_t ticks_per_beat,
                                       int64_t song_end_ticks,
                                       int* dropped_pitches) {
  grid.validate();
  require(ticks_per_beat > 0, errc::invalid_argument,
          "ticks_per_beat must be positive");

  const int64_t bt = bar_ticks(ticks_per_beat);
  const int64_t spb = grid.steps_per_bar;

  int64_t end = song_end_ticks;
  for (const NoteEvent& e : events) {
    end = std::max(end, e.onset + e.duration);
  }

  // total whole steps covered by the song; phrase count = floor(steps / 64)
  const int64_t total_steps = ceil_div(end * spb, bt);
  const int64_t n_phrases = total_steps / grid.steps_per_phrase();
  require(n_phrases > 0, errc::empty_after_quantization,
          "song shorter than one full phrase");

  std::vector<PianoRoll> rolls(static_cast<size_t>(n_phrases));
  for (PianoRoll& r : rolls) r.binary = true;

  const int64_t grid_steps = n_phrases * grid.steps_per_phrase();
  int dropped = 0;
  for (const NoteEvent& e : events) {
    const int row = e.pitch - grid.pitch_floor;
    if (row < 0 || row >= grid.pitch_count) {
      ++dropped;
      continue;
    }
    // the note sounds during step s iff [onset, onset+duration) overlaps
    // [s*bt/spb, (s+1)*bt/spb); cross-multiplied to stay in integers
    const int64_t s0 = e.onset * spb / bt;
    const int64_t s1 = std::min(ceil_div((e.onset + e.duration) * spb, bt),
                                grid_steps);
    for (int64_t s = s0; s < s1; ++s) {
      rolls[static_cast<size_t>(s / grid.steps_per_phrase())].at(
          static_cast<int>(s % grid.steps_per_phrase()), row) = 1.0;
    }
  }
  if (dropped_pitches) *dropped_pitches = dropped;
  return rolls;
}

std::vector<NoteEvent> rolls_to_events(const std::vector<PianoRoll>& rolls,
                                       const GridConfig& grid,
                                       int64_t ticks_per_beat,
                                       const ExportConfig& exp) {
  grid.validate();
  require(ticks_per_beat > 0, errc::invalid_argument,
          "ticks_per_beat must be positive");
  const int64_t bt = bar_ticks(ticks_per_beat);
  require(bt % grid.steps_per_bar == 0, errc::invalid_grid,
          "ticks per bar must be divisible by steps_per_bar");
  const int64_t tps = bt / grid.steps_per_bar;  // ticks per step

  std::vector<NoteEvent> events;
  const int n_steps = grid.steps_per_phrase();
  for (size_t i = 0; i < rolls.size(); ++i) {
    const PianoRoll& r = rolls[i];
    require(r.binary && r.check_binary(), errc::non_binary_roll,
            "roll must be binarized before MIDI export");
    const int64_t phrase_tick = static_cast<int64_t>(i) * n_steps * tps;
    for (int p = 0; p < grid.pitch_count; ++p) {
      int s = 0;
      while (s < n_steps) {
        if (r.at(s, p) == 0.0) {
          ++s;
          continue;
        }
        int run = s;
        while (run < n_steps && r.at(run, p) != 0.0) ++run;
        events.push_back(NoteEvent{grid.pitch_floor + p,
                                   phrase_tick + s * tps,
                                   static_cast<int64_t>(run - s) * tps,
                                   exp.velocity});
        s = run;
      }
    }
  }
  std::sort(events.begin(), events.end(), [](const NoteEvent& a,
                                             const NoteEvent& b) {
    if (a.onset != b.onset) return a.onset < b.onset;
    return a.pitch < b.pitch;
  });
  return events;
}

}  // namespace midistyle

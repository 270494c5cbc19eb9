#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "midistyle/pianoroll.hpp"

namespace midistyle {

struct TimeSignature {
  int64_t tick = 0;
  int numerator = 4;
  int denominator = 4;

  bool operator==(const TimeSignature&) const = default;
};

// Song-level metadata gathered while parsing.
struct MidiMeta {
  int format = 0;
  int ticks_per_beat = 480;
  std::vector<TimeSignature> time_signatures;  // all tracks, sorted by tick
  int64_t tempo_us_per_beat = 500000;          // first tempo event wins
  int64_t song_end_ticks = 0;                  // latest end-of-track time
  int unmatched_note_ons = 0;                  // note-ons closed at track end
};

struct ParsedMidi {
  std::vector<NoteEvent> events;  // sorted by onset, then pitch
  MidiMeta meta;
};

// Standard MIDI File reader, formats 0 and 1. Note-ons are matched to
// note-offs first-in-first-out per (channel, pitch); a note-on left open at
// end of track is closed there and counted in meta.unmatched_note_ons.
ParsedMidi parse_midi(const std::vector<uint8_t>& bytes);

// Single-track format-0 writer. Emits 4/4 time signature, tempo and program
// from the export config at tick 0, then the notes. The end-of-track marker
// is placed at max(song_end_ticks, last note end) so trailing silence
// survives a round trip.
std::vector<uint8_t> write_midi(const std::vector<NoteEvent>& events,
                                const ExportConfig& exp = {},
                                int ticks_per_beat = 480,
                                int64_t song_end_ticks = 0);

// Corpus admission filter.
struct FilterDecision {
  enum class Reason {
    OK,
    FirstBeatNonZero,
    TimeSignatureChanged,
    TimeSignatureNot44,
    NoNotes,
  };

  bool accepted = false;
  Reason reason = Reason::NoNotes;

  static FilterDecision ok() { return {true, Reason::OK}; }
  static FilterDecision reject(Reason r) { return {false, r}; }
};

const char* filter_reason_name(FilterDecision::Reason r);

// Rejects songs with no notes, a first onset after tick 0, a time signature
// change mid-song, or a (single) signature other than 4/4. Files without any
// time-signature event default to 4/4 and pass that check.
FilterDecision filter_midi(const ParsedMidi& parsed);

std::vector<uint8_t> read_binary_file(const std::string& path);
void write_binary_file(const std::string& path,
                       const std::vector<uint8_t>& bytes);

}  // namespace midistyle

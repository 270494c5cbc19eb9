#include "midistyle/midi.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <map>

namespace midistyle {

namespace {

class ByteReader {
 public:
  ByteReader(const uint8_t* data, size_t size) : data_(data), size_(size) {}

  size_t pos() const { return pos_; }
  size_t remaining() const { return size_ - pos_; }
  bool done() const { return pos_ >= size_; }

  uint8_t u8() {
    require(pos_ < size_, errc::malformed_midi, "truncated file");
    return data_[pos_++];
  }
  uint8_t peek() const {
    require(pos_ < size_, errc::malformed_midi, "truncated file");
    return data_[pos_];
  }
  uint16_t u16() { return static_cast<uint16_t>(u8() << 8 | u8()); }
  uint32_t u32() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = v << 8 | u8();
    return v;
  }
  // variable-length quantity, 7 bits per byte, high bit = continue
  uint32_t varint() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      uint8_t b = u8();
      v = v << 7 | (b & 0x7f);
      if (!(b & 0x80)) return v;
    }
    raise(errc::malformed_midi, "variable-length quantity exceeds 4 bytes");
  }
  void skip(size_t n) {
    require(remaining() >= n, errc::malformed_midi, "truncated chunk");
    pos_ += n;
  }
  std::string tag() {
    std::string s;
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>(u8()));
    return s;
  }

 private:
  const uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
};

struct OpenNote {
  int64_t onset;
  int velocity;
};

void parse_track(ByteReader& r, size_t chunk_len, MidiMeta& meta,
                 bool& tempo_seen, std::vector<NoteEvent>& events) {
  const size_t chunk_end = r.pos() + chunk_len;
  // FIFO of open note-ons per (channel, pitch)
  std::map<std::pair<int, int>, std::deque<OpenNote>> open;
  int64_t tick = 0;
  uint8_t running_status = 0;
  bool ended = false;

  auto close_note = [&](int channel, int pitch, int64_t off_tick) {
    auto it = open.find({channel, pitch});
    if (it == open.end() || it->second.empty()) return;  // stray note-off
    OpenNote on = it->second.front();
    it->second.pop_front();
    events.push_back(NoteEvent{pitch, on.onset,
                               std::max<int64_t>(1, off_tick - on.onset),
                               on.velocity});
  };

  while (r.pos() < chunk_end && !ended) {
    tick += r.varint();
    uint8_t status = r.peek();
    if (status & 0x80) {
      r.skip(1);
      if (status < 0xf0) running_status = status;
    } else {
      require(running_status != 0, errc::malformed_midi,
              "data byte without running status");
      status = running_status;
    }

    if (status == 0xff) {  // meta event
      uint8_t type = r.u8();
      uint32_t len = r.varint();
      require(r.remaining() >= len, errc::malformed_midi, "truncated meta");
      if (type == 0x58 && len >= 2) {
        int num = r.u8();
        int den_pow = r.u8();
        r.skip(len - 2);
        meta.time_signatures.push_back(
            TimeSignature{tick, num, 1 << den_pow});
      } else if (type == 0x51 && len == 3) {
        int64_t t = 0;
        for (int i = 0; i < 3; ++i) t = t << 8 | r.u8();
        if (!tempo_seen) {
          meta.tempo_us_per_beat = t;
          tempo_seen = true;
        }
      } else if (type == 0x2f) {
        r.skip(len);
        ended = true;
      } else {
        r.skip(len);
      }
      running_status = 0;
    } else if (status == 0xf0 || status == 0xf7) {  // sysex
      uint32_t len = r.varint();
      r.skip(len);
      running_status = 0;
    } else {
      const int kind = status >> 4;
      const int channel = status & 0x0f;
      switch (kind) {
        case 0x8: {  // note off
          int pitch = r.u8();
          r.skip(1);  // release velocity
          close_note(channel, pitch, tick);
          break;
        }
        case 0x9: {  // note on (velocity 0 acts as note off)
          int pitch = r.u8();
          int vel = r.u8();
          if (vel == 0) {
            close_note(channel, pitch, tick);
          } else {
            open[{channel, pitch}].push_back(OpenNote{tick, vel});
          }
          break;
        }
        case 0xa:  // polyphonic aftertouch
        case 0xb:  // controller
        case 0xe:  // pitch bend
          r.skip(2);
          break;
        case 0xc:  // program change
        case 0xd:  // channel aftertouch
          r.skip(1);
          break;
        default:
          raise(errc::malformed_midi, "unexpected status byte");
      }
    }
  }

  // salvage: close anything still sounding at the end of the track
  for (auto& [key, queue] : open) {
    for (const OpenNote& on : queue) {
      events.push_back(NoteEvent{key.second, on.onset,
                                 std::max<int64_t>(1, tick - on.onset),
                                 on.velocity});
      ++meta.unmatched_note_ons;
    }
  }

  meta.song_end_ticks = std::max(meta.song_end_ticks, tick);
  require(r.pos() <= chunk_end, errc::malformed_midi, "event ran past chunk");
  r.skip(chunk_end - r.pos());
}

void append_varint(std::vector<uint8_t>& out, int64_t value) {
  uint8_t buf[5];
  int n = 0;
  uint64_t v = static_cast<uint64_t>(value);
  do {
    buf[n++] = static_cast<uint8_t>(v & 0x7f);
    v >>= 7;
  } while (v != 0);
  for (int i = n - 1; i > 0; --i) {
    out.push_back(static_cast<uint8_t>(buf[i] | 0x80));
  }
  out.push_back(buf[0]);
}

void append_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

void append_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

}  // namespace

ParsedMidi parse_midi(const std::vector<uint8_t>& bytes) {
  ByteReader r(bytes.data(), bytes.size());
  require(bytes.size() >= 14, errc::malformed_midi, "file too short");
  require(r.tag() == "MThd", errc::malformed_midi, "missing MThd header");
  uint32_t header_len = r.u32();
  require(header_len >= 6, errc::malformed_midi, "bad header length");

  ParsedMidi parsed;
  parsed.meta.format = r.u16();
  require(parsed.meta.format == 0 || parsed.meta.format == 1,
          errc::malformed_midi, "only SMF formats 0 and 1 are supported");
  uint16_t n_tracks = r.u16();
  uint16_t division = r.u16();
  require(!(division & 0x8000), errc::malformed_midi,
          "SMPTE time division is not supported");
  require(division > 0, errc::malformed_midi, "zero time division");
  parsed.meta.ticks_per_beat = division;
  r.skip(header_len - 6);

  uint16_t tracks_seen = 0;
  bool tempo_seen = false;
  while (!r.done() && tracks_seen < n_tracks) {
    require(r.remaining() >= 8, errc::malformed_midi, "truncated chunk header");
    std::string tag = r.tag();
    uint32_t len = r.u32();
    require(r.remaining() >= len, errc::malformed_midi, "truncated chunk");
    if (tag == "MTrk") {
      parse_track(r, len, parsed.meta, tempo_seen, parsed.events);
      ++tracks_seen;
    } else {
      r.skip(len);  // unknown chunk types are skipped per the SMF spec
    }
  }
  require(tracks_seen == n_tracks, errc::malformed_midi,
          "fewer tracks than the header declares");

  std::sort(parsed.events.begin(), parsed.events.end(),
            [](const NoteEvent& a, const NoteEvent& b) {
              if (a.onset != b.onset) return a.onset < b.onset;
              return a.pitch < b.pitch;
            });
  std::sort(parsed.meta.time_signatures.begin(),
            parsed.meta.time_signatures.end(),
            [](const TimeSignature& a, const TimeSignature& b) {
              return a.tick < b.tick;
            });
  return parsed;
}

std::vector<uint8_t> write_midi(const std::vector<NoteEvent>& events,
                                const ExportConfig& exp, int ticks_per_beat,
                                int64_t song_end_ticks) {
  require(ticks_per_beat > 0 && ticks_per_beat < 0x8000,
          errc::invalid_argument, "ticks_per_beat out of range");
  require(exp.tempo_bpm > 0, errc::invalid_argument, "tempo must be positive");
  require(exp.velocity >= 1 && exp.velocity <= 127, errc::invalid_argument,
          "velocity out of range");
  require(exp.program >= 0 && exp.program <= 127, errc::invalid_argument,
          "program out of range");

  // (tick, order-class, pitch, payload); order keeps metas first and
  // note-offs ahead of note-ons at equal ticks
  struct Emitted {
    int64_t tick;
    int order;
    int pitch;
    std::vector<uint8_t> payload;
  };
  std::vector<Emitted> emitted;
  emitted.reserve(events.size() * 2 + 4);

  emitted.push_back({0, 0, 0, {0xff, 0x58, 0x04, 0x04, 0x02, 0x18, 0x08}});
  const uint32_t tempo_us =
      static_cast<uint32_t>(60000000 / static_cast<int64_t>(exp.tempo_bpm));
  emitted.push_back({0, 0, 1,
                     {0xff, 0x51, 0x03, static_cast<uint8_t>(tempo_us >> 16),
                      static_cast<uint8_t>(tempo_us >> 8),
                      static_cast<uint8_t>(tempo_us)}});
  emitted.push_back({0, 0, 2, {0xc0, static_cast<uint8_t>(exp.program)}});

  int64_t last_tick = 0;
  for (const NoteEvent& e : events) {
    require(e.pitch >= 0 && e.pitch <= 127, errc::invalid_argument,
            "pitch out of range");
    require(e.onset >= 0 && e.duration >= 1, errc::invalid_argument,
            "bad note timing");
    const uint8_t vel = static_cast<uint8_t>(
        e.velocity >= 1 && e.velocity <= 127 ? e.velocity : exp.velocity);
    emitted.push_back({e.onset, 2, e.pitch,
                       {0x90, static_cast<uint8_t>(e.pitch), vel}});
    emitted.push_back({e.onset + e.duration, 1, e.pitch,
                       {0x80, static_cast<uint8_t>(e.pitch), 0x00}});
    last_tick = std::max(last_tick, e.onset + e.duration);
  }
  last_tick = std::max(last_tick, song_end_ticks);

  std::stable_sort(emitted.begin(), emitted.end(),
                   [](const Emitted& a, const Emitted& b) {
                     if (a.tick != b.tick) return a.tick < b.tick;
                     if (a.order != b.order) return a.order < b.order;
                     return a.pitch < b.pitch;
                   });

  std::vector<uint8_t> track;
  int64_t cursor = 0;
  for (const Emitted& ev : emitted) {
    append_varint(track, ev.tick - cursor);
    cursor = ev.tick;
    track.insert(track.end(), ev.payload.begin(), ev.payload.end());
  }
  append_varint(track, last_tick - cursor);
  track.push_back(0xff);
  track.push_back(0x2f);
  track.push_back(0x00);

  std::vector<uint8_t> out;
  out.reserve(14 + 8 + track.size());
  out.insert(out.end(), {'M', 'T', 'h', 'd'});
  append_u32(out, 6);
  append_u16(out, 0);  // format 0
  append_u16(out, 1);  // one track
  append_u16(out, static_cast<uint16_t>(ticks_per_beat));
  out.insert(out.end(), {'M', 'T', 'r', 'k'});
  append_u32(out, static_cast<uint32_t>(track.size()));
  out.insert(out.end(), track.begin(), track.end());
  return out;
}

const char* filter_reason_name(FilterDecision::Reason r) {
  switch (r) {
    case FilterDecision::Reason::OK: return "OK";
    case FilterDecision::Reason::FirstBeatNonZero: return "FirstBeatNonZero";
    case FilterDecision::Reason::TimeSignatureChanged:
      return "TimeSignatureChanged";
    case FilterDecision::Reason::TimeSignatureNot44:
      return "TimeSignatureNot44";
    case FilterDecision::Reason::NoNotes: return "NoNotes";
  }
  return "Unknown";
}

FilterDecision filter_midi(const ParsedMidi& parsed) {
  if (parsed.events.empty()) {
    return FilterDecision::reject(FilterDecision::Reason::NoNotes);
  }
  if (parsed.events.front().onset != 0) {
    return FilterDecision::reject(FilterDecision::Reason::FirstBeatNonZero);
  }
  // collapse consecutive repeats of the same signature, then count values
  std::vector<std::pair<int, int>> sigs;
  for (const TimeSignature& ts : parsed.meta.time_signatures) {
    std::pair<int, int> v{ts.numerator, ts.denominator};
    if (sigs.empty() || sigs.back() != v) sigs.push_back(v);
  }
  if (sigs.size() > 1) {
    return FilterDecision::reject(FilterDecision::Reason::TimeSignatureChanged);
  }
  if (sigs.size() == 1 && sigs.front() != std::pair<int, int>{4, 4}) {
    return FilterDecision::reject(FilterDecision::Reason::TimeSignatureNot44);
  }
  return FilterDecision::ok();  // no signature events: SMF default is 4/4
}

std::vector<uint8_t> read_binary_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), errc::io_error, "cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  require(!in.bad(), errc::io_error, "read failed for " + path);
  return bytes;
}

void write_binary_file(const std::string& path,
                       const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), errc::io_error, "cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  require(out.good(), errc::io_error, "write failed for " + path);
}

}  // namespace midistyle

// End-to-end tests of the command-line driver: exit codes, option
// precedence, seed echoing, and full pipelines checked against the
// library the binary is built from.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "midistyle/classify.hpp"
#include "midistyle/dataset.hpp"
#include "midistyle/eval.hpp"
#include "midistyle/losses.hpp"
#include "midistyle/midi.hpp"
#include "midistyle/npy.hpp"
#include "midistyle/pianoroll.hpp"
#include "midistyle/train.hpp"

using namespace midistyle;
namespace fs = std::filesystem;

namespace {

struct CmdResult {
  int status = -1;
  std::string out;  // stdout and stderr, merged
};

CmdResult run_cli(const std::string& args) {
  const std::string cmd = std::string("'") + CLI_BINARY + "' " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CmdResult result;
  char buf[4096];
  size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) {
    result.out.append(buf, n);
  }
  const int rc = pclose(pipe);
  result.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return result;
}

fs::path temp_dir(const std::string& leaf) {
  const fs::path dir = fs::temp_directory_path() / "cli_tests" / leaf;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

std::uint64_t value_after(const std::string& out, const std::string& key) {
  const size_t pos = out.find(key);
  REQUIRE(pos != std::string::npos);
  return std::stoull(out.substr(pos + key.size()));
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

// One-phrase MIDI file holding the given roll. The roll must have a note
// in step 0 so the corpus filter's first-beat rule accepts the file.
std::vector<uint8_t> midi_for_rolls(const std::vector<PianoRoll>& rolls) {
  const GridConfig grid;
  const ExportConfig exp;
  const int tpb = 480;
  const int64_t ticks_per_step = 480 * 4 / grid.steps_per_bar;
  const int64_t song_end =
      static_cast<int64_t>(rolls.size()) * PianoRoll::kSteps * ticks_per_step;
  return write_midi(rolls_to_events(rolls, grid, tpb, exp), exp, tpb,
                    song_end);
}

// Flip the single 4/4 time-signature meta event to 3/4.
std::vector<uint8_t> patch_to_three_four(std::vector<uint8_t> bytes) {
  for (size_t i = 0; i + 4 < bytes.size(); ++i) {
    if (bytes[i] == 0xFF && bytes[i + 1] == 0x58 && bytes[i + 2] == 0x04 &&
        bytes[i + 3] == 0x04) {
      bytes[i + 3] = 0x03;
      return bytes;
    }
  }
  FAIL("no 4/4 time-signature event found");
  return bytes;
}

PianoRoll parse_single_phrase(const fs::path& midi_path) {
  const ParsedMidi parsed = parse_midi(read_binary_file(midi_path.string()));
  int dropped = 0;
  const auto rolls =
      events_to_rolls(parsed.events, GridConfig{}, parsed.meta.ticks_per_beat,
                      parsed.meta.song_end_ticks, &dropped);
  REQUIRE(rolls.size() == 1);
  REQUIRE(dropped == 0);
  return rolls[0];
}

}  // namespace

TEST_CASE("exit codes: 0 help, 1 usage, 2 data errors") {
  const fs::path dir = temp_dir("exit_codes");

  const CmdResult help = run_cli("--help");
  CHECK(help.status == 0);
  CHECK(contains(help.out, "prepare-data"));
  CHECK(contains(help.out, "train-transfer"));
  CHECK(contains(help.out, "evaluate"));

  const CmdResult sub_help = run_cli("train-transfer --help");
  CHECK(sub_help.status == 0);
  CHECK(contains(sub_help.out, "--lambda-cycle"));
  CHECK(contains(sub_help.out, "--config"));

  CHECK(run_cli("").status == 1);                      // subcommand required
  CHECK(run_cli("frobnicate").status == 1);            // unknown subcommand
  CHECK(run_cli("make-synthetic --out-a x.npy").status == 1);  // missing flag
  CHECK(run_cli("transfer --model m --in i --out o --direction x2y").status ==
        1);  // invalid choice

  const CmdResult missing_in = run_cli(
      "prepare-data --in /nonexistent-path-xyz --out " + q(dir / "d.npy"));
  CHECK(missing_in.status == 2);
  CHECK(contains(missing_in.out, "error:"));

  CHECK(run_cli("evaluate --model nope.msar --classifier nope.msar "
                "--data nope.npy --task j2c")
            .status == 2);
}

TEST_CASE("synthetic corpus: balanced files, echoed seed, determinism") {
  const fs::path dir = temp_dir("synthetic");
  const auto gen = [&](const std::string& stem, const std::string& extra) {
    return run_cli("make-synthetic --out-a " + q(dir / (stem + "_a.npy")) +
                   " --out-b " + q(dir / (stem + "_b.npy")) + " " + extra);
  };

  const CmdResult r1 = gen("r1", "--count 5 --seed 99");
  CHECK(r1.status == 0);
  CHECK(contains(r1.out, "count_a=5 count_b=5"));
  CHECK(contains(r1.out, "seed=99"));
  const auto rolls_a = load_rolls((dir / "r1_a.npy").string());
  const auto rolls_b = load_rolls((dir / "r1_b.npy").string());
  REQUIRE(rolls_a.size() == 5);
  REQUIRE(rolls_b.size() == 5);
  for (const auto& roll : rolls_a) {
    CHECK(roll.check_binary());
    CHECK(roll.active_cells() > 0);
  }

  // same seed, same bytes; different seed, different bytes
  CHECK(gen("r2", "--count 5 --seed 99").status == 0);
  CHECK(read_binary_file((dir / "r1_a.npy").string()) ==
        read_binary_file((dir / "r2_a.npy").string()));
  CHECK(read_binary_file((dir / "r1_b.npy").string()) ==
        read_binary_file((dir / "r2_b.npy").string()));
  CHECK(gen("r3", "--count 5 --seed 100").status == 0);
  CHECK(read_binary_file((dir / "r1_a.npy").string()) !=
        read_binary_file((dir / "r3_a.npy").string()));

  // an omitted seed is drawn from entropy and echoed; replaying the echoed
  // value reproduces the files
  const CmdResult free_run = gen("r4", "--count 5");
  CHECK(free_run.status == 0);
  const std::uint64_t echoed = value_after(free_run.out, "seed=");
  CHECK(gen("r5", "--count 5 --seed " + std::to_string(echoed)).status == 0);
  CHECK(read_binary_file((dir / "r4_a.npy").string()) ==
        read_binary_file((dir / "r5_a.npy").string()));
}

TEST_CASE("config file fills defaults and explicit flags override it") {
  const fs::path dir = temp_dir("config");
  const fs::path cfg = dir / "cfg.json";
  write_text(cfg, "{\"count\": 3, \"notes\": 10, \"seed\": 123}\n");
  const std::string base = "make-synthetic --out-a " + q(dir / "a.npy") +
                           " --out-b " + q(dir / "b.npy");

  const CmdResult from_cfg = run_cli(base + " --config " + q(cfg));
  CHECK(from_cfg.status == 0);
  CHECK(contains(from_cfg.out, "count_a=3 count_b=3"));
  CHECK(contains(from_cfg.out, "seed=123"));
  // the config-driven run matches the same settings spelled as flags
  CHECK(run_cli("make-synthetic --out-a " + q(dir / "flags_a.npy") +
                " --out-b " + q(dir / "flags_b.npy") +
                " --count 3 --notes 10 --seed 123")
            .status == 0);
  CHECK(read_binary_file((dir / "a.npy").string()) ==
        read_binary_file((dir / "flags_a.npy").string()));
  CHECK(read_binary_file((dir / "b.npy").string()) ==
        read_binary_file((dir / "flags_b.npy").string()));

  // a flag beats the config value; untouched keys keep the config value
  const CmdResult mixed = run_cli(base + " --config " + q(cfg) + " --count 4");
  CHECK(mixed.status == 0);
  CHECK(contains(mixed.out, "count_a=4 count_b=4"));
  CHECK(contains(mixed.out, "seed=123"));

  const CmdResult seeded = run_cli(base + " --config " + q(cfg) + " --seed 7");
  CHECK(seeded.status == 0);
  CHECK(contains(seeded.out, "count_a=3"));
  CHECK(contains(seeded.out, "seed=7"));

  // --config=path spelling
  const CmdResult eq_form = run_cli(base + " --config=" + (cfg).string());
  CHECK(eq_form.status == 0);
  CHECK(contains(eq_form.out, "count_a=3"));

  // malformed configs are contract errors, not usage errors
  const fs::path bad_key = dir / "bad_key.json";
  write_text(bad_key, "{\"cnt\": 3}\n");
  const CmdResult unknown = run_cli(base + " --config " + q(bad_key));
  CHECK(unknown.status == 2);
  CHECK(contains(unknown.out, "unknown config key"));

  const fs::path bad_json = dir / "bad.json";
  write_text(bad_json, "{nope\n");
  const CmdResult invalid = run_cli(base + " --config " + q(bad_json));
  CHECK(invalid.status == 2);
  CHECK(contains(invalid.out, "not valid JSON"));

  const fs::path not_object = dir / "array.json";
  write_text(not_object, "[1, 2]\n");
  CHECK(run_cli(base + " --config " + q(not_object)).status == 2);

  const fs::path bad_type = dir / "bad_type.json";
  write_text(bad_type, "{\"count\": \"three\"}\n");
  const CmdResult mistyped = run_cli(base + " --config " + q(bad_type));
  CHECK(mistyped.status == 2);
  CHECK(contains(mistyped.out, "config key 'count'"));

  CHECK(run_cli(base + " --config " + q(dir / "missing.json")).status == 2);
}

TEST_CASE("prepare-data reports per-file outcomes and saves the phrases") {
  const fs::path dir = temp_dir("prepare");
  const fs::path midi_dir = dir / "midi";
  fs::create_directories(midi_dir);

  PianoRoll roll1;
  roll1.at(0, 5) = 1.0;
  roll1.at(3, 40) = 1.0;
  roll1.at(10, 70) = 1.0;
  roll1.binary = true;
  write_binary_file((midi_dir / "m1.mid").string(), midi_for_rolls({roll1}));

  PianoRoll roll2a, roll2b;
  roll2a.at(0, 30) = 1.0;
  roll2a.at(7, 31) = 1.0;
  roll2a.binary = true;
  roll2b.at(2, 60) = 1.0;
  roll2b.at(9, 61) = 1.0;
  roll2b.binary = true;
  write_binary_file((midi_dir / "m2.mid").string(),
                    midi_for_rolls({roll2a, roll2b}));

  write_binary_file((midi_dir / "bad.mid").string(), {0x00, 0x01, 0x02, 0x03});
  write_text(midi_dir / "ignored.txt", "not midi\n");
  write_binary_file((midi_dir / "waltz.mid").string(),
                    patch_to_three_four(midi_for_rolls({roll1})));

  const fs::path out = dir / "d.npy";
  const CmdResult r =
      run_cli("prepare-data --in " + q(midi_dir) + " --out " + q(out));
  CHECK(r.status == 0);
  CHECK(contains(r.out, "m1.mid status=accepted phrases=1"));
  CHECK(contains(r.out, "m2.mid status=accepted phrases=2"));
  CHECK(contains(r.out, "bad.mid status=error"));
  CHECK(contains(r.out, "waltz.mid status=rejected reason=TimeSignatureNot44"));
  CHECK(contains(r.out, "accepted=2 rejected=1 errors=1 phrases=3"));
  CHECK(contains(r.out, "rejected_TimeSignatureNot44=1"));
  CHECK(load_rolls(out.string()).size() == 3);

  // a single-file input round-trips the roll exactly
  const fs::path single_out = dir / "single.npy";
  const CmdResult single = run_cli("prepare-data --in " +
                                   q(midi_dir / "m1.mid") + " --out " +
                                   q(single_out));
  CHECK(single.status == 0);
  CHECK(contains(single.out, "accepted=1 rejected=0 errors=0 phrases=1"));
  const auto loaded = load_rolls(single_out.string());
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].values == roll1.values);

  // a directory with no MIDI files is a data error
  const fs::path empty_dir = dir / "empty";
  fs::create_directories(empty_dir);
  write_text(empty_dir / "readme.txt", "nothing here\n");
  CHECK(run_cli("prepare-data --in " + q(empty_dir) + " --out " +
                q(dir / "none.npy"))
            .status == 2);
}

TEST_CASE("training runs write logs and checkpoints and resume seamlessly") {
  const fs::path dir = temp_dir("train");
  const std::string data = " --data-a " + q(dir / "a.npy") + " --data-b " +
                           q(dir / "b.npy");
  REQUIRE(run_cli("make-synthetic --out-a " + q(dir / "a.npy") + " --out-b " +
                  q(dir / "b.npy") + " --count 6 --seed 5")
              .status == 0);

  const std::string small =
      " --batch-size 2 --base-channels 1 --res-blocks 1 --pool-size 2";
  const CmdResult r1 = run_cli(
      "train-transfer" + data + " --out " + q(dir / "run1") +
      " --steps 3 --checkpoint-every 2 --seed 11" + small);
  CHECK(r1.status == 0);
  CHECK(contains(r1.out, "gen=resnet9"));
  CHECK(contains(r1.out, "aux=1 triplet=1"));
  CHECK(contains(r1.out, "seed=11"));
  CHECK(contains(r1.out, "n_a=6 n_b=6"));
  CHECK(contains(r1.out, "done steps=3"));

  const auto log1 = read_lines(dir / "run1" / "train_log.csv");
  REQUIRE(log1.size() == 4);
  CHECK(log1[0] == LossRecord::csv_header());
  CHECK(log1[1].rfind("1,", 0) == 0);
  CHECK(log1[3].rfind("3,", 0) == 0);
  CHECK(fs::exists(dir / "run1" / "checkpoint-000002.msar"));
  CHECK(!fs::exists(dir / "run1" / "checkpoint-000003.msar"));
  CHECK(fs::exists(dir / "run1" / "checkpoint.msar"));

  // resuming from the mid-run checkpoint reproduces the straight run
  const CmdResult r2 = run_cli(
      "train-transfer" + data + " --out " + q(dir / "run2") +
      " --steps 3 --resume " + q(dir / "run1" / "checkpoint-000002.msar"));
  CHECK(r2.status == 0);
  CHECK(contains(r2.out, "resume="));
  CHECK(contains(r2.out, "step=2"));
  CHECK(read_binary_file((dir / "run1" / "checkpoint.msar").string()) ==
        read_binary_file((dir / "run2" / "checkpoint.msar").string()));
  const auto log2 = read_lines(dir / "run2" / "train_log.csv");
  REQUIRE(log2.size() == 2);
  CHECK(log2[0] == LossRecord::csv_header());
  CHECK(log2[1] == log1[3]);

  // the other generator architecture and the ablation flags run too
  const CmdResult unet = run_cli(
      "train-transfer" + data + " --out " + q(dir / "run3") +
      " --steps 1 --gen unet128 --seed 11" + small);
  CHECK(unet.status == 0);
  CHECK(contains(unet.out, "gen=unet128"));
  CHECK(fs::exists(dir / "run3" / "checkpoint.msar"));

  const CmdResult ablated = run_cli(
      "train-transfer" + data + " --out " + q(dir / "run4") +
      " --steps 1 --no-aux --no-triplet --seed 11" + small);
  CHECK(ablated.status == 0);
  CHECK(contains(ablated.out, "aux=0 triplet=0"));

  // contract violations exit with the data-error code
  CHECK(run_cli("train-transfer" + data + " --out " + q(dir / "run5") +
                " --steps 0" + small)
            .status == 2);
  CHECK(run_cli("train-transfer" + data + " --out " + q(dir / "run6") +
                " --steps 1 --batch-size 50 --base-channels 1 --res-blocks 1")
            .status == 2);
}

TEST_CASE("classifier training reports accuracy and saves a usable judge") {
  const fs::path dir = temp_dir("classifier");
  const std::string data = " --data-a " + q(dir / "a.npy") + " --data-b " +
                           q(dir / "b.npy");
  REQUIRE(run_cli("make-synthetic --out-a " + q(dir / "a.npy") + " --out-b " +
                  q(dir / "b.npy") + " --count 35 --seed 6")
              .status == 0);

  const fs::path clf_path = dir / "clf.msar";
  const CmdResult nb = run_cli("train-classifier --algo nb" + data +
                               " --out " + q(clf_path) +
                               " --test-fraction 0.2 --seed 3");
  CHECK(nb.status == 0);
  CHECK(contains(nb.out, "train-classifier: algo=nb n_train=56 n_test=14"));
  CHECK(contains(nb.out, "seed=3"));
  // the synthetic bands are separable, so the held-out accuracy is perfect
  CHECK(contains(nb.out,
                 "algo=nb accuracy=100.0 classic_recall=100.0 "
                 "jazz_recall=100.0"));

  const auto judge = load_classifier(clf_path.string());
  CHECK(judge->spec().kind == ClassifierSpec::Kind::NaiveBayes);
  const auto rolls_a = load_rolls((dir / "a.npy").string());
  const auto rolls_b = load_rolls((dir / "b.npy").string());
  CHECK(judge->predict(featurize(rolls_a[0])) == GenreLabel::Jazz);
  CHECK(judge->predict(featurize(rolls_b[0])) == GenreLabel::Classic);

  const CmdResult unsaved =
      run_cli("train-classifier --algo nb" + data + " --seed 3");
  CHECK(unsaved.status == 0);
  CHECK(contains(unsaved.out, "model=(not saved)"));

  const fs::path sweep_path = dir / "sweep.csv";
  const CmdResult knn = run_cli("train-classifier --algo knn" + data +
                                " --test-fraction 0.2 --seed 3 --sweep "
                                "--sweep-out " + q(sweep_path));
  CHECK(knn.status == 0);
  CHECK(contains(knn.out, "best_k="));
  const auto sweep_lines = read_lines(sweep_path);
  REQUIRE(sweep_lines.size() == 51);  // header + k = 1..50
  CHECK(sweep_lines[0] == "k,accuracy");
  CHECK(sweep_lines[1].rfind("1,", 0) == 0);

  CHECK(run_cli("train-classifier --algo svm" + data).status == 1);
  CHECK(run_cli("train-classifier --algo nb" + data + " --sweep").status == 2);
}

TEST_CASE("transfer restyles a file and evaluate matches the library") {
  const fs::path dir = temp_dir("pipeline");
  const std::string data = " --data-a " + q(dir / "a.npy") + " --data-b " +
                           q(dir / "b.npy");
  REQUIRE(run_cli("make-synthetic --out-a " + q(dir / "a.npy") + " --out-b " +
                  q(dir / "b.npy") + " --count 8 --seed 7")
              .status == 0);
  REQUIRE(run_cli("train-transfer" + data + " --out " + q(dir / "ck") +
                  " --steps 2 --batch-size 2 --base-channels 1 "
                  "--res-blocks 1 --pool-size 2 --seed 13")
              .status == 0);
  const fs::path ck = dir / "ck" / "checkpoint.msar";
  const fs::path clf_path = dir / "clf.msar";
  REQUIRE(run_cli("train-classifier --algo nb" + data + " --out " +
                  q(clf_path) + " --seed 3")
              .status == 0);

  PianoRoll input;
  input.at(0, 10) = 1.0;
  input.at(5, 20) = 1.0;
  input.at(20, 41) = 1.0;
  input.at(40, 3) = 1.0;
  input.at(63, 15) = 1.0;
  input.binary = true;
  const fs::path in_midi = dir / "in.mid";
  write_binary_file(in_midi.string(), midi_for_rolls({input}));

  const TransferModel model = load_checkpoint_model(ck.string());

  const CmdResult j2c = run_cli("transfer --model " + q(ck) + " --in " +
                                q(in_midi) + " --out " + q(dir / "j2c.mid") +
                                " --direction j2c --threshold 0.5");
  CHECK(j2c.status == 0);
  CHECK(contains(j2c.out, "direction=j2c threshold=0.5 phrases=1 "
                          "dropped_pitches=0"));
  const PianoRoll got_j2c = parse_single_phrase(dir / "j2c.mid");
  const PianoRoll want_j2c = binarize(model.g_a2b.transfer_roll(input), 0.5);
  CHECK(got_j2c.values == want_j2c.values);

  int added = 0, removed = 0;
  for (int c = 0; c < PianoRoll::kCells; ++c) {
    added += input.values[c] == 0.0 && want_j2c.values[c] != 0.0;
    removed += input.values[c] != 0.0 && want_j2c.values[c] == 0.0;
  }
  char summary[128];
  std::snprintf(summary, sizeof summary, "phrases=1 added=%d removed=%d",
                added, removed);
  CHECK(contains(j2c.out, summary));

  // the opposite direction runs through the other generator
  const CmdResult c2j = run_cli("transfer --model " + q(ck) + " --in " +
                                q(in_midi) + " --out " + q(dir / "c2j.mid") +
                                " --direction c2j --threshold 0.5");
  CHECK(c2j.status == 0);
  const PianoRoll got_c2j = parse_single_phrase(dir / "c2j.mid");
  const PianoRoll want_c2j = binarize(model.g_b2a.transfer_roll(input), 0.5);
  CHECK(got_c2j.values == want_c2j.values);
  CHECK(got_c2j.values != got_j2c.values);

  // scoring through the binary equals scoring through the library
  const auto judge = load_classifier(clf_path.string());
  const auto rolls_a = load_rolls((dir / "a.npy").string());
  const double want_acc = transfer_accuracy(
      model, *judge, rolls_a, TransferTask::Jazz2Classic, 0.5);
  const CmdResult ev = run_cli("evaluate --model " + q(ck) + " --classifier " +
                               q(clf_path) + " --data " + q(dir / "a.npy") +
                               " --task j2c --threshold 0.5");
  CHECK(ev.status == 0);
  char want_line[128];
  std::snprintf(want_line, sizeof want_line,
                "task=j2c judge=nb count=8 threshold=0.5 accuracy=%.1f",
                want_acc);
  CHECK(contains(ev.out, want_line));

  // data errors surface with exit code 2
  CHECK(run_cli("transfer --model " + q(ck) + " --in " + q(in_midi) +
                " --out " + q(dir / "t.mid") + " --threshold 0")
            .status == 2);
  const fs::path waltz = dir / "waltz.mid";
  write_binary_file(waltz.string(),
                    patch_to_three_four(midi_for_rolls({input})));
  const CmdResult rejected =
      run_cli("transfer --model " + q(ck) + " --in " + q(waltz) + " --out " +
              q(dir / "t.mid"));
  CHECK(rejected.status == 2);
  CHECK(contains(rejected.out, "TimeSignatureNot44"));
}

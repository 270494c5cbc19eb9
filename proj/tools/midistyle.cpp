// Command-line driver for the midistyle toolkit.
//
// Subcommands:
//   prepare-data      ingest MIDI files into a phrase dataset (.npy)
//   make-synthetic    generate the two-band synthetic corpus
//   train-classifier  fit a genre classifier and report test accuracy
//   train-transfer    train the two-domain style-transfer model
//   transfer          restyle one MIDI file through a trained model
//   evaluate          score a trained model with a genre classifier
//
// Option precedence: built-in defaults < --config JSON file < explicit
// flags. The JSON file is a flat object whose keys are the invoked
// subcommand's long option names (without the leading dashes).
//
// Exit codes: 0 success, 1 usage error, 2 data or contract error,
// 3 internal error.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "midistyle/classify.hpp"
#include "midistyle/dataset.hpp"
#include "midistyle/errors.hpp"
#include "midistyle/eval.hpp"
#include "midistyle/midi.hpp"
#include "midistyle/nets.hpp"
#include "midistyle/npy.hpp"
#include "midistyle/pianoroll.hpp"
#include "midistyle/train.hpp"

namespace {

namespace ms = midistyle;
using nlohmann::json;

// Maps JSON config keys onto the same variables the command-line flags
// bind to, so flags parsed afterwards override the file.
class JsonBinding {
 public:
  template <typename T>
  void bind(const std::string& key, T* target) {
    setters_[key] = [target](const json& v) { *target = v.get<T>(); };
  }

  void bind_fn(const std::string& key, std::function<void(const json&)> fn) {
    setters_[key] = std::move(fn);
  }

  void apply(const json& obj) const {
    ms::require(obj.is_object(), ms::errc::bad_config,
                "config file must hold a JSON object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (it.key() == "config") continue;
      auto found = setters_.find(it.key());
      ms::require(found != setters_.end(), ms::errc::bad_config,
                  "unknown config key '" + it.key() + "'");
      try {
        found->second(it.value());
      } catch (const json::exception& e) {
        ms::raise(ms::errc::bad_config,
                  "config key '" + it.key() + "': " + e.what());
      }
    }
  }

 private:
  std::map<std::string, std::function<void(const json&)>> setters_;
};

// A seed that remembers whether the user supplied it; absent seeds are
// drawn from the system entropy source and echoed for reproducibility.
struct SeedOpt {
  std::uint64_t value = 0;
  bool given = false;

  std::uint64_t resolve() {
    if (!given) {
      std::random_device rd;
      value = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
      given = true;
    }
    return value;
  }
};

void add_seed_option(CLI::App* sub, JsonBinding* binding, SeedOpt* seed) {
  auto* opt = sub->add_option("--seed", seed->value,
                              "RNG seed (default: drawn from the system "
                              "entropy source and echoed)");
  opt->each([seed](const std::string&) { seed->given = true; });
  binding->bind_fn("seed", [seed](const json& v) {
    seed->value = v.get<std::uint64_t>();
    seed->given = true;
  });
}

std::string config_path_from_argv(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return {};
}

json load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  ms::require(in.good(), ms::errc::io_error,
              "cannot open config file " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    ms::raise(ms::errc::bad_config,
              "config file " + path + " is not valid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------- helpers

std::vector<std::filesystem::path> collect_midi_files(
    const std::string& input) {
  namespace fs = std::filesystem;
  const fs::path root(input);
  ms::require(fs::exists(root), ms::errc::io_error,
              "input path does not exist: " + input);
  std::vector<fs::path> files;
  if (fs::is_directory(root)) {
    for (const auto& entry : fs::directory_iterator(root)) {
      if (!entry.is_regular_file()) continue;
      std::string ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(),
                     [](unsigned char c) { return std::tolower(c); });
      if (ext == ".mid" || ext == ".midi") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(root);
  }
  ms::require(!files.empty(), ms::errc::io_error,
              "no MIDI files found in " + input);
  return files;
}

std::vector<ms::LabeledSample> label_rolls(const std::vector<ms::PianoRoll>& rolls,
                                           ms::GenreLabel label,
                                           const std::string& source) {
  std::vector<ms::LabeledSample> samples;
  samples.reserve(rolls.size());
  for (size_t i = 0; i < rolls.size(); ++i) {
    samples.push_back({rolls[i], label, source + "#" + std::to_string(i)});
  }
  return samples;
}

ms::ClassifierSpec::EventModel event_model_from_name(const std::string& name) {
  if (name == "bernoulli") return ms::ClassifierSpec::EventModel::Bernoulli;
  if (name == "gaussian") return ms::ClassifierSpec::EventModel::Gaussian;
  ms::raise(ms::errc::invalid_hyperparam,
            "unknown event model '" + name +
                "' (expected bernoulli or gaussian)");
}

// ---------------------------------------------------------- prepare-data

struct PrepareOpts {
  std::string in;
  std::string out;
};

void run_prepare_data(const PrepareOpts& o) {
  const auto files = collect_midi_files(o.in);
  const ms::GridConfig grid;
  std::vector<ms::PianoRoll> rolls;
  int accepted = 0;
  int errors = 0;
  std::map<std::string, int> rejected;  // reason name -> count

  for (const auto& file : files) {
    ms::ParsedMidi parsed;
    try {
      parsed = ms::parse_midi(ms::read_binary_file(file.string()));
    } catch (const ms::Error& e) {
      std::printf("file=%s status=error error=%s\n", file.string().c_str(),
                  e.what());
      ++errors;
      continue;
    }
    const ms::FilterDecision decision = ms::filter_midi(parsed);
    if (!decision.accepted) {
      const char* reason = ms::filter_reason_name(decision.reason);
      std::printf("file=%s status=rejected reason=%s\n",
                  file.string().c_str(), reason);
      ++rejected[reason];
      continue;
    }
    int dropped = 0;
    std::vector<ms::PianoRoll> phrases;
    try {
      phrases = ms::events_to_rolls(parsed.events, grid,
                                    parsed.meta.ticks_per_beat,
                                    parsed.meta.song_end_ticks, &dropped);
    } catch (const ms::Error& e) {
      if (e.code() != ms::errc::empty_after_quantization) throw;
      std::printf("file=%s status=rejected reason=EmptyAfterQuantization\n",
                  file.string().c_str());
      ++rejected["EmptyAfterQuantization"];
      continue;
    }
    std::printf("file=%s status=accepted phrases=%zu dropped_pitches=%d\n",
                file.string().c_str(), phrases.size(), dropped);
    ++accepted;
    rolls.insert(rolls.end(), phrases.begin(), phrases.end());
  }

  ms::require(!rolls.empty(), ms::errc::empty_genre,
              "no phrases survived filtering and quantization");
  ms::save_rolls(o.out, rolls);

  int total_rejected = 0;
  for (const auto& [reason, count] : rejected) total_rejected += count;
  std::printf("accepted=%d rejected=%d errors=%d phrases=%zu out=%s\n",
              accepted, total_rejected, errors, rolls.size(), o.out.c_str());
  for (const auto& [reason, count] : rejected) {
    std::printf("rejected_%s=%d\n", reason.c_str(), count);
  }
}

// -------------------------------------------------------- make-synthetic

struct SyntheticOpts {
  std::string out_a;
  std::string out_b;
  std::int64_t count = 200;
  int notes = 24;
  SeedOpt seed;
};

void run_make_synthetic(SyntheticOpts& o) {
  ms::require(o.count > 0, ms::errc::invalid_count,
              "--count must be positive");
  const std::uint64_t seed = o.seed.resolve();
  ms::SyntheticSpec spec;
  spec.notes_per_phrase = o.notes;
  const auto samples =
      ms::make_synthetic(spec, static_cast<size_t>(o.count), seed);

  std::vector<ms::PianoRoll> rolls_a, rolls_b;
  for (const auto& s : samples) {
    (s.label == ms::kDomainA ? rolls_a : rolls_b).push_back(s.roll);
  }
  ms::save_rolls(o.out_a, rolls_a);
  ms::save_rolls(o.out_b, rolls_b);
  std::printf("count_a=%zu count_b=%zu seed=%llu out_a=%s out_b=%s\n",
              rolls_a.size(), rolls_b.size(),
              static_cast<unsigned long long>(seed), o.out_a.c_str(),
              o.out_b.c_str());
}

// ------------------------------------------------------ train-classifier

struct TrainClassifierOpts {
  std::string algo = "mlp";
  std::string data_a;
  std::string data_b;
  std::string out;
  double test_fraction = 0.2;
  SeedOpt seed;
  bool sweep = false;
  std::string sweep_out;
  // hyperparameters
  std::string event_model = "bernoulli";
  double alpha = 1.0;
  int k = 1;
  int trees = 100;
  int max_depth = 40;
  int hidden_layers = 1;
  int neurons = 1000;
  double lr = 1e-3;
  int max_iter = 200;
};

void run_train_classifier(TrainClassifierOpts& o) {
  const std::uint64_t seed = o.seed.resolve();
  const auto rolls_a = ms::load_rolls(o.data_a);
  const auto rolls_b = ms::load_rolls(o.data_b);

  std::vector<ms::LabeledSample> samples =
      label_rolls(rolls_a, ms::kDomainA, o.data_a);
  const auto samples_b = label_rolls(rolls_b, ms::kDomainB, o.data_b);
  samples.insert(samples.end(), samples_b.begin(), samples_b.end());

  const ms::DomainSplit sp = ms::split(samples, o.test_fraction, seed);
  std::vector<ms::LabeledSample> train_samples = sp.train_a;
  train_samples.insert(train_samples.end(), sp.train_b.begin(),
                       sp.train_b.end());
  std::vector<ms::LabeledSample> test_samples = sp.test_a;
  test_samples.insert(test_samples.end(), sp.test_b.begin(), sp.test_b.end());
  const ms::LabeledFeatures train = ms::featurize_samples(train_samples);
  const ms::LabeledFeatures test = ms::featurize_samples(test_samples);

  ms::ClassifierSpec spec;
  spec.kind = ms::ClassifierSpec::kind_from_name(o.algo);
  spec.seed = seed;
  spec.nb_event_model = event_model_from_name(o.event_model);
  spec.nb_alpha = o.alpha;
  spec.knn_k = o.k;
  spec.rf_n_trees = o.trees;
  spec.rf_max_depth = o.max_depth;
  spec.mlp_hidden_layers = o.hidden_layers;
  spec.mlp_neurons = o.neurons;
  spec.mlp_learning_rate = o.lr;
  spec.mlp_max_iterations = o.max_iter;

  std::printf(
      "train-classifier: algo=%s n_train=%zu n_test=%zu seed=%llu\n",
      o.algo.c_str(), train.size(), test.size(),
      static_cast<unsigned long long>(seed));

  const auto classifier = ms::fit(spec, train);
  const ms::AccuracyReport report = ms::evaluate(*classifier, test);
  if (!o.out.empty()) ms::save_classifier(o.out, *classifier);

  std::printf(
      "algo=%s accuracy=%.1f classic_recall=%.1f jazz_recall=%.1f "
      "model=%s\n",
      o.algo.c_str(), report.overall,
      report.per_genre[static_cast<int>(ms::GenreLabel::Classic)],
      report.per_genre[static_cast<int>(ms::GenreLabel::Jazz)],
      o.out.empty() ? "(not saved)" : o.out.c_str());

  if (!o.sweep) return;
  std::string sweep_path = o.sweep_out;
  if (sweep_path.empty()) {
    sweep_path = (o.out.empty() ? o.algo : o.out) + ".sweep.csv";
  }
  if (spec.kind == ms::ClassifierSpec::Kind::KNN) {
    const ms::KnnCurve curve = ms::tune_knn(train, test, 1, 50);
    std::ofstream out(sweep_path, std::ios::binary);
    ms::require(out.good(), ms::errc::io_error,
                "cannot write sweep file " + sweep_path);
    out << curve.to_csv();
    std::printf("sweep=%s best_k=%d best_accuracy=%.1f\n",
                sweep_path.c_str(), curve.best_k, curve.best_accuracy);
  } else if (spec.kind == ms::ClassifierSpec::Kind::RandomForest) {
    const ms::RfCurve curve = ms::tune_rf(train, test, spec, 1, o.max_depth);
    std::ofstream out(sweep_path, std::ios::binary);
    ms::require(out.good(), ms::errc::io_error,
                "cannot write sweep file " + sweep_path);
    out << curve.to_csv();
    std::printf("sweep=%s best_depth=%d best_accuracy=%.1f\n",
                sweep_path.c_str(), curve.best_depth,
                curve.best_test_accuracy);
  } else {
    ms::raise(ms::errc::bad_config,
              "--sweep supports the knn and rf algorithms");
  }
}

// -------------------------------------------------------- train-transfer

struct TrainTransferOpts {
  std::string data_a;
  std::string data_b;
  std::string out;
  std::string resume;
  std::string gen = "resnet9";
  std::int64_t steps = 0;
  std::int64_t batch_size = 16;
  std::int64_t base_channels = 64;
  std::int64_t res_blocks = 9;
  std::int64_t pool_size = 50;
  std::int64_t checkpoint_every = 0;
  double lr = 2e-4;
  double beta1 = 0.5;
  double gamma = 1.0;
  double lambda_cycle = 10.0;
  double lambda_identity = 5.0;
  double margin = 1.0;
  bool use_aux = true;
  bool use_triplet = true;
  SeedOpt seed;
};

void run_train_transfer(TrainTransferOpts& o) {
  auto rolls_a = ms::load_rolls(o.data_a);
  auto rolls_b = ms::load_rolls(o.data_b);

  ms::Trainer trainer = [&]() -> ms::Trainer {
    if (!o.resume.empty()) {
      // Model, loss and optimizer settings travel inside the checkpoint;
      // only the step target can be overridden on resume.
      ms::Trainer t = ms::Trainer::load_checkpoint(o.resume, std::move(rolls_a),
                                                   std::move(rolls_b));
      t.set_total_steps(o.steps);
      std::printf("train-transfer: resume=%s step=%lld steps=%lld out=%s\n",
                  o.resume.c_str(),
                  static_cast<long long>(t.step_count()),
                  static_cast<long long>(o.steps), o.out.c_str());
      return t;
    }
    ms::TrainConfig cfg;
    cfg.model.generator.kind = ms::generator_kind_from_name(o.gen);
    cfg.model.generator.base_channels = o.base_channels;
    cfg.model.generator.res_blocks = o.res_blocks;
    cfg.model.discriminator.base_channels = o.base_channels;
    cfg.model.use_aux = o.use_aux;
    cfg.model.seed = o.seed.resolve();
    cfg.weights.gamma = o.gamma;
    cfg.weights.lambda_cycle = o.lambda_cycle;
    cfg.weights.lambda_identity = o.lambda_identity;
    cfg.weights.triplet_margin = o.margin;
    cfg.weights.use_aux = o.use_aux;
    cfg.weights.use_triplet = o.use_triplet;
    cfg.optimizer.lr = o.lr;
    cfg.optimizer.beta1 = o.beta1;
    cfg.batch_size = o.batch_size;
    cfg.steps = o.steps;
    cfg.seed = o.seed.resolve();
    cfg.checkpoint_every = o.checkpoint_every;
    cfg.fake_pool_size = o.pool_size;

    std::printf(
        "train-transfer: gen=%s base_channels=%lld res_blocks=%lld "
        "steps=%lld batch_size=%lld lr=%g gamma=%g lambda_cycle=%g "
        "lambda_identity=%g margin=%g aux=%d triplet=%d pool_size=%lld "
        "seed=%llu n_a=%zu n_b=%zu out=%s\n",
        o.gen.c_str(), static_cast<long long>(o.base_channels),
        static_cast<long long>(o.res_blocks),
        static_cast<long long>(o.steps),
        static_cast<long long>(o.batch_size), o.lr, o.gamma, o.lambda_cycle,
        o.lambda_identity, o.margin, o.use_aux ? 1 : 0, o.use_triplet ? 1 : 0,
        static_cast<long long>(o.pool_size),
        static_cast<unsigned long long>(cfg.seed), rolls_a.size(),
        rolls_b.size(), o.out.c_str());
    return ms::Trainer(cfg, std::move(rolls_a), std::move(rolls_b));
  }();

  const ms::LossRecord last = trainer.run(o.out);
  std::printf(
      "done steps=%lld d_total=%.6g g_total=%.6g checkpoint=%s/checkpoint.msar "
      "log=%s/train_log.csv\n",
      static_cast<long long>(trainer.step_count()), last.d_total,
      last.g_total, o.out.c_str(), o.out.c_str());
}

// -------------------------------------------------------------- transfer

struct TransferOpts {
  std::string model;
  std::string in;
  std::string out;
  std::string direction = "j2c";
  double threshold = 0.5;
  int tempo = 120;
  int velocity = 90;
  int program = 0;
};

void run_transfer(const TransferOpts& o) {
  const ms::TransferTask task = ms::task_from_name(o.direction);
  int64_t step = 0;
  const ms::TransferModel model = ms::load_checkpoint_model(o.model, &step);

  const ms::ParsedMidi parsed =
      ms::parse_midi(ms::read_binary_file(o.in));
  const ms::FilterDecision decision = ms::filter_midi(parsed);
  if (!decision.accepted) {
    ms::raise(ms::errc::filter_rejected,
              std::string("input file rejected: ") +
                  ms::filter_reason_name(decision.reason));
  }
  const ms::GridConfig grid;
  int dropped = 0;
  const auto rolls =
      ms::events_to_rolls(parsed.events, grid, parsed.meta.ticks_per_beat,
                          parsed.meta.song_end_ticks, &dropped);

  std::printf("transfer: model=%s step=%lld direction=%s threshold=%g "
              "phrases=%zu dropped_pitches=%d\n",
              o.model.c_str(), static_cast<long long>(step),
              o.direction.c_str(), o.threshold, rolls.size(), dropped);

  const ms::Generator& g = task == ms::TransferTask::Jazz2Classic
                               ? model.g_a2b
                               : model.g_b2a;
  std::vector<ms::PianoRoll> out_rolls;
  out_rolls.reserve(rolls.size());
  int total_added = 0;
  int total_removed = 0;
  for (size_t i = 0; i < rolls.size(); ++i) {
    const ms::PianoRoll transferred =
        ms::binarize(g.transfer_roll(rolls[i]), o.threshold);
    int added = 0;
    int removed = 0;
    for (int c = 0; c < ms::PianoRoll::kCells; ++c) {
      const bool was = rolls[i].values[c] != 0.0;
      const bool now = transferred.values[c] != 0.0;
      added += (!was && now);
      removed += (was && !now);
    }
    std::printf("phrase=%zu added=%d removed=%d cells=%d\n", i, added,
                removed, transferred.active_cells());
    total_added += added;
    total_removed += removed;
    out_rolls.push_back(transferred);
  }

  const ms::ExportConfig exp{o.tempo, o.velocity, o.program};
  const int out_tpb = 480;
  const int64_t ticks_per_step =
      static_cast<int64_t>(out_tpb) * 4 / grid.steps_per_bar;
  const int64_t song_end = static_cast<int64_t>(out_rolls.size()) *
                           ms::PianoRoll::kSteps * ticks_per_step;
  ms::write_binary_file(
      o.out, ms::write_midi(ms::rolls_to_events(out_rolls, grid, out_tpb, exp),
                            exp, out_tpb, song_end));
  std::printf("phrases=%zu added=%d removed=%d out=%s\n", out_rolls.size(),
              total_added, total_removed, o.out.c_str());
}

// -------------------------------------------------------------- evaluate

struct EvaluateOpts {
  std::string model;
  std::string classifier;
  std::string data;
  std::string task = "j2c";
  double threshold = 0.5;
};

void run_evaluate(const EvaluateOpts& o) {
  const ms::TransferTask task = ms::task_from_name(o.task);
  const ms::TransferModel model = ms::load_checkpoint_model(o.model);
  const auto judge = ms::load_classifier(o.classifier);
  const auto rolls = ms::load_rolls(o.data);
  const double accuracy =
      ms::transfer_accuracy(model, *judge, rolls, task, o.threshold);
  std::printf("task=%s judge=%s count=%zu threshold=%g accuracy=%.1f\n",
              o.task.c_str(),
              ms::ClassifierSpec::kind_name(judge->spec().kind), rolls.size(),
              o.threshold, accuracy);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symbolic music genre transfer toolkit"};
  app.require_subcommand(1);

  std::string config_path;  // re-parsed by CLI11 so the flag is documented

  // prepare-data ---------------------------------------------------------
  PrepareOpts prep;
  JsonBinding prep_bind;
  auto* prep_cmd = app.add_subcommand(
      "prepare-data", "Quantize a directory of MIDI files into phrases");
  prep_cmd->add_option("--in", prep.in, "MIDI file or directory")->required();
  prep_cmd->add_option("--out", prep.out, "output dataset (.npy)")->required();
  prep_bind.bind("in", &prep.in);
  prep_bind.bind("out", &prep.out);

  // make-synthetic -------------------------------------------------------
  SyntheticOpts synth;
  JsonBinding synth_bind;
  auto* synth_cmd = app.add_subcommand(
      "make-synthetic", "Generate the separable two-band synthetic corpus");
  synth_cmd->add_option("--out-a", synth.out_a, "jazz-domain output (.npy)")
      ->required();
  synth_cmd->add_option("--out-b", synth.out_b, "classic-domain output (.npy)")
      ->required();
  synth_cmd->add_option("--count", synth.count, "phrases per genre");
  synth_cmd->add_option("--notes", synth.notes, "active cells per phrase");
  add_seed_option(synth_cmd, &synth_bind, &synth.seed);
  synth_bind.bind("out-a", &synth.out_a);
  synth_bind.bind("out-b", &synth.out_b);
  synth_bind.bind("count", &synth.count);
  synth_bind.bind("notes", &synth.notes);

  // train-classifier -----------------------------------------------------
  TrainClassifierOpts tc;
  JsonBinding tc_bind;
  auto* tc_cmd = app.add_subcommand(
      "train-classifier", "Fit a genre classifier on two phrase datasets");
  tc_cmd->add_option("--algo", tc.algo, "classifier algorithm")
      ->check(CLI::IsMember({"nb", "knn", "rf", "mlp"}));
  tc_cmd->add_option("--data-a", tc.data_a, "jazz-domain dataset (.npy)")
      ->required();
  tc_cmd->add_option("--data-b", tc.data_b, "classic-domain dataset (.npy)")
      ->required();
  tc_cmd->add_option("--out", tc.out, "output model file");
  tc_cmd->add_option("--test-fraction", tc.test_fraction,
                     "held-out fraction per genre");
  tc_cmd->add_flag("--sweep", tc.sweep,
                   "write a hyperparameter sweep curve (knn: k, rf: depth)");
  tc_cmd->add_option("--sweep-out", tc.sweep_out,
                     "sweep CSV path (default: <out>.sweep.csv)");
  tc_cmd->add_option("--event-model", tc.event_model,
                     "naive Bayes event model")
      ->check(CLI::IsMember({"bernoulli", "gaussian"}));
  tc_cmd->add_option("--alpha", tc.alpha, "naive Bayes smoothing");
  tc_cmd->add_option("--k", tc.k, "neighbor count");
  tc_cmd->add_option("--trees", tc.trees, "forest size");
  tc_cmd->add_option("--max-depth", tc.max_depth, "tree depth cap");
  tc_cmd->add_option("--hidden-layers", tc.hidden_layers, "MLP hidden layers");
  tc_cmd->add_option("--neurons", tc.neurons, "MLP neurons per hidden layer");
  tc_cmd->add_option("--lr", tc.lr, "MLP initial learning rate");
  tc_cmd->add_option("--max-iter", tc.max_iter, "MLP epoch cap");
  add_seed_option(tc_cmd, &tc_bind, &tc.seed);
  tc_bind.bind("algo", &tc.algo);
  tc_bind.bind("data-a", &tc.data_a);
  tc_bind.bind("data-b", &tc.data_b);
  tc_bind.bind("out", &tc.out);
  tc_bind.bind("test-fraction", &tc.test_fraction);
  tc_bind.bind("sweep", &tc.sweep);
  tc_bind.bind("sweep-out", &tc.sweep_out);
  tc_bind.bind("event-model", &tc.event_model);
  tc_bind.bind("alpha", &tc.alpha);
  tc_bind.bind("k", &tc.k);
  tc_bind.bind("trees", &tc.trees);
  tc_bind.bind("max-depth", &tc.max_depth);
  tc_bind.bind("hidden-layers", &tc.hidden_layers);
  tc_bind.bind("neurons", &tc.neurons);
  tc_bind.bind("lr", &tc.lr);
  tc_bind.bind("max-iter", &tc.max_iter);

  // train-transfer -------------------------------------------------------
  TrainTransferOpts tt;
  JsonBinding tt_bind;
  auto* tt_cmd = app.add_subcommand(
      "train-transfer", "Train the two-domain style-transfer model");
  tt_cmd->add_option("--data-a", tt.data_a, "jazz-domain dataset (.npy)")
      ->required();
  tt_cmd->add_option("--data-b", tt.data_b, "classic-domain dataset (.npy)")
      ->required();
  tt_cmd->add_option("--out", tt.out, "output directory")->required();
  tt_cmd->add_option("--steps", tt.steps, "total optimization steps")
      ->required();
  tt_cmd->add_option("--resume", tt.resume, "checkpoint to resume from");
  tt_cmd->add_option("--gen", tt.gen, "generator architecture")
      ->check(CLI::IsMember({"resnet9", "unet128"}));
  tt_cmd->add_option("--batch-size", tt.batch_size, "phrases per batch");
  tt_cmd->add_option("--base-channels", tt.base_channels,
                     "width of generators and discriminators");
  tt_cmd->add_option("--res-blocks", tt.res_blocks,
                     "residual blocks (resnet9 generator)");
  tt_cmd->add_option("--pool-size", tt.pool_size, "fake-sample pool capacity");
  tt_cmd->add_option("--checkpoint-every", tt.checkpoint_every,
                     "checkpoint cadence in steps (0: final only)");
  tt_cmd->add_option("--lr", tt.lr, "Adam learning rate");
  tt_cmd->add_option("--beta1", tt.beta1, "Adam first-moment decay");
  tt_cmd->add_option("--gamma", tt.gamma, "auxiliary discriminator weight");
  tt_cmd->add_option("--lambda-cycle", tt.lambda_cycle,
                     "cycle-consistency weight");
  tt_cmd->add_option("--lambda-identity", tt.lambda_identity,
                     "identity-mapping weight");
  tt_cmd->add_option("--margin", tt.margin, "triplet margin");
  tt_cmd->add_flag("--aux,!--no-aux", tt.use_aux,
                   "train auxiliary discriminators");
  tt_cmd->add_flag("--triplet,!--no-triplet", tt.use_triplet,
                   "add the triplet terms to the generator objective");
  add_seed_option(tt_cmd, &tt_bind, &tt.seed);
  tt_bind.bind("data-a", &tt.data_a);
  tt_bind.bind("data-b", &tt.data_b);
  tt_bind.bind("out", &tt.out);
  tt_bind.bind("steps", &tt.steps);
  tt_bind.bind("resume", &tt.resume);
  tt_bind.bind("gen", &tt.gen);
  tt_bind.bind("batch-size", &tt.batch_size);
  tt_bind.bind("base-channels", &tt.base_channels);
  tt_bind.bind("res-blocks", &tt.res_blocks);
  tt_bind.bind("pool-size", &tt.pool_size);
  tt_bind.bind("checkpoint-every", &tt.checkpoint_every);
  tt_bind.bind("lr", &tt.lr);
  tt_bind.bind("beta1", &tt.beta1);
  tt_bind.bind("gamma", &tt.gamma);
  tt_bind.bind("lambda-cycle", &tt.lambda_cycle);
  tt_bind.bind("lambda-identity", &tt.lambda_identity);
  tt_bind.bind("margin", &tt.margin);
  tt_bind.bind("aux", &tt.use_aux);
  tt_bind.bind("triplet", &tt.use_triplet);

  // transfer ---------------------------------------------------------------
  TransferOpts tr;
  JsonBinding tr_bind;
  auto* tr_cmd = app.add_subcommand(
      "transfer", "Restyle one MIDI file through a trained model");
  tr_cmd->add_option("--model", tr.model, "training checkpoint (.msar)")
      ->required();
  tr_cmd->add_option("--in", tr.in, "input MIDI file")->required();
  tr_cmd->add_option("--out", tr.out, "output MIDI file")->required();
  tr_cmd->add_option("--direction", tr.direction, "transfer direction")
      ->check(CLI::IsMember({"j2c", "c2j"}));
  tr_cmd->add_option("--threshold", tr.threshold,
                     "binarization threshold in (0,1)");
  tr_cmd->add_option("--tempo", tr.tempo, "output tempo (BPM)");
  tr_cmd->add_option("--velocity", tr.velocity, "output note velocity");
  tr_cmd->add_option("--program", tr.program, "output MIDI program");
  tr_bind.bind("model", &tr.model);
  tr_bind.bind("in", &tr.in);
  tr_bind.bind("out", &tr.out);
  tr_bind.bind("direction", &tr.direction);
  tr_bind.bind("threshold", &tr.threshold);
  tr_bind.bind("tempo", &tr.tempo);
  tr_bind.bind("velocity", &tr.velocity);
  tr_bind.bind("program", &tr.program);

  // evaluate ---------------------------------------------------------------
  EvaluateOpts ev;
  JsonBinding ev_bind;
  auto* ev_cmd = app.add_subcommand(
      "evaluate", "Judge transferred phrases with a trained classifier");
  ev_cmd->add_option("--model", ev.model, "training checkpoint (.msar)")
      ->required();
  ev_cmd->add_option("--classifier", ev.classifier, "classifier model file")
      ->required();
  ev_cmd->add_option("--data", ev.data, "source-domain dataset (.npy)")
      ->required();
  ev_cmd->add_option("--task", ev.task, "transfer task")
      ->check(CLI::IsMember({"j2c", "c2j"}));
  ev_cmd->add_option("--threshold", ev.threshold,
                     "binarization threshold in (0,1)");
  ev_bind.bind("model", &ev.model);
  ev_bind.bind("classifier", &ev.classifier);
  ev_bind.bind("data", &ev.data);
  ev_bind.bind("task", &ev.task);
  ev_bind.bind("threshold", &ev.threshold);

  // every subcommand documents --config; values are applied before parsing
  const std::map<std::string, JsonBinding*> bindings = {
      {"prepare-data", &prep_bind},   {"make-synthetic", &synth_bind},
      {"train-classifier", &tc_bind}, {"train-transfer", &tt_bind},
      {"transfer", &tr_bind},         {"evaluate", &ev_bind},
  };
  for (auto* sub : {prep_cmd, synth_cmd, tc_cmd, tt_cmd, tr_cmd, ev_cmd}) {
    sub->add_option("--config", config_path,
                    "JSON file with default option values (flags override)");
  }

  prep_cmd->callback([&] { run_prepare_data(prep); });
  synth_cmd->callback([&] { run_make_synthetic(synth); });
  tc_cmd->callback([&] { run_train_classifier(tc); });
  tt_cmd->callback([&] { run_train_transfer(tt); });
  tr_cmd->callback([&] { run_transfer(tr); });
  ev_cmd->callback([&] { run_evaluate(ev); });

  try {
    const std::string pre_config = config_path_from_argv(argc, argv);
    if (!pre_config.empty()) {
      for (int i = 1; i < argc; ++i) {
        auto found = bindings.find(argv[i]);
        if (found != bindings.end()) {
          found->second->apply(load_config_file(pre_config));
          break;
        }
      }
    }
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const midistyle::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

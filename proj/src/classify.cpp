#include "midistyle/classify.hpp"

#include <cstdio>

#include <json.hpp>

#include "midistyle/detail/classify_io.hpp"

namespace midistyle {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

FeatureVector featurize(const PianoRoll& roll) {
  return FeatureVector(roll.values.begin(), roll.values.end());
}

PianoRoll unfeaturize(const FeatureVector& features) {
  require(static_cast<int>(features.size()) == kFeatureDim,
          errc::layout_mismatch, "feature vector must have 5376 entries");
  PianoRoll roll;
  std::copy(features.begin(), features.end(), roll.values.begin());
  roll.binary = roll.check_binary();
  return roll;
}

LabeledFeatures featurize_samples(const std::vector<LabeledSample>& samples) {
  LabeledFeatures out;
  out.x.reserve(samples.size());
  out.y.reserve(samples.size());
  for (const LabeledSample& s : samples) {
    out.add(featurize(s.roll), s.label);
  }
  return out;
}

const char* ClassifierSpec::kind_name(Kind k) {
  switch (k) {
    case Kind::NaiveBayes: return "nb";
    case Kind::KNN: return "knn";
    case Kind::RandomForest: return "rf";
    case Kind::MLP: return "mlp";
  }
  return "unknown";
}

ClassifierSpec::Kind ClassifierSpec::kind_from_name(const std::string& name) {
  if (name == "nb") return Kind::NaiveBayes;
  if (name == "knn") return Kind::KNN;
  if (name == "rf") return Kind::RandomForest;
  if (name == "mlp") return Kind::MLP;
  raise(errc::invalid_hyperparam,
        "unknown classifier '" + name + "' (expected nb, knn, rf or mlp)");
}

void ClassifierSpec::validate() const {
  switch (kind) {
    case Kind::NaiveBayes:
      if (nb_event_model == EventModel::Bernoulli) {
        require(nb_alpha > 0.0, errc::invalid_hyperparam,
                "smoothing alpha must be positive");
      }
      break;
    case Kind::KNN:
      require(knn_k >= 1, errc::invalid_hyperparam, "k must be at least 1");
      break;
    case Kind::RandomForest:
      require(rf_n_trees >= 1, errc::invalid_hyperparam,
              "forest needs at least one tree");
      require(rf_max_depth >= 1 && rf_max_depth <= 60,
              errc::invalid_hyperparam, "max_depth must be in 1..60");
      break;
    case Kind::MLP:
      require(mlp_hidden_layers >= 1, errc::invalid_hyperparam,
              "need at least one hidden layer");
      require(mlp_neurons >= 1, errc::invalid_hyperparam,
              "neurons must be at least 1");
      require(mlp_activation == "relu", errc::invalid_hyperparam,
              "supported activation: relu");
      require(mlp_optimizer == "adam", errc::invalid_hyperparam,
              "supported optimizer: adam");
      require(mlp_learning_rate > 0.0, errc::invalid_hyperparam,
              "learning rate must be positive");
      require(mlp_max_iterations >= 1, errc::invalid_hyperparam,
              "max_iterations must be at least 1");
      break;
  }
}

namespace {

void check_train_set(const LabeledFeatures& train) {
  require(train.size() == train.y.size(), errc::invalid_argument,
          "feature/label count mismatch");
  std::array<size_t, kGenreCount> counts{};
  for (GenreLabel y : train.y) ++counts[static_cast<size_t>(y)];
  require(counts[0] > 0 && counts[1] > 0, errc::empty_class,
          "training set needs at least one sample of each genre");
  const size_t dim = train.x.empty() ? 0 : train.x.front().size();
  for (const FeatureVector& f : train.x) {
    require(f.size() == dim, errc::layout_mismatch,
            "inconsistent feature vector lengths");
  }
}

}  // namespace

std::unique_ptr<Classifier> fit(const ClassifierSpec& spec,
                                const LabeledFeatures& train) {
  spec.validate();
  check_train_set(train);
  switch (spec.kind) {
    case ClassifierSpec::Kind::NaiveBayes: return fit_naive_bayes(spec, train);
    case ClassifierSpec::Kind::KNN: return fit_knn(spec, train);
    case ClassifierSpec::Kind::RandomForest: return fit_forest(spec, train);
    case ClassifierSpec::Kind::MLP: return fit_mlp(spec, train);
  }
  raise(errc::invalid_hyperparam, "unknown classifier kind");
}

void save_classifier(const std::string& path, const Classifier& classifier) {
  Archive archive;
  classifier.save(archive);
  write_archive(path, archive);
}

std::unique_ptr<Classifier> load_classifier(const std::string& path) {
  Archive archive = read_archive(path);
  int n_features = 0;
  ClassifierSpec spec = detail::spec_from_meta(archive.meta, n_features);
  switch (spec.kind) {
    case ClassifierSpec::Kind::NaiveBayes: return load_naive_bayes(archive);
    case ClassifierSpec::Kind::KNN: return load_knn(archive);
    case ClassifierSpec::Kind::RandomForest: return load_forest(archive);
    case ClassifierSpec::Kind::MLP: return load_mlp(archive);
  }
  raise(errc::corrupt_checkpoint, "unknown classifier kind in " + path);
}

AccuracyReport evaluate(const Classifier& classifier,
                        const LabeledFeatures& test) {
  require(test.size() > 0, errc::empty_test_set, "test set is empty");
  require(test.size() == test.y.size(), errc::invalid_argument,
          "feature/label count mismatch");

  AccuracyReport report;
  for (size_t i = 0; i < test.size(); ++i) {
    const GenreLabel truth = test.y[i];
    const GenreLabel pred = classifier.predict(test.x[i]);
    ++report.confusion[static_cast<size_t>(truth)][static_cast<size_t>(pred)];
  }
  int64_t correct = 0, total = 0;
  for (size_t t = 0; t < kGenreCount; ++t) {
    int64_t row = 0;
    for (size_t p = 0; p < kGenreCount; ++p) {
      row += report.confusion[t][p];
      total += report.confusion[t][p];
    }
    correct += report.confusion[t][t];
    report.per_genre[t] =
        row > 0 ? 100.0 * static_cast<double>(report.confusion[t][t]) /
                      static_cast<double>(row)
                : 0.0;
  }
  report.overall =
      100.0 * static_cast<double>(correct) / static_cast<double>(total);
  return report;
}

std::string KnnCurve::to_csv() const {
  std::string out = "k,accuracy\n";
  for (const KnnCurvePoint& p : points) {
    out += std::to_string(p.k) + "," + format_double(p.accuracy) + "\n";
  }
  return out;
}

std::string RfCurve::to_csv() const {
  std::string out = "depth,train_acc,test_acc\n";
  for (const RfCurvePoint& p : points) {
    out += std::to_string(p.depth) + "," + format_double(p.train_accuracy) +
           "," + format_double(p.test_accuracy) + "\n";
  }
  return out;
}

namespace detail {

std::string classifier_meta(const ClassifierSpec& spec, int n_features) {
  nlohmann::json j;
  j["format"] = "midistyle-classifier";
  j["kind"] = ClassifierSpec::kind_name(spec.kind);
  j["n_features"] = n_features;
  j["classes"] = {genre_name(GenreLabel::Classic), genre_name(GenreLabel::Jazz)};
  j["seed"] = spec.seed;
  switch (spec.kind) {
    case ClassifierSpec::Kind::NaiveBayes:
      j["event_model"] =
          spec.nb_event_model == ClassifierSpec::EventModel::Bernoulli
              ? "bernoulli"
              : "gaussian";
      j["alpha"] = spec.nb_alpha;
      break;
    case ClassifierSpec::Kind::KNN:
      j["k"] = spec.knn_k;
      j["metric"] = "euclidean";
      break;
    case ClassifierSpec::Kind::RandomForest:
      j["n_trees"] = spec.rf_n_trees;
      j["max_depth"] = spec.rf_max_depth;
      break;
    case ClassifierSpec::Kind::MLP:
      j["hidden_layers"] = spec.mlp_hidden_layers;
      j["neurons"] = spec.mlp_neurons;
      j["activation"] = spec.mlp_activation;
      j["optimizer"] = spec.mlp_optimizer;
      j["learning_rate"] = spec.mlp_learning_rate;
      j["max_iterations"] = spec.mlp_max_iterations;
      break;
  }
  return j.dump();
}

ClassifierSpec spec_from_meta(const std::string& meta, int& n_features) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception&) {
    raise(errc::corrupt_checkpoint, "unreadable classifier metadata");
  }
  require(j.value("format", "") == "midistyle-classifier",
          errc::corrupt_checkpoint, "not a classifier container");
  ClassifierSpec spec;
  try {
    spec.kind = ClassifierSpec::kind_from_name(j.at("kind").get<std::string>());
    n_features = j.at("n_features").get<int>();
    spec.seed = j.value("seed", 0ull);
    switch (spec.kind) {
      case ClassifierSpec::Kind::NaiveBayes:
        spec.nb_event_model = j.value("event_model", "bernoulli") == "gaussian"
                                  ? ClassifierSpec::EventModel::Gaussian
                                  : ClassifierSpec::EventModel::Bernoulli;
        spec.nb_alpha = j.value("alpha", 1.0);
        break;
      case ClassifierSpec::Kind::KNN:
        spec.knn_k = j.at("k").get<int>();
        break;
      case ClassifierSpec::Kind::RandomForest:
        spec.rf_n_trees = j.at("n_trees").get<int>();
        spec.rf_max_depth = j.at("max_depth").get<int>();
        break;
      case ClassifierSpec::Kind::MLP:
        spec.mlp_hidden_layers = j.at("hidden_layers").get<int>();
        spec.mlp_neurons = j.at("neurons").get<int>();
        spec.mlp_activation = j.value("activation", "relu");
        spec.mlp_optimizer = j.value("optimizer", "adam");
        spec.mlp_learning_rate = j.value("learning_rate", 1e-3);
        spec.mlp_max_iterations = j.value("max_iterations", 200);
        break;
    }
  } catch (const nlohmann::json::exception&) {
    raise(errc::corrupt_checkpoint, "classifier metadata fields missing");
  }
  return spec;
}

}  // namespace detail

}  // namespace midistyle

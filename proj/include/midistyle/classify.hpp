#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "midistyle/archive.hpp"
#include "midistyle/dataset.hpp"
#include "midistyle/pianoroll.hpp"

namespace midistyle {

// Classifier input: the roll flattened time-major, index = step * 84 + row.
using FeatureVector = std::vector<double>;
constexpr int kFeatureDim = PianoRoll::kCells;

FeatureVector featurize(const PianoRoll& roll);
PianoRoll unfeaturize(const FeatureVector& features);

struct LabeledFeatures {
  std::vector<FeatureVector> x;
  std::vector<GenreLabel> y;

  size_t size() const { return x.size(); }
  void add(FeatureVector features, GenreLabel label) {
    x.push_back(std::move(features));
    y.push_back(label);
  }
};

LabeledFeatures featurize_samples(const std::vector<LabeledSample>& samples);

struct ClassifierSpec {
  enum class Kind { NaiveBayes, KNN, RandomForest, MLP };
  enum class EventModel { Bernoulli, Gaussian };

  Kind kind = Kind::NaiveBayes;
  uint64_t seed = 0;

  // naive Bayes
  EventModel nb_event_model = EventModel::Bernoulli;
  double nb_alpha = 1.0;  // Laplace smoothing for the Bernoulli model

  // k-nearest-neighbors (Euclidean metric)
  int knn_k = 1;

  // random forest (Gini impurity, sqrt-of-features candidates per split)
  int rf_n_trees = 100;
  int rf_max_depth = 40;

  // multilayer perceptron
  int mlp_hidden_layers = 1;
  int mlp_neurons = 1000;
  std::string mlp_activation = "relu";
  std::string mlp_optimizer = "adam";
  double mlp_learning_rate = 1e-3;  // adaptive: /5 on plateau, stop at 1e-6
  int mlp_max_iterations = 200;

  void validate() const;
  static const char* kind_name(Kind k);
  static Kind kind_from_name(const std::string& name);
};

struct PredictResult {
  GenreLabel label = GenreLabel::Classic;
  // per-class scores indexed by GenreLabel; higher wins, ties go to Classic
  std::array<double, kGenreCount> scores{};
};

class Classifier {
 public:
  virtual ~Classifier() = default;

  const ClassifierSpec& spec() const { return spec_; }
  int n_features() const { return n_features_; }

  GenreLabel predict(const FeatureVector& features) const {
    return predict_scored(features).label;
  }
  virtual PredictResult predict_scored(const FeatureVector& features) const = 0;

  virtual void save(Archive& archive) const = 0;

 protected:
  Classifier(ClassifierSpec spec, int n_features)
      : spec_(std::move(spec)), n_features_(n_features) {}

  void check_features(const FeatureVector& features) const {
    require(static_cast<int>(features.size()) == n_features_,
            errc::layout_mismatch, "feature vector length mismatch");
  }
  // argmax with the documented tie-break toward Classic
  static PredictResult pick(const std::array<double, kGenreCount>& scores) {
    PredictResult r;
    r.scores = scores;
    r.label = scores[1] > scores[0] ? GenreLabel::Jazz : GenreLabel::Classic;
    return r;
  }

  ClassifierSpec spec_;
  int n_features_ = 0;
};

// Dispatches on spec.kind; requires at least one sample of each genre.
std::unique_ptr<Classifier> fit(const ClassifierSpec& spec,
                                const LabeledFeatures& train);

void save_classifier(const std::string& path, const Classifier& classifier);
std::unique_ptr<Classifier> load_classifier(const std::string& path);

struct AccuracyReport {
  double overall = 0.0;                           // percent
  std::array<double, kGenreCount> per_genre{};    // recall per true genre, %
  std::array<std::array<int64_t, kGenreCount>, kGenreCount> confusion{};
  // confusion[true_label][predicted_label]
};

AccuracyReport evaluate(const Classifier& classifier,
                        const LabeledFeatures& test);

// k sweep sharing one sorted neighbor table per test point.
struct KnnCurvePoint {
  int k;
  double accuracy;  // percent
};
struct KnnCurve {
  std::vector<KnnCurvePoint> points;
  int best_k = 1;
  double best_accuracy = 0.0;
  std::string to_csv() const;  // "k,accuracy"
};
KnnCurve tune_knn(const LabeledFeatures& train, const LabeledFeatures& test,
                  int k_min = 1, int k_max = 50);

// depth sweep; same seed per depth so deeper forests are refinements.
struct RfCurvePoint {
  int depth;
  double train_accuracy;  // percent
  double test_accuracy;   // percent
};
struct RfCurve {
  std::vector<RfCurvePoint> points;
  int best_depth = 1;
  double best_test_accuracy = 0.0;
  std::string to_csv() const;  // "depth,train_acc,test_acc"
};
RfCurve tune_rf(const LabeledFeatures& train, const LabeledFeatures& test,
                const ClassifierSpec& base, int depth_min = 1,
                int depth_max = 40);

// Internal factories (one per algorithm file); fit() dispatches to these.
std::unique_ptr<Classifier> fit_naive_bayes(const ClassifierSpec& spec,
                                            const LabeledFeatures& train);
std::unique_ptr<Classifier> fit_knn(const ClassifierSpec& spec,
                                    const LabeledFeatures& train);
std::unique_ptr<Classifier> fit_forest(const ClassifierSpec& spec,
                                       const LabeledFeatures& train);
std::unique_ptr<Classifier> fit_mlp(const ClassifierSpec& spec,
                                    const LabeledFeatures& train);

std::unique_ptr<Classifier> load_naive_bayes(const Archive& archive);
std::unique_ptr<Classifier> load_knn(const Archive& archive);
std::unique_ptr<Classifier> load_forest(const Archive& archive);
std::unique_ptr<Classifier> load_mlp(const Archive& archive);

// Per-tree votes for a fitted random forest (vote-oracle testing hook);
// raises unless the classifier is a forest.
std::vector<GenreLabel> forest_tree_votes(const Classifier& forest,
                                          const FeatureVector& features);

}  // namespace midistyle

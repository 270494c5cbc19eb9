#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "midistyle/classify.hpp"
#include "midistyle/detail/classify_io.hpp"

namespace midistyle {

namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Brute-force Euclidean k-nearest-neighbors over the stored training set.
// Distance ties prefer the smaller training index; vote ties prefer Classic.
class Knn : public Classifier {
 public:
  Knn(ClassifierSpec spec, int n_features)
      : Classifier(std::move(spec), n_features) {}

  RowMatrix train_x;                // n_train x n_features
  std::vector<GenreLabel> train_y;

  // (squared distance, training index) sorted ascending
  std::vector<std::pair<double, size_t>> neighbors(
      const FeatureVector& f) const {
    check_features(f);
    Eigen::Map<const Eigen::VectorXd> q(f.data(),
                                        static_cast<long>(f.size()));
    Eigen::VectorXd d2 =
        (train_x.rowwise() - q.transpose()).rowwise().squaredNorm();
    std::vector<std::pair<double, size_t>> order(
        static_cast<size_t>(train_x.rows()));
    for (size_t i = 0; i < order.size(); ++i) {
      order[i] = {d2[static_cast<long>(i)], i};
    }
    std::sort(order.begin(), order.end());
    return order;
  }

  static GenreLabel vote(const std::vector<std::pair<double, size_t>>& order,
                         const std::vector<GenreLabel>& labels, int k) {
    int count_jazz = 0;
    for (int i = 0; i < k; ++i) {
      count_jazz += labels[order[static_cast<size_t>(i)].second] ==
                    GenreLabel::Jazz;
    }
    return 2 * count_jazz > k ? GenreLabel::Jazz : GenreLabel::Classic;
  }

  PredictResult predict_scored(const FeatureVector& f) const override {
    const auto order = neighbors(f);
    const int k = spec_.knn_k;
    std::array<double, kGenreCount> score{};
    for (int i = 0; i < k; ++i) {
      score[static_cast<size_t>(
          train_y[order[static_cast<size_t>(i)].second])] += 1.0;
    }
    return pick(score);
  }

  void save(Archive& archive) const override {
    archive.meta = detail::classifier_meta(spec_, n_features_);
    Tensor x({train_x.rows(), train_x.cols()});
    for (long i = 0; i < train_x.rows(); ++i) {
      for (long j = 0; j < train_x.cols(); ++j) {
        x[i * train_x.cols() + j] = train_x(i, j);
      }
    }
    archive.add("train_x", std::move(x));
    Tensor y({train_x.rows()});
    for (long i = 0; i < train_x.rows(); ++i) {
      y[i] = static_cast<double>(train_y[static_cast<size_t>(i)]);
    }
    archive.add("train_y", std::move(y));
  }
};

}  // namespace

std::unique_ptr<Classifier> fit_knn(const ClassifierSpec& spec,
                                    const LabeledFeatures& train) {
  require(spec.knn_k <= static_cast<int>(train.size()),
          errc::invalid_hyperparam, "k exceeds the training set size");
  const int n_features =
      static_cast<int>(train.x.empty() ? 0 : train.x.front().size());
  auto model = std::make_unique<Knn>(spec, n_features);
  model->train_x.resize(static_cast<long>(train.size()), n_features);
  for (size_t i = 0; i < train.size(); ++i) {
    for (int j = 0; j < n_features; ++j) {
      model->train_x(static_cast<long>(i), j) =
          train.x[i][static_cast<size_t>(j)];
    }
  }
  model->train_y = train.y;
  return model;
}

std::unique_ptr<Classifier> load_knn(const Archive& archive) {
  int n_features = 0;
  ClassifierSpec spec = detail::spec_from_meta(archive.meta, n_features);
  auto model = std::make_unique<Knn>(spec, n_features);
  const Tensor& x = archive.get("train_x");
  const Tensor& y = archive.get("train_y");
  require(x.rank() == 2 && x.dim(1) == n_features && y.size() == x.dim(0),
          errc::corrupt_checkpoint, "bad training array shapes");
  model->train_x.resize(x.dim(0), x.dim(1));
  for (int64_t i = 0; i < x.dim(0); ++i) {
    for (int64_t j = 0; j < x.dim(1); ++j) {
      model->train_x(static_cast<long>(i), static_cast<long>(j)) =
          x[i * x.dim(1) + j];
    }
  }
  model->train_y.resize(static_cast<size_t>(y.size()));
  for (int64_t i = 0; i < y.size(); ++i) {
    model->train_y[static_cast<size_t>(i)] =
        y[i] == 0.0 ? GenreLabel::Classic : GenreLabel::Jazz;
  }
  return model;
}

KnnCurve tune_knn(const LabeledFeatures& train, const LabeledFeatures& test,
                  int k_min, int k_max) {
  require(k_min >= 1 && k_min <= k_max, errc::invalid_hyperparam,
          "bad k range");
  require(k_max <= static_cast<int>(train.size()), errc::invalid_hyperparam,
          "k range exceeds training set size");
  require(test.size() > 0, errc::empty_test_set, "test set is empty");

  ClassifierSpec spec;
  spec.kind = ClassifierSpec::Kind::KNN;
  spec.knn_k = k_min;
  spec.validate();
  std::unique_ptr<Classifier> base = fit_knn(spec, train);
  auto* knn = static_cast<Knn*>(base.get());

  // one sorted neighbor table per test point, reused across every k
  std::vector<int> correct(static_cast<size_t>(k_max - k_min + 1), 0);
  for (size_t i = 0; i < test.size(); ++i) {
    const auto order = knn->neighbors(test.x[i]);
    for (int k = k_min; k <= k_max; ++k) {
      if (Knn::vote(order, knn->train_y, k) == test.y[i]) {
        ++correct[static_cast<size_t>(k - k_min)];
      }
    }
  }

  KnnCurve curve;
  curve.best_k = k_min;
  curve.best_accuracy = -1.0;
  for (int k = k_min; k <= k_max; ++k) {
    const double acc = 100.0 *
                       static_cast<double>(correct[static_cast<size_t>(
                           k - k_min)]) /
                       static_cast<double>(test.size());
    curve.points.push_back({k, acc});
    if (acc > curve.best_accuracy) {
      curve.best_accuracy = acc;
      curve.best_k = k;
    }
  }
  return curve;
}

}  // namespace midistyle

#include <cmath>
#include <numbers>

#include "midistyle/classify.hpp"
#include "midistyle/detail/classify_io.hpp"

namespace midistyle {

namespace {

// Per-class priors with either a Bernoulli event model (feature-on
// probabilities with Laplace smoothing) or a Gaussian one (per-feature
// mean/variance). Scores are unnormalized log joints.
class NaiveBayes : public Classifier {
 public:
  NaiveBayes(ClassifierSpec spec, int n_features)
      : Classifier(std::move(spec), n_features) {}

  std::array<double, kGenreCount> log_prior{};
  // Bernoulli: theta[c][f] = P(feature f on | class c)
  std::vector<std::array<double, kGenreCount>> theta;
  // Gaussian: per-feature mean and variance (smoothed)
  std::vector<std::array<double, kGenreCount>> mean;
  std::vector<std::array<double, kGenreCount>> variance;

  PredictResult predict_scored(const FeatureVector& f) const override {
    check_features(f);
    std::array<double, kGenreCount> score = log_prior;
    if (spec_.nb_event_model == ClassifierSpec::EventModel::Bernoulli) {
      for (int i = 0; i < n_features_; ++i) {
        const double x = f[static_cast<size_t>(i)];
        for (size_t c = 0; c < kGenreCount; ++c) {
          const double t = theta[static_cast<size_t>(i)][c];
          score[c] += x * std::log(t) + (1.0 - x) * std::log(1.0 - t);
        }
      }
    } else {
      for (int i = 0; i < n_features_; ++i) {
        const double x = f[static_cast<size_t>(i)];
        for (size_t c = 0; c < kGenreCount; ++c) {
          const double m = mean[static_cast<size_t>(i)][c];
          const double v = variance[static_cast<size_t>(i)][c];
          score[c] += -0.5 * std::log(2.0 * std::numbers::pi * v) -
                      (x - m) * (x - m) / (2.0 * v);
        }
      }
    }
    return pick(score);
  }

  void save(Archive& archive) const override {
    archive.meta = detail::classifier_meta(spec_, n_features_);
    Tensor prior({kGenreCount});
    prior[0] = log_prior[0];
    prior[1] = log_prior[1];
    archive.add("log_prior", std::move(prior));
    auto pack = [this](const std::vector<std::array<double, kGenreCount>>& m) {
      Tensor t({kGenreCount, n_features_});
      for (int f = 0; f < n_features_; ++f) {
        for (int c = 0; c < kGenreCount; ++c) {
          t[c * n_features_ + f] = m[static_cast<size_t>(f)]
                                    [static_cast<size_t>(c)];
        }
      }
      return t;
    };
    if (spec_.nb_event_model == ClassifierSpec::EventModel::Bernoulli) {
      archive.add("theta", pack(theta));
    } else {
      archive.add("mean", pack(mean));
      archive.add("variance", pack(variance));
    }
  }
};

std::vector<std::array<double, kGenreCount>> unpack(const Tensor& t) {
  const int n_features = static_cast<int>(t.dim(1));
  std::vector<std::array<double, kGenreCount>> m(
      static_cast<size_t>(n_features));
  for (int f = 0; f < n_features; ++f) {
    for (int c = 0; c < kGenreCount; ++c) {
      m[static_cast<size_t>(f)][static_cast<size_t>(c)] =
          t[c * n_features + f];
    }
  }
  return m;
}

}  // namespace

std::unique_ptr<Classifier> fit_naive_bayes(const ClassifierSpec& spec,
                                            const LabeledFeatures& train) {
  const int n_features =
      static_cast<int>(train.x.empty() ? 0 : train.x.front().size());
  auto model = std::make_unique<NaiveBayes>(spec, n_features);

  std::array<double, kGenreCount> count{};
  for (GenreLabel y : train.y) count[static_cast<size_t>(y)] += 1.0;
  const double n = static_cast<double>(train.size());
  for (size_t c = 0; c < kGenreCount; ++c) {
    model->log_prior[c] = std::log(count[c] / n);
  }

  if (spec.nb_event_model == ClassifierSpec::EventModel::Bernoulli) {
    std::vector<std::array<double, kGenreCount>> on(
        static_cast<size_t>(n_features));
    for (size_t i = 0; i < train.size(); ++i) {
      const size_t c = static_cast<size_t>(train.y[i]);
      const FeatureVector& x = train.x[i];
      for (int f = 0; f < n_features; ++f) {
        on[static_cast<size_t>(f)][c] += x[static_cast<size_t>(f)];
      }
    }
    model->theta.resize(static_cast<size_t>(n_features));
    for (int f = 0; f < n_features; ++f) {
      for (size_t c = 0; c < kGenreCount; ++c) {
        model->theta[static_cast<size_t>(f)][c] =
            (on[static_cast<size_t>(f)][c] + spec.nb_alpha) /
            (count[c] + 2.0 * spec.nb_alpha);
      }
    }
  } else {
    model->mean.assign(static_cast<size_t>(n_features), {});
    model->variance.assign(static_cast<size_t>(n_features), {});
    for (size_t i = 0; i < train.size(); ++i) {
      const size_t c = static_cast<size_t>(train.y[i]);
      for (int f = 0; f < n_features; ++f) {
        model->mean[static_cast<size_t>(f)][c] += train.x[i][static_cast<size_t>(f)];
      }
    }
    for (int f = 0; f < n_features; ++f) {
      for (size_t c = 0; c < kGenreCount; ++c) {
        model->mean[static_cast<size_t>(f)][c] /= count[c];
      }
    }
    double max_var = 0.0;
    for (size_t i = 0; i < train.size(); ++i) {
      const size_t c = static_cast<size_t>(train.y[i]);
      for (int f = 0; f < n_features; ++f) {
        const double d = train.x[i][static_cast<size_t>(f)] -
                         model->mean[static_cast<size_t>(f)][c];
        model->variance[static_cast<size_t>(f)][c] += d * d;
      }
    }
    for (int f = 0; f < n_features; ++f) {
      for (size_t c = 0; c < kGenreCount; ++c) {
        model->variance[static_cast<size_t>(f)][c] /= count[c];
        max_var = std::max(max_var, model->variance[static_cast<size_t>(f)][c]);
      }
    }
    // variance floor keeps constant features from collapsing the density
    const double eps = 1e-9 * (max_var > 0.0 ? max_var : 1.0);
    for (int f = 0; f < n_features; ++f) {
      for (size_t c = 0; c < kGenreCount; ++c) {
        model->variance[static_cast<size_t>(f)][c] += eps;
      }
    }
  }
  return model;
}

std::unique_ptr<Classifier> load_naive_bayes(const Archive& archive) {
  int n_features = 0;
  ClassifierSpec spec = detail::spec_from_meta(archive.meta, n_features);
  auto model = std::make_unique<NaiveBayes>(spec, n_features);
  const Tensor& prior = archive.get("log_prior");
  require(prior.size() == kGenreCount, errc::corrupt_checkpoint,
          "bad prior shape");
  model->log_prior = {prior[0], prior[1]};
  if (spec.nb_event_model == ClassifierSpec::EventModel::Bernoulli) {
    model->theta = unpack(archive.get("theta"));
    require(static_cast<int>(model->theta.size()) == n_features,
            errc::corrupt_checkpoint, "bad theta shape");
  } else {
    model->mean = unpack(archive.get("mean"));
    model->variance = unpack(archive.get("variance"));
    require(static_cast<int>(model->mean.size()) == n_features &&
                static_cast<int>(model->variance.size()) == n_features,
            errc::corrupt_checkpoint, "bad moment shapes");
  }
  return model;
}

}  // namespace midistyle

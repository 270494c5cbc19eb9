#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "midistyle/classify.hpp"
#include "midistyle/detail/classify_io.hpp"
#include "midistyle/rng.hpp"

namespace midistyle {

namespace {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Fully connected ReLU network with a 2-way softmax head, trained with
// mini-batch Adam and cross-entropy. The learning rate is adaptive: divided
// by 5 whenever the epoch loss fails to improve for 2 consecutive epochs,
// stopping once it drops below 1e-6 (or max_iterations epochs elapse).
class Mlp : public Classifier {
 public:
  Mlp(ClassifierSpec spec, int n_features)
      : Classifier(std::move(spec), n_features) {}

  std::vector<Matrix> weights;  // weights[l]: fan_in x fan_out
  std::vector<Vector> biases;
  std::vector<double> loss_curve;

  Vector forward(const FeatureVector& f) const {
    Vector h = Eigen::Map<const Vector>(f.data(), static_cast<long>(f.size()));
    for (size_t l = 0; l < weights.size(); ++l) {
      h = (weights[l].transpose() * h + biases[l]).eval();
      if (l + 1 < weights.size()) h = h.cwiseMax(0.0);
    }
    return h;  // logits
  }

  PredictResult predict_scored(const FeatureVector& f) const override {
    check_features(f);
    require(!weights.empty(), errc::unfitted_model, "network has no layers");
    Vector logits = forward(f);
    // softmax, stabilized
    const double m = logits.maxCoeff();
    Vector e = (logits.array() - m).exp();
    e /= e.sum();
    return pick({e[0], e[1]});
  }

  void save(Archive& archive) const override {
    archive.meta = detail::classifier_meta(spec_, n_features_);
    for (size_t l = 0; l < weights.size(); ++l) {
      Tensor w({weights[l].rows(), weights[l].cols()});
      Eigen::Map<Matrix>(w.data(), weights[l].rows(), weights[l].cols()) =
          weights[l];
      archive.add("w" + std::to_string(l), std::move(w));
      Tensor b({biases[l].size()});
      Eigen::Map<Vector>(b.data(), biases[l].size()) = biases[l];
      archive.add("b" + std::to_string(l), std::move(b));
    }
    Tensor curve({static_cast<int64_t>(loss_curve.size())});
    std::copy(loss_curve.begin(), loss_curve.end(), curve.data());
    archive.add("loss_curve", std::move(curve));
  }
};

}  // namespace

std::unique_ptr<Classifier> fit_mlp(const ClassifierSpec& spec,
                                    const LabeledFeatures& train) {
  const int n_features =
      static_cast<int>(train.x.empty() ? 0 : train.x.front().size());
  auto model = std::make_unique<Mlp>(spec, n_features);

  std::vector<int> sizes;
  sizes.push_back(n_features);
  for (int l = 0; l < spec.mlp_hidden_layers; ++l) {
    sizes.push_back(spec.mlp_neurons);
  }
  sizes.push_back(kGenreCount);
  const size_t n_layers = sizes.size() - 1;

  Rng rng(spec.seed);
  for (size_t l = 0; l < n_layers; ++l) {
    const int fan_in = sizes[l], fan_out = sizes[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    Matrix w(fan_in, fan_out);
    for (long i = 0; i < w.rows(); ++i) {
      for (long j = 0; j < w.cols(); ++j) {
        w(i, j) = rng.uniform(-bound, bound);
      }
    }
    Vector b(fan_out);
    for (long j = 0; j < b.size(); ++j) b[j] = rng.uniform(-bound, bound);
    model->weights.push_back(std::move(w));
    model->biases.push_back(std::move(b));
  }

  const size_t n = train.size();
  const size_t batch_size = std::min<size_t>(200, n);

  // Adam state per layer
  std::vector<Matrix> mw(n_layers), vw(n_layers);
  std::vector<Vector> mb(n_layers), vb(n_layers);
  for (size_t l = 0; l < n_layers; ++l) {
    mw[l] = Matrix::Zero(sizes[l], sizes[l + 1]);
    vw[l] = Matrix::Zero(sizes[l], sizes[l + 1]);
    mb[l] = Vector::Zero(sizes[l + 1]);
    vb[l] = Vector::Zero(sizes[l + 1]);
  }
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int64_t t = 0;

  double lr = spec.mlp_learning_rate;
  double best_loss = std::numeric_limits<double>::infinity();
  int no_improve = 0;
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;

  std::vector<Matrix> acts(n_layers + 1);  // per-batch activations
  for (int epoch = 0; epoch < spec.mlp_max_iterations; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;

    for (size_t start = 0; start < n; start += batch_size) {
      const size_t bs = std::min(batch_size, n - start);
      acts[0].resize(static_cast<long>(bs), sizes[0]);
      for (size_t i = 0; i < bs; ++i) {
        const FeatureVector& x = train.x[order[start + i]];
        acts[0].row(static_cast<long>(i)) =
            Eigen::Map<const Vector>(x.data(), sizes[0]).transpose();
      }

      for (size_t l = 0; l < n_layers; ++l) {
        acts[l + 1].noalias() = acts[l] * model->weights[l];
        acts[l + 1].rowwise() += model->biases[l].transpose();
        if (l + 1 < n_layers) acts[l + 1] = acts[l + 1].cwiseMax(0.0);
      }

      // softmax + cross-entropy gradient on logits
      Matrix grad = acts[n_layers];
      double batch_loss = 0.0;
      for (size_t i = 0; i < bs; ++i) {
        auto row = grad.row(static_cast<long>(i));
        const double m = row.maxCoeff();
        Eigen::RowVector2d e = (row.array() - m).exp();
        const double z = e.sum();
        e /= z;
        const int truth = static_cast<int>(train.y[order[start + i]]);
        batch_loss -= std::log(std::max(e[truth], 1e-300));
        row = e;
        row[truth] -= 1.0;
      }
      batch_loss /= static_cast<double>(bs);
      grad /= static_cast<double>(bs);
      epoch_loss += batch_loss * static_cast<double>(bs);

      // backprop
      ++t;
      const double corr1 = 1.0 - std::pow(beta1, static_cast<double>(t));
      const double corr2 = 1.0 - std::pow(beta2, static_cast<double>(t));
      for (size_t l = n_layers; l-- > 0;) {
        Matrix gw = acts[l].transpose() * grad;
        Vector gb = grad.colwise().sum().transpose();
        if (l > 0) {
          Matrix gin = grad * model->weights[l].transpose();
          grad = gin.cwiseProduct(
              (acts[l].array() > 0.0).cast<double>().matrix());
        }
        mw[l] = beta1 * mw[l] + (1.0 - beta1) * gw;
        vw[l] = beta2 * vw[l] + (1.0 - beta2) * gw.cwiseProduct(gw);
        mb[l] = beta1 * mb[l] + (1.0 - beta1) * gb;
        vb[l] = beta2 * vb[l] + (1.0 - beta2) * gb.cwiseProduct(gb);
        model->weights[l] -=
            (lr / corr1) *
            mw[l].cwiseQuotient(((vw[l] / corr2).cwiseSqrt().array() + eps)
                                    .matrix());
        model->biases[l] -=
            (lr / corr1) *
            mb[l].cwiseQuotient(((vb[l] / corr2).cwiseSqrt().array() + eps)
                                    .matrix());
      }
    }

    epoch_loss /= static_cast<double>(n);
    require(std::isfinite(epoch_loss), errc::non_finite_loss,
            "training loss diverged at epoch " + std::to_string(epoch));
    model->loss_curve.push_back(epoch_loss);

    // adaptive schedule: /5 after 2 epochs without improvement
    if (epoch_loss < best_loss - 1e-4) {
      no_improve = 0;
    } else {
      ++no_improve;
    }
    best_loss = std::min(best_loss, epoch_loss);
    if (no_improve >= 2) {
      lr /= 5.0;
      no_improve = 0;
      if (lr < 1e-6) break;
    }
  }
  return model;
}

std::unique_ptr<Classifier> load_mlp(const Archive& archive) {
  int n_features = 0;
  ClassifierSpec spec = detail::spec_from_meta(archive.meta, n_features);
  auto model = std::make_unique<Mlp>(spec, n_features);
  const size_t n_layers = static_cast<size_t>(spec.mlp_hidden_layers) + 1;
  for (size_t l = 0; l < n_layers; ++l) {
    const Tensor& w = archive.get("w" + std::to_string(l));
    const Tensor& b = archive.get("b" + std::to_string(l));
    require(w.rank() == 2 && b.rank() == 1 && w.dim(1) == b.dim(0),
            errc::corrupt_checkpoint, "bad layer shapes");
    Matrix wm(w.dim(0), w.dim(1));
    Eigen::Map<const Matrix> wmap(w.data(), w.dim(0), w.dim(1));
    wm = wmap;
    Vector bv = Eigen::Map<const Vector>(b.data(), b.dim(0));
    model->weights.push_back(std::move(wm));
    model->biases.push_back(std::move(bv));
  }
  require(model->weights.front().rows() == n_features,
          errc::corrupt_checkpoint, "feature width mismatch");
  if (archive.has("loss_curve")) {
    const Tensor& c = archive.get("loss_curve");
    model->loss_curve.assign(c.data(), c.data() + c.size());
  }
  return model;
}

}  // namespace midistyle

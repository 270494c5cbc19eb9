#include <algorithm>
#include <cmath>

#include "midistyle/classify.hpp"
#include "midistyle/detail/classify_io.hpp"

namespace midistyle {

namespace {

struct TreeNode {
  int feature = -1;        // -1 marks a leaf
  double threshold = 0.0;  // goes left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  int leaf_label = 0;      // GenreLabel as int, valid when feature == -1
};

struct Tree {
  std::vector<TreeNode> nodes;

  GenreLabel predict(const FeatureVector& f) const {
    int at = 0;
    while (nodes[static_cast<size_t>(at)].feature >= 0) {
      const TreeNode& n = nodes[static_cast<size_t>(at)];
      at = f[static_cast<size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return static_cast<GenreLabel>(nodes[static_cast<size_t>(at)].leaf_label);
  }
};

double gini(double c0, double c1) {
  const double n = c0 + c1;
  if (n <= 0.0) return 0.0;
  const double p0 = c0 / n, p1 = c1 / n;
  return 1.0 - p0 * p0 - p1 * p1;
}

struct BestSplit {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const LabeledFeatures& data, uint64_t forest_seed,
              int tree_index, int max_depth, int mtry)
      : data_(data),
        forest_seed_(forest_seed),
        tree_index_(tree_index),
        max_depth_(max_depth),
        mtry_(mtry) {}

  Tree build() {
    // bootstrap sample, drawn with a per-tree stream
    Rng boot(combine_seeds(forest_seed_,
                           0x426f6f74ULL + static_cast<uint64_t>(tree_index_)));
    const size_t n = data_.size();
    std::vector<size_t> samples(n);
    for (size_t& s : samples) {
      s = static_cast<size_t>(boot.uniform_int(n));
    }
    Tree tree;
    grow(tree, std::move(samples), 0, 1);
    return tree;
  }

 private:
  // Candidate-feature draws are keyed by (seed, tree, node path), never by
  // call order, so a depth-d tree is the exact truncation of the depth-d+1
  // tree from the same seed. Path code: root 1, then 2p / 2p+1.
  Rng node_rng(uint64_t path) const {
    return Rng(combine_seeds(
        combine_seeds(forest_seed_, static_cast<uint64_t>(tree_index_)),
        path));
  }

  int grow(Tree& tree, std::vector<size_t> samples, int depth, uint64_t path) {
    double c0 = 0.0, c1 = 0.0;
    for (size_t s : samples) {
      (data_.y[s] == GenreLabel::Classic ? c0 : c1) += 1.0;
    }

    const int index = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(TreeNode{});
    // ties go to Classic, the lexicographically first label
    tree.nodes[static_cast<size_t>(index)].leaf_label =
        c1 > c0 ? static_cast<int>(GenreLabel::Jazz)
                : static_cast<int>(GenreLabel::Classic);

    if (depth >= max_depth_ || samples.size() < 2 || c0 == 0.0 || c1 == 0.0) {
      return index;
    }

    Rng rng = node_rng(path);
    const int n_features = static_cast<int>(data_.x.front().size());
    const std::vector<size_t> candidates = rng.sample_without_replacement(
        static_cast<size_t>(n_features), static_cast<size_t>(mtry_));

    BestSplit best = find_split(samples, candidates, c0, c1);
    if (best.feature < 0 || best.gain <= 1e-12) return index;

    std::vector<size_t> left, right;
    for (size_t s : samples) {
      (data_.x[s][static_cast<size_t>(best.feature)] <= best.threshold ? left
                                                                       : right)
          .push_back(s);
    }
    samples.clear();
    samples.shrink_to_fit();

    tree.nodes[static_cast<size_t>(index)].feature = best.feature;
    tree.nodes[static_cast<size_t>(index)].threshold = best.threshold;
    const int l = grow(tree, std::move(left), depth + 1, path * 2);
    tree.nodes[static_cast<size_t>(index)].left = l;
    const int r = grow(tree, std::move(right), depth + 1, path * 2 + 1);
    tree.nodes[static_cast<size_t>(index)].right = r;
    return index;
  }

  BestSplit find_split(const std::vector<size_t>& samples,
                       const std::vector<size_t>& candidates, double c0,
                       double c1) const {
    const double n = static_cast<double>(samples.size());
    const double parent = gini(c0, c1);
    BestSplit best;

    std::vector<std::pair<double, int>> column;  // (value, is_jazz)
    for (size_t f : candidates) {
      // fast path for 0/1 columns (the usual case on binary rolls)
      bool binary = true;
      double on0 = 0.0, on1 = 0.0, on_total = 0.0;
      for (size_t s : samples) {
        const double v = data_.x[s][f];
        if (v != 0.0 && v != 1.0) {
          binary = false;
          break;
        }
        if (v == 1.0) {
          on_total += 1.0;
          (data_.y[s] == GenreLabel::Classic ? on0 : on1) += 1.0;
        }
      }
      if (binary) {
        if (on_total == 0.0 || on_total == n) continue;  // constant column
        const double off0 = c0 - on0, off1 = c1 - on1;
        const double off_total = n - on_total;
        const double gain = parent - (off_total * gini(off0, off1) +
                                      on_total * gini(on0, on1)) /
                                         n;
        consider(best, gain, static_cast<int>(f), 0.5);
        continue;
      }

      column.clear();
      column.reserve(samples.size());
      for (size_t s : samples) {
        column.emplace_back(data_.x[s][f],
                            data_.y[s] == GenreLabel::Jazz ? 1 : 0);
      }
      std::sort(column.begin(), column.end());
      double l0 = 0.0, l1 = 0.0;
      for (size_t i = 0; i + 1 < column.size(); ++i) {
        (column[i].second ? l1 : l0) += 1.0;
        if (column[i].first == column[i + 1].first) continue;
        const double nl = l0 + l1, nr = n - nl;
        const double gain =
            parent - (nl * gini(l0, l1) + nr * gini(c0 - l0, c1 - l1)) / n;
        consider(best, gain, static_cast<int>(f),
                 0.5 * (column[i].first + column[i + 1].first));
      }
    }
    return best;
  }

  static void consider(BestSplit& best, double gain, int feature,
                       double threshold) {
    // deterministic preference: larger gain, then smaller feature index,
    // then smaller threshold
    if (gain > best.gain ||
        (gain == best.gain &&
         (feature < best.feature ||
          (feature == best.feature && threshold < best.threshold)))) {
      best = BestSplit{gain, feature, threshold};
    }
  }

  const LabeledFeatures& data_;
  uint64_t forest_seed_;
  int tree_index_;
  int max_depth_;
  int mtry_;
};

class Forest : public Classifier {
 public:
  Forest(ClassifierSpec spec, int n_features)
      : Classifier(std::move(spec), n_features) {}

  std::vector<Tree> trees;

  PredictResult predict_scored(const FeatureVector& f) const override {
    check_features(f);
    std::array<double, kGenreCount> votes{};
    for (const Tree& t : trees) {
      votes[static_cast<size_t>(t.predict(f))] += 1.0;
    }
    return pick(votes);
  }

  void save(Archive& archive) const override {
    archive.meta = detail::classifier_meta(spec_, n_features_);
    for (size_t i = 0; i < trees.size(); ++i) {
      const Tree& tree = trees[i];
      Tensor t({static_cast<int64_t>(tree.nodes.size()), 5});
      for (size_t j = 0; j < tree.nodes.size(); ++j) {
        const TreeNode& n = tree.nodes[j];
        t[static_cast<int64_t>(j) * 5 + 0] = n.feature;
        t[static_cast<int64_t>(j) * 5 + 1] = n.threshold;
        t[static_cast<int64_t>(j) * 5 + 2] = n.left;
        t[static_cast<int64_t>(j) * 5 + 3] = n.right;
        t[static_cast<int64_t>(j) * 5 + 4] = n.leaf_label;
      }
      char name[16];
      std::snprintf(name, sizeof name, "tree%05zu", i);
      archive.add(name, std::move(t));
    }
  }
};

}  // namespace

std::unique_ptr<Classifier> fit_forest(const ClassifierSpec& spec,
                                       const LabeledFeatures& train) {
  const int n_features =
      static_cast<int>(train.x.empty() ? 0 : train.x.front().size());
  require(n_features > 0, errc::layout_mismatch, "no features");
  const int mtry = std::max(
      1, static_cast<int>(std::sqrt(static_cast<double>(n_features))));
  auto model = std::make_unique<Forest>(spec, n_features);
  model->trees.reserve(static_cast<size_t>(spec.rf_n_trees));
  for (int i = 0; i < spec.rf_n_trees; ++i) {
    TreeBuilder builder(train, spec.seed, i, spec.rf_max_depth, mtry);
    model->trees.push_back(builder.build());
  }
  return model;
}

std::unique_ptr<Classifier> load_forest(const Archive& archive) {
  int n_features = 0;
  ClassifierSpec spec = detail::spec_from_meta(archive.meta, n_features);
  auto model = std::make_unique<Forest>(spec, n_features);
  for (int i = 0; i < spec.rf_n_trees; ++i) {
    char name[16];
    std::snprintf(name, sizeof name, "tree%05d", i);
    const Tensor& t = archive.get(name);
    require(t.rank() == 2 && t.dim(1) == 5, errc::corrupt_checkpoint,
            "bad tree shape");
    Tree tree;
    tree.nodes.resize(static_cast<size_t>(t.dim(0)));
    for (int64_t j = 0; j < t.dim(0); ++j) {
      TreeNode& n = tree.nodes[static_cast<size_t>(j)];
      n.feature = static_cast<int>(t[j * 5 + 0]);
      n.threshold = t[j * 5 + 1];
      n.left = static_cast<int>(t[j * 5 + 2]);
      n.right = static_cast<int>(t[j * 5 + 3]);
      n.leaf_label = static_cast<int>(t[j * 5 + 4]);
    }
    model->trees.push_back(std::move(tree));
  }
  return model;
}

std::vector<GenreLabel> forest_tree_votes(const Classifier& forest,
                                          const FeatureVector& features) {
  const auto* model = dynamic_cast<const Forest*>(&forest);
  require(model != nullptr, errc::invalid_argument,
          "per-tree votes require a random forest");
  std::vector<GenreLabel> votes;
  votes.reserve(model->trees.size());
  for (const Tree& t : model->trees) {
    votes.push_back(t.predict(features));
  }
  return votes;
}

RfCurve tune_rf(const LabeledFeatures& train, const LabeledFeatures& test,
                const ClassifierSpec& base, int depth_min, int depth_max) {
  require(depth_min >= 1 && depth_min <= depth_max, errc::invalid_hyperparam,
          "bad depth range");
  require(test.size() > 0, errc::empty_test_set, "test set is empty");

  RfCurve curve;
  curve.best_depth = depth_min;
  curve.best_test_accuracy = -1.0;
  for (int depth = depth_min; depth <= depth_max; ++depth) {
    ClassifierSpec spec = base;
    spec.kind = ClassifierSpec::Kind::RandomForest;
    spec.rf_max_depth = depth;
    spec.validate();
    std::unique_ptr<Classifier> model = fit(spec, train);
    const double train_acc = evaluate(*model, train).overall;
    const double test_acc = evaluate(*model, test).overall;
    curve.points.push_back({depth, train_acc, test_acc});
    if (test_acc > curve.best_test_accuracy) {
      curve.best_test_accuracy = test_acc;
      curve.best_depth = depth;
    }
  }
  return curve;
}

}  // namespace midistyle

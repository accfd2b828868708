#include "uxpr/classify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "uxpr/error.hpp"
#include "uxpr/parallel.hpp"
#include "uxpr/rng.hpp"

namespace uxpr {

void Dataset::validate() const {
  if (class_count < 1) throw std::invalid_argument("class_count must be positive");
  for (const auto& inst : instances) {
    if (inst.label < 0 || inst.label >= class_count) {
      throw std::invalid_argument("class id " + std::to_string(inst.label) + " outside [0, " +
                                  std::to_string(class_count) + ")");
    }
  }
}

Dataset make_dataset(std::span<const SegmentRecord> records, int class_count) {
  Dataset d;
  d.class_count = class_count;
  d.instances.reserve(records.size());
  for (const auto& r : records) {
    if (!r.label) throw std::invalid_argument("segment " + std::to_string(r.id) + " has no class label");
    d.instances.push_back({r.hist, *r.label, r.bag, r.id});
  }
  d.validate();
  return d;
}

Prediction Prediction::from_weights(std::vector<double> weights) {
  if (weights.empty()) throw std::invalid_argument("prediction needs at least one class");
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(sum > 0.0)) throw std::invalid_argument("class weights sum to zero");
  Prediction p;
  p.probs = std::move(weights);
  for (double& x : p.probs) x /= sum;
  p.predicted = static_cast<int>(std::max_element(p.probs.begin(), p.probs.end()) - p.probs.begin());
  return p;
}

namespace {

double squared_distance(const Histogram& a, const Histogram& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < 256; ++i) {
    const double x = static_cast<double>(a.bins[i]) - static_cast<double>(b.bins[i]);
    d += x * x;
  }
  return d;
}

nlohmann::json hist_json(const Histogram& h) { return h.bins; }

Histogram hist_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<std::uint32_t>>();
  if (v.size() != 256) throw std::invalid_argument("histogram must have 256 bins");
  Histogram h;
  std::copy(v.begin(), v.end(), h.bins.begin());
  return h;
}

}  // namespace

Prediction knn_predict(const Dataset& train, const Histogram& query) {
  if (train.instances.empty()) throw std::invalid_argument("1-NN needs a non-empty training set");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < train.instances.size(); ++i) {
    const double d = squared_distance(train.instances[i].hist, query);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  std::vector<double> w(static_cast<std::size_t>(train.class_count), 0.0);
  w[static_cast<std::size_t>(train.instances[best].label)] = 1.0;
  return Prediction::from_weights(std::move(w));
}

NearestNeighbor::NearestNeighbor(Dataset train) : train_(std::move(train)) {
  train_.validate();
  if (train_.instances.empty()) throw std::invalid_argument("1-NN needs a non-empty training set");
}

nlohmann::json NearestNeighbor::to_json() const {
  nlohmann::json inst = nlohmann::json::array();
  for (const auto& i : train_.instances) inst.push_back({{"label", i.label}, {"hist", hist_json(i.hist)}});
  return {{"type", "knn"}, {"class_count", train_.class_count}, {"instances", inst}};
}

// --- forest -----------------------------------------------------------------

void ForestParams::validate() const {
  if (tree_count == 0 || features_per_split == 0 || min_leaf == 0) {
    throw std::invalid_argument("forest parameters must be positive");
  }
  if (features_per_split > 256) throw std::invalid_argument("features_per_split exceeds 256 bins");
}

int DecisionTree::vote(const Histogram& h) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const TreeNode& n = nodes[i];
    i = static_cast<std::size_t>(static_cast<double>(h.bins[static_cast<std::size_t>(n.feature)]) <= n.threshold
                                     ? n.left
                                     : n.right);
  }
  return nodes[i].leaf_class;
}

ForestModel::ForestModel(int class_count, std::vector<DecisionTree> trees)
    : class_count_(class_count), trees_(std::move(trees)) {
  if (trees_.empty()) throw std::invalid_argument("forest needs at least one tree");
}

Prediction ForestModel::predict(const Histogram& query) const {
  std::vector<double> votes(static_cast<std::size_t>(class_count_), 0.0);
  for (const auto& t : trees_) votes[static_cast<std::size_t>(t.vote(query))] += 1.0;
  return Prediction::from_weights(std::move(votes));
}

nlohmann::json ForestModel::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) {
    std::vector<int> feature;
    std::vector<double> threshold;
    std::vector<int> left;
    std::vector<int> right;
    std::vector<int> leaf;
    for (const auto& n : t.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      leaf.push_back(n.leaf_class);
    }
    trees.push_back(
        {{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"leaf", leaf}});
  }
  return {{"type", "forest"}, {"class_count", class_count_}, {"trees", trees}};
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, const std::vector<std::uint32_t>& canonical, const ForestParams& p, Rng rng)
      : data_(data), canonical_(canonical), p_(p), rng_(std::move(rng)) {}

  DecisionTree build(std::vector<std::uint32_t> sample) {
    grow(std::move(sample), 0);
    return std::move(tree_);
  }

 private:
  const Histogram& hist(std::uint32_t s) const { return data_.instances[canonical_[s]].hist; }
  int label(std::uint32_t s) const { return data_.instances[canonical_[s]].label; }

  int majority(const std::vector<std::size_t>& counts) const {
    return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  }

  int grow(std::vector<std::uint32_t> sample, std::size_t depth) {
    const int node = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    std::vector<std::size_t> counts(static_cast<std::size_t>(data_.class_count), 0);
    for (auto s : sample) ++counts[static_cast<std::size_t>(label(s))];
    const int leaf_class = majority(counts);
    tree_.nodes[static_cast<std::size_t>(node)].leaf_class = leaf_class;

    const bool pure = counts[static_cast<std::size_t>(leaf_class)] == sample.size();
    const bool depth_capped = p_.max_depth != 0 && depth >= p_.max_depth;
    if (pure || depth_capped || sample.size() < 2 * p_.min_leaf) return node;

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_score = -1.0;
    find_split(sample, counts, best_feature, best_threshold, best_score);
    if (best_feature < 0) return node;

    std::vector<std::uint32_t> left;
    std::vector<std::uint32_t> right;
    for (auto s : sample) {
      (static_cast<double>(hist(s).bins[static_cast<std::size_t>(best_feature)]) <= best_threshold ? left : right)
          .push_back(s);
    }
    sample.clear();
    sample.shrink_to_fit();
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    TreeNode& n = tree_.nodes[static_cast<std::size_t>(node)];
    n.feature = best_feature;
    n.threshold = best_threshold;
    n.left = l;
    n.right = r;
    return node;
  }

  // Draws features without replacement until features_per_split non-constant
  // ones have been scored or all 256 are exhausted.
  void find_split(const std::vector<std::uint32_t>& sample, const std::vector<std::size_t>& counts, int& best_feature,
                  double& best_threshold, double& best_score) {
    std::array<int, 256> features;
    std::iota(features.begin(), features.end(), 0);
    const std::size_t n = sample.size();
    const std::size_t classes = counts.size();
    std::size_t scored = 0;
    std::vector<std::pair<std::uint32_t, int>> column(n);
    std::vector<std::size_t> left_counts(classes);
    for (std::size_t k = 0; k < 256 && scored < p_.features_per_split; ++k) {
      const std::size_t pick = k + static_cast<std::size_t>(rng_.below(256 - k));
      std::swap(features[k], features[pick]);
      const auto f = static_cast<std::size_t>(features[k]);

      std::uint32_t lo = std::numeric_limits<std::uint32_t>::max();
      std::uint32_t hi = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t v = hist(sample[i]).bins[f];
        column[i] = {v, label(sample[i])};
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (lo == hi) continue;
      ++scored;
      std::sort(column.begin(), column.end());
      std::fill(left_counts.begin(), left_counts.end(), 0);
      for (std::size_t i = 0; i + 1 < n; ++i) {
        ++left_counts[static_cast<std::size_t>(column[i].second)];
        if (column[i].first == column[i + 1].first) continue;
        const std::size_t nl = i + 1;
        const std::size_t nr = n - nl;
        if (nl < p_.min_leaf || nr < p_.min_leaf) continue;
        double sl = 0.0;
        double sr = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
          const double cl = static_cast<double>(left_counts[c]);
          const double cr = static_cast<double>(counts[c] - left_counts[c]);
          sl += cl * cl;
          sr += cr * cr;
        }
        // Maximizing this minimizes the size-weighted Gini impurity.
        const double score = sl / static_cast<double>(nl) + sr / static_cast<double>(nr);
        if (score > best_score) {
          best_score = score;
          best_feature = static_cast<int>(f);
          best_threshold = 0.5 * (static_cast<double>(column[i].first) + static_cast<double>(column[i + 1].first));
        }
      }
    }
  }

  const Dataset& data_;
  const std::vector<std::uint32_t>& canonical_;
  const ForestParams& p_;
  Rng rng_;
  DecisionTree tree_;
};

}  // namespace

ForestModel forest_train(const Dataset& train, const ForestParams& p) {
  p.validate();
  train.validate();
  if (train.instances.empty()) throw std::invalid_argument("forest needs a non-empty training set");

  std::vector<std::size_t> present(static_cast<std::size_t>(train.class_count), 0);
  for (const auto& i : train.instances) ++present[static_cast<std::size_t>(i.label)];
  const auto nonzero = std::count_if(present.begin(), present.end(), [](std::size_t c) { return c > 0; });
  if (nonzero < 2) {
    warn("forest trained on a single class; predicting it with probability 1");
    DecisionTree t;
    t.nodes.push_back(TreeNode{-1, 0.0, -1, -1, train.instances.front().label});
    return ForestModel(train.class_count, {std::move(t)});
  }

  std::vector<std::uint32_t> canonical(train.instances.size());
  std::iota(canonical.begin(), canonical.end(), 0u);
  std::sort(canonical.begin(), canonical.end(), [&](std::uint32_t a, std::uint32_t b) {
    const auto& ia = train.instances[a];
    const auto& ib = train.instances[b];
    if (ia.hist.bins != ib.hist.bins) return ia.hist.bins < ib.hist.bins;
    return ia.label < ib.label;
  });

  const std::size_t n = canonical.size();
  std::vector<DecisionTree> trees(p.tree_count);
  parallel_for(p.tree_count, p.jobs, [&](std::size_t t) {
    Rng rng(p.seed, t + 1);
    std::vector<std::uint32_t> sample(n);
    for (auto& s : sample) s = static_cast<std::uint32_t>(rng.below(n));
    trees[t] = TreeBuilder(train, canonical, p, std::move(rng)).build(std::move(sample));
  });
  return ForestModel(train.class_count, std::move(trees));
}

Prediction forest_predict(const ForestModel& m, const Histogram& query) { return m.predict(query); }

// --- ensemble ---------------------------------------------------------------

Prediction ensemble_predict(std::span<const EnsembleMember> members, const Histogram& query) {
  if (members.empty()) throw std::invalid_argument("ensemble has no members");
  double total_weight = 0.0;
  for (const auto& m : members) {
    if (m.weight < 0.0) throw std::invalid_argument("ensemble weights must be non-negative");
    total_weight += m.weight;
  }
  if (!(total_weight > 0.0)) throw std::invalid_argument("ensemble weights are all zero");
  std::vector<double> acc;
  for (const auto& m : members) {
    const Prediction p = m.model->predict(query);
    if (acc.empty()) acc.assign(p.probs.size(), 0.0);
    if (p.probs.size() != acc.size()) throw std::invalid_argument("ensemble members disagree on class count");
    for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += m.weight * p.probs[c];
  }
  return Prediction::from_weights(std::move(acc));
}

EnsembleModel::EnsembleModel(std::vector<EnsembleMember> members) : members_(std::move(members)) {
  if (members_.empty()) throw std::invalid_argument("ensemble has no members");
  double total = 0.0;
  for (const auto& m : members_) {
    if (!m.model || m.weight < 0.0) throw std::invalid_argument("invalid ensemble member");
    total += m.weight;
  }
  if (!(total > 0.0)) throw std::invalid_argument("ensemble weights are all zero");
}

int EnsembleModel::class_count() const { return members_.front().model->class_count(); }

nlohmann::json EnsembleModel::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : members_) arr.push_back({{"weight", m.weight}, {"model", m.model->to_json()}});
  return {{"type", "ensemble"}, {"class_count", class_count()}, {"members", arr}};
}

double cross_validated_accuracy(const Dataset& data, const Trainer& trainer, std::size_t folds, std::uint64_t seed) {
  const std::size_t n = data.instances.size();
  if (n < 2) return 0.0;
  folds = std::clamp<std::size_t>(folds, 2, n);

  std::vector<std::size_t> fold_of(n);
  std::size_t cursor = 0;
  for (int c = 0; c < data.class_count; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i) {
      if (data.instances[i].label == c) members.push_back(i);
    }
    Rng rng(seed, static_cast<std::uint64_t>(c));
    for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[rng.below(i)]);
    for (std::size_t idx : members) fold_of[idx] = cursor++ % folds;
  }

  std::size_t correct = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    Dataset train;
    train.class_count = data.class_count;
    std::vector<std::size_t> test;
    for (std::size_t i = 0; i < n; ++i) {
      if (fold_of[i] == f) {
        test.push_back(i);
      } else {
        train.instances.push_back(data.instances[i]);
      }
    }
    if (test.empty() || train.instances.empty()) continue;
    const auto model = trainer(train);
    for (std::size_t i : test) {
      if (model->predict(data.instances[i].hist).predicted == data.instances[i].label) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

// --- configuration and persistence -------------------------------------------

nlohmann::json ClassifierSpec::to_json() const {
  return {{"kind", kind},
          {"tree_count", forest.tree_count},
          {"features_per_split", forest.features_per_split},
          {"max_depth", forest.max_depth},
          {"min_leaf", forest.min_leaf},
          {"forest_seed", forest.seed},
          {"cv_folds", cv_folds},
          {"cv_seed", cv_seed}};
}

Trainer make_trainer(const ClassifierSpec& spec) {
  if (spec.kind == "knn") {
    return [](const Dataset& d) -> std::unique_ptr<Classifier> { return std::make_unique<NearestNeighbor>(d); };
  }
  if (spec.kind == "forest") {
    const ForestParams params = spec.forest;
    return [params](const Dataset& d) -> std::unique_ptr<Classifier> {
      return std::make_unique<ForestModel>(forest_train(d, params));
    };
  }
  if (spec.kind == "ensemble") {
    ClassifierSpec knn_spec = spec;
    knn_spec.kind = "knn";
    ClassifierSpec forest_spec = spec;
    forest_spec.kind = "forest";
    const std::vector<Trainer> parts{make_trainer(knn_spec), make_trainer(forest_spec)};
    const std::size_t folds = spec.cv_folds;
    const std::uint64_t cv_seed = spec.cv_seed;
    return [parts, folds, cv_seed](const Dataset& d) -> std::unique_ptr<Classifier> {
      std::vector<EnsembleMember> members;
      double total = 0.0;
      for (const auto& part : parts) {
        const double w = cross_validated_accuracy(d, part, folds, cv_seed);
        total += w;
        members.push_back({std::shared_ptr<const Classifier>(part(d)), w});
      }
      if (!(total > 0.0)) {
        warn("every ensemble member scored zero in cross-validation; using equal weights");
        for (auto& m : members) m.weight = 1.0;
      }
      return std::make_unique<EnsembleModel>(std::move(members));
    };
  }
  throw std::invalid_argument("unknown classifier '" + spec.kind + "'");
}

nlohmann::json save_model(const Classifier& model) {
  nlohmann::json doc = model.to_json();
  doc["format_version"] = kModelFormatVersion;
  return doc;
}

std::unique_ptr<Classifier> load_model(const nlohmann::json& doc) {
  if (doc.contains("format_version") && doc["format_version"].get<int>() != kModelFormatVersion) {
    throw std::invalid_argument("unsupported model format version");
  }
  const std::string type = doc.at("type").get<std::string>();
  const int classes = doc.at("class_count").get<int>();
  if (type == "knn") {
    Dataset d;
    d.class_count = classes;
    for (const auto& i : doc.at("instances")) {
      d.instances.push_back({hist_from_json(i.at("hist")), i.at("label").get<int>(), {}, d.instances.size()});
    }
    return std::make_unique<NearestNeighbor>(std::move(d));
  }
  if (type == "forest") {
    std::vector<DecisionTree> trees;
    for (const auto& t : doc.at("trees")) {
      const auto feature = t.at("feature").get<std::vector<int>>();
      const auto threshold = t.at("threshold").get<std::vector<double>>();
      const auto left = t.at("left").get<std::vector<int>>();
      const auto right = t.at("right").get<std::vector<int>>();
      const auto leaf = t.at("leaf").get<std::vector<int>>();
      const std::size_t n = feature.size();
      if (threshold.size() != n || left.size() != n || right.size() != n || leaf.size() != n || n == 0) {
        throw std::invalid_argument("inconsistent tree arrays");
      }
      DecisionTree tree;
      for (std::size_t i = 0; i < n; ++i) {
        if (feature[i] >= 256 || leaf[i] < 0 || leaf[i] >= classes) throw std::invalid_argument("bad tree node");
        if (feature[i] >= 0 && (left[i] <= static_cast<int>(i) || right[i] <= static_cast<int>(i) ||
                                left[i] >= static_cast<int>(n) || right[i] >= static_cast<int>(n))) {
          throw std::invalid_argument("bad tree child index");
        }
        tree.nodes.push_back({feature[i], threshold[i], left[i], right[i], leaf[i]});
      }
      trees.push_back(std::move(tree));
    }
    return std::make_unique<ForestModel>(classes, std::move(trees));
  }
  if (type == "ensemble") {
    std::vector<EnsembleMember> members;
    for (const auto& m : doc.at("members")) {
      members.push_back({std::shared_ptr<const Classifier>(load_model(m.at("model"))), m.at("weight").get<double>()});
    }
    return std::make_unique<EnsembleModel>(std::move(members));
  }
  throw std::invalid_argument("unknown model type '" + type + "'");
}

}  // namespace uxpr

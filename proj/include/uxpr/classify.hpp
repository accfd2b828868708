#pragma once

// Histogram classifiers: 1-NN, a bagged Gini forest and a probability-weighted
// ensemble. Every classifier maps a 256-bin histogram to class probabilities.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "uxpr/extract.hpp"

namespace uxpr {

struct Instance {
  Histogram hist;
  int label = 0;
  std::string bag;
  std::size_t segment = 0;
};

struct Dataset {
  std::vector<Instance> instances;
  int class_count = 2;

  /// Throws std::invalid_argument on out-of-range labels.
  void validate() const;
};

Dataset make_dataset(std::span<const SegmentRecord> records, int class_count);

struct Prediction {
  std::vector<double> probs;
  int predicted = 0;

  /// Normalizes `weights` and takes the argmax (lowest class id on ties).
  static Prediction from_weights(std::vector<double> weights);
};

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual Prediction predict(const Histogram& query) const = 0;
  virtual int class_count() const = 0;
  virtual std::string kind() const = 0;
  /// True when probabilities are always 0/1 (no ranking information).
  virtual bool degenerate_probabilities() const { return false; }
  virtual nlohmann::json to_json() const = 0;
};

using Trainer = std::function<std::unique_ptr<Classifier>(const Dataset&)>;

// --- 1-NN ---------------------------------------------------------------

/// Euclidean distance on raw bin counts; ties go to the earlier instance.
Prediction knn_predict(const Dataset& train, const Histogram& query);

class NearestNeighbor final : public Classifier {
 public:
  explicit NearestNeighbor(Dataset train);
  Prediction predict(const Histogram& query) const override { return knn_predict(train_, query); }
  int class_count() const override { return train_.class_count; }
  std::string kind() const override { return "knn"; }
  bool degenerate_probabilities() const override { return true; }
  nlohmann::json to_json() const override;

 private:
  Dataset train_;
};

// --- forest -------------------------------------------------------------

struct ForestParams {
  std::size_t tree_count = 500;
  std::size_t features_per_split = 16;
  std::size_t max_depth = 0;  // 0 = unlimited
  std::size_t min_leaf = 1;
  std::uint64_t seed = 0;
  int jobs = 1;

  void validate() const;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int leaf_class = 0;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;
  int vote(const Histogram& h) const;
};

class ForestModel final : public Classifier {
 public:
  ForestModel(int class_count, std::vector<DecisionTree> trees);

  Prediction predict(const Histogram& query) const override;
  int class_count() const override { return class_count_; }
  std::string kind() const override { return "forest"; }
  nlohmann::json to_json() const override;
  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }

 private:
  int class_count_;
  std::vector<DecisionTree> trees_;
};

/// Bootstrap-aggregated Gini trees. Instances are put in a canonical order
/// first, so the model depends only on the multiset of training instances.
ForestModel forest_train(const Dataset& train, const ForestParams& p);
Prediction forest_predict(const ForestModel& m, const Histogram& query);

// --- ensemble -----------------------------------------------------------

struct EnsembleMember {
  std::shared_ptr<const Classifier> model;
  double weight = 0.0;
};

/// probs proportional to sum(weight_i * probs_i).
Prediction ensemble_predict(std::span<const EnsembleMember> members, const Histogram& query);

class EnsembleModel final : public Classifier {
 public:
  explicit EnsembleModel(std::vector<EnsembleMember> members);
  Prediction predict(const Histogram& query) const override { return ensemble_predict(members_, query); }
  int class_count() const override;
  std::string kind() const override { return "ensemble"; }
  nlohmann::json to_json() const override;
  const std::vector<EnsembleMember>& members() const noexcept { return members_; }

 private:
  std::vector<EnsembleMember> members_;
};

/// Stratified k-fold accuracy of `trainer` on `data`; folds drawn from `seed`.
double cross_validated_accuracy(const Dataset& data, const Trainer& trainer, std::size_t folds, std::uint64_t seed);

// --- configuration and persistence -----------------------------------------

struct ClassifierSpec {
  std::string kind = "forest";  // knn | forest | ensemble
  ForestParams forest;
  std::size_t cv_folds = 10;
  std::uint64_t cv_seed = 0;

  nlohmann::json to_json() const;
};

Trainer make_trainer(const ClassifierSpec& spec);

inline constexpr int kModelFormatVersion = 1;
nlohmann::json save_model(const Classifier& model);
std::unique_ptr<Classifier> load_model(const nlohmann::json& doc);

}  // namespace uxpr

#pragma once

// Evaluation protocols (leave-one-bag-out, leave-one-device-class-out, 2-D
// projection) and the reported metrics.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "uxpr/bagsim.hpp"
#include "uxpr/classify.hpp"
#include "uxpr/extract.hpp"

namespace uxpr {

struct CaseRecord {
  std::string bag;
  std::size_t segment = 0;
  int channel = 0;
  int truth = 0;
  std::string kind;
  Prediction prediction;
};

struct Metrics {
  std::size_t total = 0;
  std::size_t errors = 0;
  double accuracy = 0.0;
  std::optional<double> auroc;  // absent: one class missing or 0/1 scores
  double nll = 0.0;             // -sum log2(max(p_true, 2^-10))
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
};

inline constexpr double kNllFloor = 1.0 / 1024.0;

/// Binary metrics with `positive_class` as the positive label. Accuracy counts
/// exact class matches. `degenerate_scores` marks a classifier whose
/// probabilities carry no ranking (1-NN); its AUROC is reported absent.
Metrics compute_metrics(std::span<const CaseRecord> records, int positive_class, bool degenerate_scores = false);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

/// Sweeps every distinct positive-class probability as a threshold (score >=
/// t is positive), from (0,0) to (1,1). Both classes must be present.
std::vector<RocPoint> roc_curve(std::span<const CaseRecord> records, int positive_class);
double trapezoid_area(std::span<const RocPoint> points);

/// Collapses multi-class records to electrical (1) vs non-electrical (0).
std::vector<CaseRecord> to_binary(std::span<const CaseRecord> records);

struct BagMeans {
  std::size_t bags = 0;
  double accuracy = 0.0;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
};

struct EvalResult {
  Task task = Task::two_class;
  bool degenerate_scores = false;
  std::vector<CaseRecord> records;
  Metrics pooled;
  std::map<std::string, Metrics> per_bag;
  BagMeans per_bag_mean;
  std::vector<RocPoint> roc;  // empty when undefined
};

/// Fills pooled, per-bag and ROC fields from `result.records`. Five-class
/// accuracy and NLL use the five classes; the rest use electrical vs not.
void summarize(EvalResult& result);

struct BagData {
  std::string bag_id;
  std::vector<SegmentRecord> segments;
};

/// Groups records by bag, ordered by first appearance.
std::vector<BagData> group_by_bag(std::span<const SegmentRecord> records);

/// Trains on every bag but one and predicts the held-out bag, for each bag.
EvalResult lobo_evaluate(std::span<const BagData> bags, const Trainer& trainer, Task task, int jobs = 1);

struct LocoConfig {
  std::size_t test_bags = 5;
  PackParams pack;
  std::uint64_t seed = 0;
  /// Non-electrical objects placed per electrical one (543:81 in the source corpus).
  double non_electrical_per_electrical = 543.0 / 81.0;
};

/// Trains on every segment whose kind is not `held_out_kind`, then predicts the
/// ground-truth segments of simulated bags built around unseen objects of that kind.
EvalResult leave_one_class_out_evaluate(std::span<const BagData> bags, std::span<const PoolObject> pool,
                                        const std::string& held_out_kind, const LocoConfig& config,
                                        const Trainer& trainer, Task task);

/// Ground-truth segments of a bag after flattening along `axis`: each label's
/// projected support, with flattened pixel values as features.
std::vector<SegmentRecord> flattened_ground_truth(const Volume& v, const LabelVolume& labels, int axis, Task task,
                                                  const std::string& bag_id);

nlohmann::json metrics_json(const Metrics& m);
nlohmann::json report_json(const EvalResult& r, const nlohmann::json& config);
std::string summary_csv(const EvalResult& r);
std::string roc_csv(const EvalResult& r);
/// segment_id,bag,channel,pred,p_electrical
std::string predictions_csv(std::span<const CaseRecord> records);

}  // namespace uxpr

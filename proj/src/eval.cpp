#include "uxpr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "uxpr/error.hpp"
#include "uxpr/parallel.hpp"
#include "uxpr/repack.hpp"

namespace uxpr {

namespace {

double positive_score(const CaseRecord& r, int positive_class) {
  return r.prediction.probs.at(static_cast<std::size_t>(positive_class));
}

}  // namespace

Metrics compute_metrics(std::span<const CaseRecord> records, int positive_class, bool degenerate_scores) {
  if (records.empty()) throw std::invalid_argument("no records to score");
  Metrics m;
  m.total = records.size();
  std::size_t correct = 0;
  for (const auto& r : records) {
    if (r.prediction.predicted == r.truth) ++correct;
    const double p_true = r.prediction.probs.at(static_cast<std::size_t>(r.truth));
    m.nll -= std::log2(std::max(p_true, kNllFloor));
    const bool actual = r.truth == positive_class;
    const bool predicted = r.prediction.predicted == positive_class;
    if (actual && predicted) ++m.tp;
    if (actual && !predicted) ++m.fn;
    if (!actual && predicted) ++m.fp;
    if (!actual && !predicted) ++m.tn;
  }
  m.errors = m.total - correct;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(m.total);
  if (m.tp + m.fn > 0) m.sensitivity = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
  if (m.tn + m.fp > 0) m.specificity = static_cast<double>(m.tn) / static_cast<double>(m.tn + m.fp);

  const std::size_t positives = m.tp + m.fn;
  const std::size_t negatives = m.tn + m.fp;
  if (positives == 0 || negatives == 0 || degenerate_scores) return m;

  // Mann-Whitney: fraction of (positive, negative) pairs ranked correctly, ties 1/2.
  std::vector<std::pair<double, bool>> scored;
  scored.reserve(records.size());
  for (const auto& r : records) scored.emplace_back(positive_score(r, positive_class), r.truth == positive_class);
  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double concordant = 0.0;
  std::size_t negatives_below = 0;
  for (std::size_t i = 0; i < scored.size();) {
    std::size_t j = i;
    std::size_t pos = 0;
    std::size_t neg = 0;
    while (j < scored.size() && scored[j].first == scored[i].first) {
      (scored[j].second ? pos : neg) += 1;
      ++j;
    }
    concordant += static_cast<double>(pos) * (static_cast<double>(negatives_below) + 0.5 * static_cast<double>(neg));
    negatives_below += neg;
    i = j;
  }
  m.auroc = concordant / (static_cast<double>(positives) * static_cast<double>(negatives));
  return m;
}

std::vector<RocPoint> roc_curve(std::span<const CaseRecord> records, int positive_class) {
  std::vector<std::pair<double, bool>> scored;
  std::size_t positives = 0;
  for (const auto& r : records) {
    const bool pos = r.truth == positive_class;
    positives += pos ? 1 : 0;
    scored.emplace_back(positive_score(r, positive_class), pos);
  }
  const std::size_t negatives = scored.size() - positives;
  if (positives == 0 || negatives == 0) throw std::invalid_argument("ROC curve needs both classes");
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  std::vector<RocPoint> points{{0.0, 0.0}};
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < scored.size();) {
    std::size_t j = i;
    while (j < scored.size() && scored[j].first == scored[i].first) {
      (scored[j].second ? tp : fp) += 1;
      ++j;
    }
    points.push_back({static_cast<double>(fp) / static_cast<double>(negatives),
                      static_cast<double>(tp) / static_cast<double>(positives)});
    i = j;
  }
  return points;
}

double trapezoid_area(std::span<const RocPoint> points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2.0;
  }
  return area;
}

std::vector<CaseRecord> to_binary(std::span<const CaseRecord> records) {
  std::vector<CaseRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    CaseRecord b = r;
    b.truth = r.truth == kNonElectrical ? 0 : 1;
    const double p0 = r.prediction.probs.at(0);
    b.prediction.probs = {p0, 1.0 - p0};
    b.prediction.predicted = r.prediction.predicted == kNonElectrical ? 0 : 1;
    out.push_back(std::move(b));
  }
  return out;
}

namespace {

Metrics task_metrics(std::span<const CaseRecord> records, Task task, bool degenerate) {
  if (task == Task::two_class) return compute_metrics(records, 1, degenerate);
  const Metrics multi = compute_metrics(records, 1, degenerate);
  const auto binary = to_binary(records);
  Metrics m = compute_metrics(binary, 1, degenerate);
  m.accuracy = multi.accuracy;
  m.errors = multi.errors;
  m.nll = multi.nll;
  return m;
}

}  // namespace

void summarize(EvalResult& result) {
  result.per_bag.clear();
  result.roc.clear();
  result.per_bag_mean = {};
  if (result.records.empty()) return;
  result.pooled = task_metrics(result.records, result.task, result.degenerate_scores);

  std::map<std::string, std::vector<CaseRecord>> by_bag;
  for (const auto& r : result.records) by_bag[r.bag].push_back(r);
  double acc = 0.0;
  double sens = 0.0;
  double spec = 0.0;
  std::size_t sens_n = 0;
  std::size_t spec_n = 0;
  for (const auto& [bag, recs] : by_bag) {
    const Metrics m = task_metrics(recs, result.task, result.degenerate_scores);
    acc += m.accuracy;
    if (m.sensitivity) {
      sens += *m.sensitivity;
      ++sens_n;
    }
    if (m.specificity) {
      spec += *m.specificity;
      ++spec_n;
    }
    result.per_bag.emplace(bag, m);
  }
  result.per_bag_mean.bags = by_bag.size();
  result.per_bag_mean.accuracy = acc / static_cast<double>(by_bag.size());
  if (sens_n) result.per_bag_mean.sensitivity = sens / static_cast<double>(sens_n);
  if (spec_n) result.per_bag_mean.specificity = spec / static_cast<double>(spec_n);

  const auto binary = to_binary(result.records);
  const bool both = std::any_of(binary.begin(), binary.end(), [](const auto& r) { return r.truth == 1; }) &&
                    std::any_of(binary.begin(), binary.end(), [](const auto& r) { return r.truth == 0; });
  if (both) result.roc = roc_curve(binary, 1);
}

std::vector<BagData> group_by_bag(std::span<const SegmentRecord> records) {
  std::vector<BagData> bags;
  std::map<std::string, std::size_t> index;
  for (const auto& r : records) {
    auto [it, inserted] = index.emplace(r.bag, bags.size());
    if (inserted) bags.push_back({r.bag, {}});
    bags[it->second].segments.push_back(r);
  }
  return bags;
}

namespace {

CaseRecord make_case(const SegmentRecord& s, Prediction p) {
  CaseRecord c;
  c.bag = s.bag;
  c.segment = s.id;
  c.channel = s.channel;
  c.truth = *s.label;
  c.kind = s.kind;
  c.prediction = std::move(p);
  return c;
}

void require_labels(std::span<const BagData> bags) {
  for (const auto& b : bags) {
    for (const auto& s : b.segments) {
      if (!s.label) throw std::invalid_argument("segment " + std::to_string(s.id) + " of " + b.bag_id + " is unlabeled");
    }
  }
}

}  // namespace

EvalResult lobo_evaluate(std::span<const BagData> bags, const Trainer& trainer, Task task, int jobs) {
  if (bags.size() < 2) throw std::invalid_argument("leave-one-bag-out needs at least two bags");
  require_labels(bags);
  const int classes = class_count(task);

  std::vector<std::vector<CaseRecord>> fold_records(bags.size());
  std::vector<char> degenerate(bags.size(), 0);
  parallel_for(bags.size(), jobs, [&](std::size_t held) {
    if (bags[held].segments.empty()) {
      warn("bag " + bags[held].bag_id + " has no segments; it contributes nothing");
      return;
    }
    std::vector<SegmentRecord> train_records;
    for (std::size_t b = 0; b < bags.size(); ++b) {
      if (b == held) continue;
      train_records.insert(train_records.end(), bags[b].segments.begin(), bags[b].segments.end());
    }
    if (train_records.empty()) {
      warn("no training segments outside bag " + bags[held].bag_id);
      return;
    }
    const auto model = trainer(make_dataset(train_records, classes));
    degenerate[held] = model->degenerate_probabilities() ? 1 : 0;
    for (const auto& s : bags[held].segments) fold_records[held].push_back(make_case(s, model->predict(s.hist)));
  });

  EvalResult result;
  result.task = task;
  result.degenerate_scores = std::any_of(degenerate.begin(), degenerate.end(), [](char d) { return d != 0; });
  for (auto& f : fold_records) {
    for (auto& r : f) result.records.push_back(std::move(r));
  }
  summarize(result);
  return result;
}

EvalResult leave_one_class_out_evaluate(std::span<const BagData> bags, std::span<const PoolObject> pool,
                                        const std::string& held_out_kind, const LocoConfig& config,
                                        const Trainer& trainer, Task task) {
  require_labels(bags);
  std::vector<std::size_t> held;
  std::vector<std::size_t> non_electrical;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool[i].name == held_out_kind) held.push_back(i);
    if (!pool[i].electrical) non_electrical.push_back(i);
  }
  if (held.empty()) throw std::invalid_argument("device class '" + held_out_kind + "' is not in the pool");

  std::vector<SegmentRecord> train_records;
  for (const auto& b : bags) {
    for (const auto& s : b.segments) {
      if (s.kind != held_out_kind) train_records.push_back(s);
    }
  }
  if (train_records.empty()) throw std::invalid_argument("no training segments remain after exclusion");
  const auto model = trainer(make_dataset(train_records, class_count(task)));

  const auto companions = static_cast<std::size_t>(std::floor(config.non_electrical_per_electrical + 0.5));
  EvalResult result;
  result.task = task;
  result.degenerate_scores = model->degenerate_probabilities();
  for (std::size_t t = 0; t < config.test_bags; ++t) {
    Rng rng(config.seed, t);
    std::vector<std::size_t> selection{held[rng.below(held.size())]};
    std::vector<std::size_t> candidates = non_electrical;
    for (std::size_t k = 0; k < companions && !candidates.empty(); ++k) {
      if (candidates.size() >= companions) {
        const std::size_t pick = k + rng.below(candidates.size() - k);
        std::swap(candidates[k], candidates[pick]);
        selection.push_back(candidates[k]);
      } else {
        selection.push_back(candidates[rng.below(candidates.size())]);
      }
    }
    const Bag bag = pack_objects(pool, selection, splitmix64(config.seed ^ (0xC0FFEEull + t)), config.pack);
    if (bag.placed.empty() || bag.placed.front().object != selection.front()) {
      throw InvariantError("held-out object did not fit in an empty test bag");
    }
    const std::string bag_id = "loco_" + std::to_string(t);
    const auto segments = ground_truth_segments(bag.volume, bag.labels, task, bag_id);
    for (std::size_t i = 0; i < segments.size(); ++i) {
      const SegmentRecord rec = to_record(segments[i], i);
      result.records.push_back(make_case(rec, model->predict(rec.hist)));
    }
  }
  summarize(result);
  return result;
}

std::vector<SegmentRecord> flattened_ground_truth(const Volume& v, const LabelVolume& labels, int axis, Task task,
                                                  const std::string& bag_id) {
  const Volume image = flatten2d(v, axis);
  const auto supports = project_label_supports(labels, axis);
  std::vector<SegmentRecord> out;
  for (std::size_t k = 0; k < labels.table.size(); ++k) {
    if (supports[k].empty()) continue;
    SegmentRecord r;
    r.id = out.size();
    r.bag = bag_id;
    r.channel = 0;
    r.area = supports[k].size();
    r.label = class_of(labels.table[k], task);
    r.kind = labels.table[k].name;
    for (VoxelIndex p : supports[k]) ++r.hist.bins[image[p]];
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::string fmt(const std::optional<double>& v) {
  if (!v) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

}  // namespace

nlohmann::json metrics_json(const Metrics& m) {
  return {{"total", m.total},
          {"errors", m.errors},
          {"accuracy", m.accuracy},
          {"auroc", opt(m.auroc)},
          {"nll", m.nll},
          {"sensitivity", opt(m.sensitivity)},
          {"specificity", opt(m.specificity)},
          {"tp", m.tp},
          {"fp", m.fp},
          {"tn", m.tn},
          {"fn", m.fn}};
}

nlohmann::json report_json(const EvalResult& r, const nlohmann::json& config) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& c : r.records) {
    records.push_back({{"bag", c.bag},
                       {"segment", c.segment},
                       {"channel", c.channel},
                       {"truth", c.truth},
                       {"kind", c.kind},
                       {"predicted", c.prediction.predicted},
                       {"probs", c.prediction.probs}});
  }
  nlohmann::json per_bag = nlohmann::json::object();
  for (const auto& [bag, m] : r.per_bag) per_bag[bag] = metrics_json(m);
  nlohmann::json roc = nlohmann::json::array();
  for (const auto& p : r.roc) roc.push_back({p.fpr, p.tpr});
  return {{"config", config},
          {"task", task_name(r.task)},
          {"metric_conventions",
           {{"nll", "-sum log2(max(p_true, 2^-10))"},
            {"auroc", "Mann-Whitney, ties 1/2; null when a class is absent or scores are 0/1"},
            {"positive_class", "electrical"}}},
          {"pooled", metrics_json(r.pooled)},
          {"per_bag_mean",
           {{"bags", r.per_bag_mean.bags},
            {"accuracy", r.per_bag_mean.accuracy},
            {"sensitivity", opt(r.per_bag_mean.sensitivity)},
            {"specificity", opt(r.per_bag_mean.specificity)}}},
          {"per_bag", per_bag},
          {"roc", roc},
          {"records", records}};
}

std::string summary_csv(const EvalResult& r) {
  std::ostringstream out;
  out << "scope,total,errors,accuracy,auroc,nll,sensitivity,specificity\n";
  const auto row = [&](const std::string& scope, const Metrics& m) {
    out << scope << ',' << m.total << ',' << m.errors << ',' << fmt(m.accuracy) << ',' << fmt(m.auroc) << ','
        << fmt(m.nll) << ',' << fmt(m.sensitivity) << ',' << fmt(m.specificity) << '\n';
  };
  row("pooled", r.pooled);
  for (const auto& [bag, m] : r.per_bag) row(bag, m);
  return out.str();
}

std::string roc_csv(const EvalResult& r) {
  std::ostringstream out;
  out << "fpr,tpr\n";
  for (const auto& p : r.roc) out << fmt(p.fpr) << ',' << fmt(p.tpr) << '\n';
  return out.str();
}

std::string predictions_csv(std::span<const CaseRecord> records) {
  std::ostringstream out;
  out << "segment_id,bag,channel,pred,p_electrical\n";
  for (const auto& c : records) {
    out << c.segment << ',' << c.bag << ',' << c.channel << ',' << c.prediction.predicted << ','
        << fmt(1.0 - c.prediction.probs.at(0)) << '\n';
  }
  return out.str();
}

}  // namespace uxpr

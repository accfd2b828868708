#include "uxpr/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "uxpr/bagsim.hpp"
#include "uxpr/classify.hpp"
#include "uxpr/error.hpp"
#include "uxpr/eval.hpp"
#include "uxpr/extract.hpp"
#include "uxpr/io.hpp"
#include "uxpr/repack.hpp"
#include "uxpr/sieve.hpp"

namespace uxpr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
  // shared
  std::uint64_t seed = 42;
  int jobs = 1;
  std::string task = "two_class";
  std::string filter = "m";
  std::string bounds = "bracketing";
  std::vector<std::uint64_t> scales;
  std::size_t n_scales = 5;
  std::uint64_t s_min = 32;
  std::uint64_t s_max = 0;  // 0: voxel count of the input
  std::string in;
  std::string out;

  // simulate
  std::string pool;
  std::vector<std::size_t> phantoms;  // electrical, non_electrical
  double size_scale = 1.0;
  std::size_t bags = 0;
  std::vector<std::size_t> dims{64};
  std::size_t objects = 20;
  int attempts = 5;

  // unpack / extract / repack
  std::string bag;
  std::string unpacked;
  bool ground_truth = false;
  std::string flatten_axis;
  std::string predictions;
  std::string render;

  // classifier
  std::string classifier = "forest";
  std::size_t trees = 500;
  std::size_t features = 16;
  std::size_t max_depth = 0;
  std::size_t min_leaf = 1;
  std::size_t cv_folds = 10;
  std::vector<std::string> segments;
  std::string model;

  // evaluate
  std::string protocol = "lobo";
  std::string held_out;
  std::size_t test_bags = 5;
  std::string summary;
  std::string roc;

  // flatten
  std::string axis = "z";
  bool mip = false;

  std::string bags_dir;
};

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

Shape dims_from(const std::vector<std::size_t>& d) {
  if (d.size() == 1) return Shape{d[0], d[0], d[0]};
  if (d.size() == 3) return Shape{d[0], d[1], d[2]};
  throw UsageError("--dims takes one value or three comma-separated values");
}

int parse_axis(const std::string& a) {
  if (a == "x" || a == "0") return 0;
  if (a == "y" || a == "1") return 1;
  if (a == "z" || a == "2") return 2;
  throw UsageError("axis must be x, y, z or 0, 1, 2");
}

ClassifierSpec classifier_spec(const RunConfig& c) {
  ClassifierSpec spec;
  spec.kind = c.classifier;
  spec.forest.tree_count = c.trees;
  spec.forest.features_per_split = c.features;
  spec.forest.max_depth = c.max_depth;
  spec.forest.min_leaf = c.min_leaf;
  spec.forest.seed = c.seed;
  spec.forest.jobs = c.jobs;
  spec.cv_folds = c.cv_folds;
  spec.cv_seed = c.seed;
  if (spec.kind != "knn" && spec.kind != "forest" && spec.kind != "ensemble") {
    throw UsageError("--classifier must be knn, forest or ensemble");
  }
  spec.forest.validate();
  return spec;
}

ScaleSchedule resolve_schedule(const RunConfig& c, std::size_t voxel_count) {
  if (!c.scales.empty()) return ScaleSchedule(c.scales);
  const std::uint64_t s_max = c.s_max != 0 ? c.s_max : voxel_count;
  return default_schedule(c.n_scales, c.s_min, s_max);
}

json config_json(const RunConfig& c, const std::string& subcommand) {
  return {{"subcommand", subcommand},
          {"seed", c.seed},
          {"jobs", c.jobs},
          {"task", c.task},
          {"filter", c.filter},
          {"bounds", c.bounds},
          {"scales", c.scales},
          {"n_scales", c.n_scales},
          {"s_min", c.s_min},
          {"s_max", c.s_max},
          {"connectivity", "face"},
          {"in", c.in},
          {"out", c.out},
          {"pool", c.pool},
          {"phantoms", c.phantoms},
          {"size_scale", c.size_scale},
          {"bags", c.bags},
          {"dims", c.dims},
          {"objects", c.objects},
          {"attempts", c.attempts},
          {"bag", c.bag},
          {"unpacked", c.unpacked},
          {"ground_truth", c.ground_truth},
          {"flatten_axis", c.flatten_axis},
          {"predictions", c.predictions},
          {"classifier", c.classifier},
          {"trees", c.trees},
          {"features", c.features},
          {"max_depth", c.max_depth},
          {"min_leaf", c.min_leaf},
          {"cv_folds", c.cv_folds},
          {"segments", c.segments},
          {"model", c.model},
          {"protocol", c.protocol},
          {"held_out", c.held_out},
          {"test_bags", c.test_bags},
          {"axis", c.axis},
          {"mip", c.mip},
          {"bags_dir", c.bags_dir}};
}

void write_run_record(const fs::path& dir, const RunConfig& c, const std::string& subcommand,
                      const std::vector<std::string>& argv) {
  if (!dir.empty()) fs::create_directories(dir);
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  json doc = {{"tool", "uxpr"},
              {"version", kVersion},
              {"json_library", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                   std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                   std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
              {"argv", argv},
              {"seeds", {{"seed", c.seed}}},
              {"config", config_json(c, subcommand)},
              {"timestamp", stamp}};
  io::write_json(dir / "run.json", doc);
}

fs::path output_dir_of(const std::string& out) {
  const fs::path p(out);
  return p.has_parent_path() ? p.parent_path() : fs::path(".");
}

// --- stages ------------------------------------------------------------------

std::string bag_id_of(const fs::path& dir) {
  auto name = dir.filename().string();
  if (name.empty()) name = dir.parent_path().filename().string();
  return name;
}

void stage_unpack(const Volume& v, const ScaleSchedule& schedule, FilterKind filter, const fs::path& out,
                  const std::string& bag_id, const std::string& source) {
  const SieveDecomposition d = decompose(v, schedule, filter, face_connectivity(v.shape()));
  if (schedule.size() < 2) throw UsageError("unpacking needs at least two scales");
  fs::create_directories(out);
  json files = json::array();
  for (std::size_t n = 2; n <= schedule.size(); ++n) {
    const std::string name = "channel_abs_" + std::to_string(n) + ".uxv";
    io::write_uxv(out / name, abs_channel(d, n));
    files.push_back(name);
  }
  io::write_json(out / "unpack.json", {{"bag", bag_id},
                                       {"source", source},
                                       {"scales", schedule.scales()},
                                       {"filter", filter_name(filter)},
                                       {"connectivity", "face"},
                                       {"channels", files}});
}

struct Unpacked {
  std::string bag_id;
  ScaleSchedule schedule;
  std::vector<Volume> channels;
};

Unpacked read_unpacked(const fs::path& dir) {
  const json doc = io::read_json(dir / "unpack.json");
  Unpacked u;
  try {
    u.bag_id = doc.at("bag").get<std::string>();
    u.schedule = ScaleSchedule(doc.at("scales").get<std::vector<std::uint64_t>>());
    for (const auto& f : doc.at("channels")) u.channels.push_back(io::read_volume(dir / f.get<std::string>()));
  } catch (const json::exception& e) {
    throw InputError((dir / "unpack.json").string(), 0, e.what());
  } catch (const std::invalid_argument& e) {
    throw InputError((dir / "unpack.json").string(), 0, e.what());
  }
  if (u.channels.size() + 1 != u.schedule.size()) {
    throw InputError((dir / "unpack.json").string(), 0, "channel count does not match the schedule");
  }
  return u;
}

std::vector<Segment> unpacked_segments(const Unpacked& u, BoundsMode bounds) {
  return extract_from_channels(u.channels, u.schedule, bounds, u.bag_id);
}

void write_records(const fs::path& path, const std::vector<SegmentRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_segments_jsonl(out, records);
}

std::vector<SegmentRecord> read_records(const std::vector<std::string>& files) {
  std::vector<SegmentRecord> all;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    if (!in) throw InputError(f, 0, "cannot open file");
    auto part = read_segments_jsonl(in, f);
    all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return all;
}

std::vector<SegmentRecord> stage_extract(const RunConfig& c) {
  const Task task = parse_task(c.task);
  std::vector<SegmentRecord> records;
  if (c.ground_truth) {
    if (c.bag.empty()) throw UsageError("--ground-truth needs --bag");
    const Bag bag = io::read_bag(c.bag);
    const std::string id = bag_id_of(c.bag);
    if (!c.flatten_axis.empty()) return flattened_ground_truth(bag.volume, bag.labels, parse_axis(c.flatten_axis), task, id);
    const auto segs = ground_truth_segments(bag.volume, bag.labels, task, id);
    for (std::size_t i = 0; i < segs.size(); ++i) records.push_back(to_record(segs[i], i));
    return records;
  }
  if (c.unpacked.empty()) throw UsageError("extract needs --unpacked or --ground-truth");
  const Unpacked u = read_unpacked(c.unpacked);
  auto segs = unpacked_segments(u, parse_bounds_mode(c.bounds));
  if (!c.bag.empty()) {
    const Bag bag = io::read_bag(c.bag);
    if (!(bag.labels.labels.shape() == u.channels.front().shape())) {
      throw InputError((fs::path(c.bag) / "labels.uxv").string(), 0, "label dims differ from channel dims");
    }
    auto_label_all(segs, bag.labels, task);
  }
  for (std::size_t i = 0; i < segs.size(); ++i) records.push_back(to_record(segs[i], i));
  return records;
}

struct PredictionRow {
  std::size_t segment;
  std::string bag;
  int channel;
  int pred;
  double p_electrical;
};

std::vector<PredictionRow> read_predictions(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path.string(), 0, "cannot open file");
  std::vector<PredictionRow> rows;
  std::string line;
  std::uint64_t offset = 0;
  bool header = true;
  while (std::getline(in, line)) {
    const std::uint64_t at = offset;
    offset += line.size() + 1;
    if (header) {
      header = false;
      if (line.rfind("segment_id", 0) != 0) throw InputError(path.string(), 0, "missing prediction CSV header");
      continue;
    }
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f[5];
    for (auto& field : f) {
      if (!std::getline(ss, field, ',')) throw InputError(path.string(), at, "expected 5 fields");
    }
    try {
      rows.push_back({std::stoul(f[0]), f[1], std::stoi(f[2]), std::stoi(f[3]), f[4] == "NA" ? 0.0 : std::stod(f[4])});
    } catch (const std::exception&) {
      throw InputError(path.string(), at, "malformed prediction row");
    }
  }
  return rows;
}

RepackMap stage_repack(const Unpacked& u, BoundsMode bounds, const std::vector<PredictionRow>& rows,
                       const std::string& source) {
  const auto segs = unpacked_segments(u, bounds);
  std::map<std::size_t, const PredictionRow*> by_id;
  for (const auto& r : rows) {
    if (r.bag == u.bag_id) by_id[r.segment] = &r;
  }
  std::vector<VotedSegment> votes;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    auto it = by_id.find(i);
    if (it == by_id.end()) continue;
    if (it->second->channel != segs[i].channel) {
      throw InputError(source, 0, "prediction for segment " + std::to_string(i) + " names channel " +
                                      std::to_string(it->second->channel) + ", extraction gives " +
                                      std::to_string(segs[i].channel));
    }
    Prediction p;
    p.predicted = it->second->pred;
    p.probs = {1.0 - it->second->p_electrical, it->second->p_electrical};
    votes.push_back({&segs[i], p});
  }
  if (votes.size() != by_id.size()) {
    throw InputError(source, 0, "predictions reference segments that extraction did not produce");
  }
  return repack_vote(votes, u.channels.front().shape());
}

struct EvalOutputs {
  std::string report;
  std::string summary;
  std::string roc;
  std::string predictions;
};

void write_eval(const EvalResult& r, const RunConfig& c, const EvalOutputs& o, const std::string& subcommand) {
  io::write_json(o.report, report_json(r, config_json(c, subcommand)));
  if (!o.summary.empty()) io::write_text(o.summary, summary_csv(r));
  if (!o.roc.empty()) io::write_text(o.roc, roc_csv(r));
  if (!o.predictions.empty()) io::write_text(o.predictions, predictions_csv(r.records));
}

std::vector<fs::path> bag_dirs(const fs::path& root) {
  std::vector<fs::path> dirs;
  if (!fs::is_directory(root)) throw InputError(root.string(), 0, "not a directory");
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && fs::exists(e.path() / "volume.uxv")) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

// --- subcommands ---------------------------------------------------------------

void cmd_simulate(const RunConfig& c) {
  if (c.pool.empty()) throw UsageError("simulate needs --pool");
  std::vector<PoolObject> pool;
  if (!c.phantoms.empty()) {
    if (c.phantoms.size() != 2) throw UsageError("--phantoms takes ELECTRICAL,NON_ELECTRICAL");
    pool = generate_phantom_pool({c.phantoms[0], c.phantoms[1], c.size_scale}, c.seed);
    io::write_pool(c.pool, pool);
  } else {
    pool = io::read_pool(c.pool);
  }
  if (c.bags == 0) return;
  if (c.out.empty()) throw UsageError("simulate needs --out for bags");
  PackParams params;
  params.dims = dims_from(c.dims);
  params.object_count = c.objects;
  params.attempts = c.attempts;
  for (std::size_t b = 0; b < c.bags; ++b) {
    char name[32];
    std::snprintf(name, sizeof name, "bag_%03zu", b);
    const Bag bag = pack_bag(pool, splitmix64(c.seed + b), params);
    io::write_bag(fs::path(c.out) / name, bag, pool, params);
  }
}

void cmd_decompose(const RunConfig& c) {
  if (c.in.empty() || c.out.empty()) throw UsageError("decompose needs --in and --out");
  const Volume v = io::read_volume(c.in);
  const ScaleSchedule schedule = resolve_schedule(c, v.shape().voxel_count());
  const auto d = decompose(v, schedule, parse_filter_kind(c.filter), face_connectivity(v.shape()));
  if (d.reconstruct() != v) throw InvariantError("decomposition does not reconstruct its input");
  io::write_decomposition(c.out, d, fs::absolute(c.in).string());
}

void cmd_unpack(const RunConfig& c) {
  if (c.out.empty()) throw UsageError("unpack needs --out");
  fs::path source;
  std::string id;
  if (!c.bag.empty()) {
    source = fs::path(c.bag) / "volume.uxv";
    id = bag_id_of(c.bag);
  } else if (!c.in.empty()) {
    source = c.in;
    id = fs::path(c.in).stem().string();
  } else {
    throw UsageError("unpack needs --bag or --in");
  }
  const Volume v = io::read_volume(source);
  stage_unpack(v, resolve_schedule(c, v.shape().voxel_count()), parse_filter_kind(c.filter), c.out, id,
               source.string());
}

void cmd_extract(const RunConfig& c) {
  if (c.out.empty()) throw UsageError("extract needs --out");
  const auto records = stage_extract(c);
  if (!output_dir_of(c.out).empty()) fs::create_directories(output_dir_of(c.out));
  write_records(c.out, records);
}

void cmd_train(const RunConfig& c) {
  if (c.segments.empty() || c.out.empty()) throw UsageError("train needs --segments and --out");
  const Task task = parse_task(c.task);
  const auto records = read_records(c.segments);
  const auto model = make_trainer(classifier_spec(c))(make_dataset(records, class_count(task)));
  json doc = save_model(*model);
  doc["task"] = task_name(task);
  io::write_json(c.out, doc);
}

void cmd_predict(const RunConfig& c) {
  if (c.model.empty() || c.segments.empty() || c.out.empty()) {
    throw UsageError("predict needs --model, --segments and --out");
  }
  const json doc = io::read_json(c.model);
  std::unique_ptr<Classifier> model;
  try {
    model = load_model(doc);
  } catch (const std::exception& e) {
    throw InputError(c.model, 0, e.what());
  }
  std::vector<CaseRecord> cases;
  for (const auto& r : read_records(c.segments)) {
    CaseRecord cr;
    cr.bag = r.bag;
    cr.segment = r.id;
    cr.channel = r.channel;
    cr.truth = r.label.value_or(0);
    cr.prediction = model->predict(r.hist);
    cases.push_back(std::move(cr));
  }
  io::write_text(c.out, predictions_csv(cases));
}

void cmd_evaluate(const RunConfig& c) {
  if (c.segments.empty() || c.out.empty()) throw UsageError("evaluate needs --segments and --out");
  const Task task = parse_task(c.task);
  const Trainer trainer = make_trainer(classifier_spec(c));
  const auto bags = group_by_bag(read_records(c.segments));
  EvalResult result;
  if (c.protocol == "lobo") {
    result = lobo_evaluate(bags, trainer, task, c.jobs);
  } else if (c.protocol == "loco") {
    if (c.pool.empty() || c.held_out.empty()) throw UsageError("loco needs --pool and --held-out");
    const auto pool = io::read_pool(c.pool);
    LocoConfig lc;
    lc.test_bags = c.test_bags;
    lc.seed = c.seed;
    lc.pack.dims = dims_from(c.dims);
    lc.pack.attempts = c.attempts;
    result = leave_one_class_out_evaluate(bags, pool, c.held_out, lc, trainer, task);
  } else {
    throw UsageError("--protocol must be lobo or loco");
  }
  write_eval(result, c, {c.out, c.summary, c.roc, c.predictions}, "evaluate");
}

void cmd_repack(const RunConfig& c) {
  if (c.unpacked.empty() || c.predictions.empty() || c.out.empty()) {
    throw UsageError("repack needs --unpacked, --predictions and --out");
  }
  const Unpacked u = read_unpacked(c.unpacked);
  const RepackMap map = stage_repack(u, parse_bounds_mode(c.bounds), read_predictions(c.predictions), c.predictions);
  io::write_uxv(c.out, map.verdicts);
  if (!c.render.empty()) {
    if (c.bag.empty()) throw UsageError("--render needs --bag for intensities");
    render_composite(c.render, io::read_volume(fs::path(c.bag) / "volume.uxv"), map);
  }
}

void cmd_flatten(const RunConfig& c) {
  if (c.in.empty() || c.out.empty()) throw UsageError("flatten needs --in and --out");
  fs::path source = c.in;
  if (fs::is_directory(source)) source /= "volume.uxv";
  const Volume v = io::read_volume(source);
  const int axis = parse_axis(c.axis);
  io::write_pgm(c.out, c.mip ? mip_projection(v, axis) : flatten2d(v, axis));
}

void cmd_pipeline(const RunConfig& c) {
  if (c.bags_dir.empty() || c.out.empty()) throw UsageError("pipeline needs --bags and --out");
  const fs::path out(c.out);
  const auto dirs = bag_dirs(c.bags_dir);
  if (dirs.size() < 2) throw InputError(c.bags_dir, 0, "pipeline needs at least two bag directories");
  const FilterKind filter = parse_filter_kind(c.filter);
  const BoundsMode bounds = parse_bounds_mode(c.bounds);

  std::vector<std::string> segment_files;
  for (const auto& dir : dirs) {
    const std::string id = bag_id_of(dir);
    const Volume v = io::read_volume(dir / "volume.uxv");
    const fs::path unpacked = out / "unpacked" / id;
    stage_unpack(v, resolve_schedule(c, v.shape().voxel_count()), filter, unpacked, id, (dir / "volume.uxv").string());
    RunConfig ec = c;
    ec.unpacked = unpacked.string();
    ec.bag = dir.string();
    ec.ground_truth = false;
    fs::create_directories(out / "segments");
    const fs::path seg_file = out / "segments" / (id + ".jsonl");
    write_records(seg_file, stage_extract(ec));
    segment_files.push_back(seg_file.string());
  }

  const Task task = parse_task(c.task);
  const auto bags = group_by_bag(read_records(segment_files));
  const EvalResult result = lobo_evaluate(bags, make_trainer(classifier_spec(c)), task, c.jobs);
  const fs::path predictions = out / "predictions.csv";
  write_eval(result, c, {(out / "report.json").string(), (out / "summary.csv").string(), (out / "roc.csv").string(),
                         predictions.string()},
             "pipeline");

  const auto rows = read_predictions(predictions);
  for (const auto& dir : dirs) {
    const std::string id = bag_id_of(dir);
    const Unpacked u = read_unpacked(out / "unpacked" / id);
    const RepackMap map = stage_repack(u, bounds, rows, predictions.string());
    const fs::path dest = out / "repack" / id;
    fs::create_directories(dest);
    io::write_uxv(dest / "verdict.uxv", map.verdicts);
    if (!c.render.empty()) render_composite(dest / "render", io::read_volume(dir / "volume.uxv"), map);
  }
}

void add_common(CLI::App* sub, RunConfig& c) {
  sub->add_option("--seed", c.seed, "Master seed");
  sub->add_option("--jobs", c.jobs, "Worker threads (bags/folds/trees)")->envname("UXPR_JOBS")->check(CLI::PositiveNumber);
}

void add_sieve_flags(CLI::App* sub, RunConfig& c) {
  sub->add_option("--scales", c.scales, "Comma-separated scale schedule")->delimiter(',');
  sub->add_option("--n-scales", c.n_scales, "Scales in the default log-equispaced schedule");
  sub->add_option("--s-min", c.s_min, "Smallest default scale");
  sub->add_option("--s-max", c.s_max, "Largest default scale (0: voxel count)");
  sub->add_option("--filter", c.filter, "opening | closing | m | n");
}

void add_classifier_flags(CLI::App* sub, RunConfig& c) {
  sub->add_option("--classifier", c.classifier, "knn | forest | ensemble");
  sub->add_option("--task", c.task, "two_class | five_class");
  sub->add_option("--trees", c.trees, "Forest size");
  sub->add_option("--features", c.features, "Bins sampled per split");
  sub->add_option("--max-depth", c.max_depth, "Tree depth limit (0: none)");
  sub->add_option("--min-leaf", c.min_leaf, "Minimum instances per leaf");
  sub->add_option("--cv-folds", c.cv_folds, "Folds used to weight ensemble members");
}

}  // namespace

int run(int argc, const char* const* argv) {
  RunConfig c;
  CLI::App app{"uxpr: unpack, extract, predict and repack volumetric scans"};
  app.set_config("--config", "", "TOML/INI file of option values; flags override it");
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  auto* simulate = app.add_subcommand("simulate", "Generate a phantom pool and/or simulated bags");
  add_common(simulate, c);
  simulate->add_option("--pool", c.pool, "Pool manifest (read, or written with --phantoms)");
  simulate->add_option("--phantoms", c.phantoms, "Generate a pool: ELECTRICAL,NON_ELECTRICAL")->delimiter(',');
  simulate->add_option("--size-scale", c.size_scale, "Phantom size multiplier");
  simulate->add_option("--bags", c.bags, "Number of bags to pack");
  simulate->add_option("--dims", c.dims, "Bag extent N or X,Y,Z")->delimiter(',');
  simulate->add_option("--objects", c.objects, "Objects drawn per bag");
  simulate->add_option("--attempts", c.attempts, "Placement attempts per object");
  simulate->add_option("--out", c.out, "Directory receiving bag_NNN/");

  auto* decompose_cmd = app.add_subcommand("decompose", "Sieve one volume into low-pass and channel files");
  add_common(decompose_cmd, c);
  add_sieve_flags(decompose_cmd, c);
  decompose_cmd->add_option("--in", c.in, "Input UXV1 volume");
  decompose_cmd->add_option("--out", c.out, "Output directory");

  auto* unpack = app.add_subcommand("unpack", "Write absolute channel volumes of a bag");
  add_common(unpack, c);
  add_sieve_flags(unpack, c);
  unpack->add_option("--bag", c.bag, "Bag directory");
  unpack->add_option("--in", c.in, "Volume file (instead of --bag)");
  unpack->add_option("--out", c.out, "Output directory");

  auto* extract = app.add_subcommand("extract", "Harvest segments and histograms as JSON lines");
  add_common(extract, c);
  extract->add_option("--unpacked", c.unpacked, "Directory written by unpack");
  extract->add_option("--bag", c.bag, "Bag directory (labels for overlap labeling)");
  extract->add_flag("--ground-truth", c.ground_truth, "Use labeled objects as segments");
  extract->add_option("--flatten-axis", c.flatten_axis, "With --ground-truth: project along x|y|z first");
  extract->add_option("--bounds", c.bounds, "bracketing | all");
  extract->add_option("--task", c.task, "two_class | five_class");
  extract->add_option("--out", c.out, "Output .jsonl");

  auto* train = app.add_subcommand("train", "Fit a classifier on segment records");
  add_common(train, c);
  add_classifier_flags(train, c);
  train->add_option("--segments", c.segments, "Segment .jsonl files")->delimiter(',');
  train->add_option("--out", c.out, "Model JSON");

  auto* predict = app.add_subcommand("predict", "Classify segment records");
  add_common(predict, c);
  predict->add_option("--model", c.model, "Model JSON");
  predict->add_option("--segments", c.segments, "Segment .jsonl files")->delimiter(',');
  predict->add_option("--out", c.out, "Predictions CSV");

  auto* evaluate = app.add_subcommand("evaluate", "Run an evaluation protocol");
  add_common(evaluate, c);
  add_classifier_flags(evaluate, c);
  evaluate->add_option("--protocol", c.protocol, "lobo | loco");
  evaluate->add_option("--segments", c.segments, "Segment .jsonl files")->delimiter(',');
  evaluate->add_option("--pool", c.pool, "Pool manifest (loco)");
  evaluate->add_option("--held-out", c.held_out, "Device type left out (loco)");
  evaluate->add_option("--test-bags", c.test_bags, "Simulated test bags (loco)");
  evaluate->add_option("--dims", c.dims, "Test bag extent (loco)")->delimiter(',');
  evaluate->add_option("--attempts", c.attempts, "Placement attempts (loco)");
  evaluate->add_option("--out", c.out, "Report JSON");
  evaluate->add_option("--summary", c.summary, "Summary CSV");
  evaluate->add_option("--roc", c.roc, "ROC points CSV");
  evaluate->add_option("--predictions", c.predictions, "Per-segment predictions CSV");

  auto* repack = app.add_subcommand("repack", "Vote channel predictions into a verdict volume");
  add_common(repack, c);
  repack->add_option("--unpacked", c.unpacked, "Directory written by unpack");
  repack->add_option("--predictions", c.predictions, "Predictions CSV");
  repack->add_option("--bounds", c.bounds, "bracketing | all (as used by extract)");
  repack->add_option("--bag", c.bag, "Bag directory (for --render)");
  repack->add_option("--render", c.render, "Directory for per-axis, per-verdict PGMs");
  repack->add_option("--out", c.out, "Verdict UXV1 (u8: 0/1/2)");

  auto* flatten = app.add_subcommand("flatten", "Project a volume to a PGM image");
  add_common(flatten, c);
  flatten->add_option("--in", c.in, "Volume file or bag directory");
  flatten->add_option("--axis", c.axis, "x | y | z");
  flatten->add_flag("--mip", c.mip, "Maximum intensity instead of normalized sum");
  flatten->add_option("--out", c.out, "Output PGM");

  auto* pipeline = app.add_subcommand("pipeline", "Unpack, extract, evaluate (LOBO) and repack a bag directory");
  add_common(pipeline, c);
  add_sieve_flags(pipeline, c);
  add_classifier_flags(pipeline, c);
  pipeline->add_option("--bags", c.bags_dir, "Directory of bag_NNN/ directories");
  pipeline->add_option("--bounds", c.bounds, "bracketing | all");
  pipeline->add_option("--render", c.render, "Also render PGMs (any non-empty value)");
  pipeline->add_option("--out", c.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cout, std::cerr);
    return 1;
  }

  std::vector<std::string> args(argv, argv + argc);
  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  try {
    if (name == "simulate") {
      cmd_simulate(c);
      write_run_record(c.out.empty() ? output_dir_of(c.pool) : fs::path(c.out), c, name, args);
    } else if (name == "decompose") {
      cmd_decompose(c);
      write_run_record(c.out, c, name, args);
    } else if (name == "unpack") {
      cmd_unpack(c);
      write_run_record(c.out, c, name, args);
    } else if (name == "pipeline") {
      cmd_pipeline(c);
      write_run_record(c.out, c, name, args);
    } else {
      if (name == "extract") cmd_extract(c);
      if (name == "train") cmd_train(c);
      if (name == "predict") cmd_predict(c);
      if (name == "evaluate") cmd_evaluate(c);
      if (name == "repack") cmd_repack(c);
      if (name == "flatten") cmd_flatten(c);
      write_run_record(output_dir_of(c.out), c, name, args);
    }
  } catch (const UsageError& e) {
    std::cerr << "uxpr " << name << ": " << e.what() << "\n\n" << sub->help();
    return 1;
  } catch (const InputError& e) {
    std::cerr << "uxpr " << name << ": bad input: " << e.what() << '\n';
    return 2;
  } catch (const InvariantError& e) {
    std::cerr << "uxpr " << name << ": internal invariant violated: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "uxpr " << name << ": " << e.what() << '\n';
    return 1;
  } catch (const std::logic_error& e) {
    std::cerr << "uxpr " << name << ": internal invariant violated: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "uxpr " << name << ": " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace uxpr::cli

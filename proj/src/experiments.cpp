#include "govprobe/experiments.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <Eigen/Dense>
#include <json.hpp>

#include "govprobe/error.hpp"
#include "govprobe/log.hpp"
#include "govprobe/rng.hpp"

namespace govprobe {

namespace {

using nlohmann::json;

// Seed tags; each random decision draws from its own stream.
enum SeedTag : std::uint64_t { kSplitTag = 11, kProbeTag = 12, kRandomMaskTag = 13, kLemmaTag = 14, kHoldoutSplitTag = 15 };

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<Label> labels_of(std::span<const Instance> xs) {
  std::vector<Label> y;
  y.reserve(xs.size());
  for (const auto& x : xs) y.push_back(x.label);
  return y;
}

// One fit/evaluate job. Cells own nothing heavy; they point into shared splits.
struct Cell {
  int threshold = 0;
  int repetition = 0;
  ProbeKind probe = ProbeKind::LogReg;
  std::string condition;
  int n = 0;
  HeadMask mask;
  const std::vector<Instance>* train = nullptr;
  std::vector<const std::vector<Instance>*> tests;  // one result row per entry
  std::vector<std::string> test_conditions;        // overrides `condition` when non-empty
};

struct CellResult {
  std::vector<Metrics> metrics;
};

void run_parallel(int jobs, std::size_t count, const std::function<void(std::size_t)>& task) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, count); ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            task(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::uint64_t probe_seed(const ExperimentPlan& plan, int threshold, int repetition, ProbeKind kind) {
  return derive_seed(plan.seed, {kProbeTag, static_cast<std::uint64_t>(threshold), static_cast<std::uint64_t>(repetition),
                                 static_cast<std::uint64_t>(kind)});
}

TrainedProbe fit_cell(const ExperimentPlan& plan, const ExperimentData& data, const Cell& cell) {
  const auto X = data.matrix(*cell.train, cell.mask);
  const auto y = labels_of(*cell.train);
  std::vector<HeadCell> heads(cell.mask.cells().begin(), cell.mask.cells().end());
  return fit(plan.probe_config(cell.probe, probe_seed(plan, cell.threshold, cell.repetition, cell.probe)), X, y, heads);
}

std::vector<ResultRow> run_cells(const ExperimentPlan& plan, const ExperimentData& data, std::string_view experiment,
                                 const std::vector<Cell>& cells) {
  std::vector<CellResult> results(cells.size());
  run_parallel(plan.jobs, cells.size(), [&](std::size_t i) {
    const auto& cell = cells[i];
    const auto probe = fit_cell(plan, data, cell);
    for (const auto* test : cell.tests) {
      results[i].metrics.push_back(evaluate(probe, data.matrix(*test, cell.mask), labels_of(*test)));
    }
  });
  std::vector<ResultRow> rows;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& cell = cells[i];
    for (std::size_t t = 0; t < cell.tests.size(); ++t) {
      ResultRow row;
      row.experiment = experiment;
      row.language = data.language();
      row.dist_threshold = cell.threshold;
      row.probe = cell.probe;
      row.condition = cell.test_conditions.empty() ? cell.condition : cell.test_conditions[t];
      row.n = cell.n;
      row.repetition = cell.repetition;
      row.metrics = results[i].metrics[t];
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

// Train/test splits per (threshold, repetition), shared across experiments so
// that identical masks reproduce identical rows.
struct SplitSet {
  std::vector<int> thresholds;
  std::vector<std::vector<LabeledDataset>> by_threshold;  // [threshold][repetition]
};

SplitSet make_splits(const ExperimentPlan& plan, const ExperimentData& data) {
  SplitSet s;
  s.thresholds = plan.dist_thresholds;
  for (int t : plan.dist_thresholds) {
    std::vector<LabeledDataset> reps;
    for (int r = 0; r < plan.repetitions; ++r) {
      const auto seed = derive_seed(plan.seed, {kSplitTag, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(r)});
      reps.push_back(split_with_holdout(data.instances(), plan.split_config(t, seed), data.profile()));
    }
    s.by_threshold.push_back(std::move(reps));
  }
  return s;
}

std::vector<ResultRow> mask_experiment(const ExperimentPlan& plan, const ExperimentData& data, std::string_view experiment,
                                       const std::function<std::vector<std::pair<std::string, std::pair<int, HeadMask>>>(int, int, const LabeledDataset&)>& masks_for) {
  plan.validate();
  const auto splits = make_splits(plan, data);
  std::vector<Cell> cells;
  for (std::size_t ti = 0; ti < splits.thresholds.size(); ++ti) {
    const int t = splits.thresholds[ti];
    for (int r = 0; r < plan.repetitions; ++r) {
      const auto& ds = splits.by_threshold[ti][static_cast<std::size_t>(r)];
      for (const auto& [condition, nm] : masks_for(t, r, ds)) {
        for (auto kind : plan.probes) {
          Cell c;
          c.threshold = t;
          c.repetition = r;
          c.probe = kind;
          c.condition = condition;
          c.n = nm.first;
          c.mask = nm.second;
          c.train = &ds.train;
          c.tests = {&ds.test};
          cells.push_back(std::move(c));
        }
      }
    }
  }
  return run_cells(plan, data, experiment, cells);
}

Metrics metrics_mean(std::span<const Metrics> ms, Metrics& stddev) {
  Metrics mean;
  const auto n = static_cast<double>(ms.size());
  const auto rates = [](Metrics& m) { return std::array<double*, 4>{&m.accuracy, &m.precision, &m.recall, &m.f1}; };
  auto mean_rates = rates(mean);
  auto sd_rates = rates(stddev);
  for (auto m : ms) {
    auto r = rates(m);
    for (std::size_t k = 0; k < 4; ++k) *mean_rates[k] += *r[k] / n;
    mean.tp += m.tp;
    mean.fp += m.fp;
    mean.fn += m.fn;
    mean.tn += m.tn;
  }
  for (auto m : ms) {
    auto r = rates(m);
    for (std::size_t k = 0; k < 4; ++k) *sd_rates[k] += (*r[k] - *mean_rates[k]) * (*r[k] - *mean_rates[k]) / n;
  }
  for (auto* v : sd_rates) *v = std::sqrt(*v);
  return mean;
}

template <class T>
std::vector<T> get_list(const json& j, const char* key) {
  try {
    return j.at(key).get<std::vector<T>>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("plan: '") + key + "' has the wrong type");
  }
}

template <class T>
T get_value(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("plan: '") + key + "' has the wrong type");
  }
}

void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> known, std::string_view where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ValidationError("plan: unknown key '" + key + "' in " + std::string(where));
    }
  }
}

}  // namespace

std::string_view to_string(AblationCondition c) {
  switch (c) {
    case AblationCondition::TopNOnly: return "top_n_only";
    case AblationCondition::AllButTopN: return "top_n_excluded";
    case AblationCondition::RandomN: return "random_n";
  }
  return "?";
}

AblationCondition parse_ablation_condition(std::string_view text) {
  for (auto c : {AblationCondition::TopNOnly, AblationCondition::AllButTopN, AblationCondition::RandomN}) {
    if (to_string(c) == text) return c;
  }
  throw ValidationError("unknown ablation condition '" + std::string(text) + "' (expected top_n_only, top_n_excluded or random_n)");
}

void ExperimentPlan::validate() const {
  if (repetitions < 1) throw ValidationError("plan: repetitions must be at least 1");
  if (dist_thresholds.empty()) throw ValidationError("plan: no distance thresholds");
  for (int t : dist_thresholds) {
    if (t != 2 && t != 3) throw ValidationError("plan: distance threshold must be 2 or 3, got " + std::to_string(t));
  }
  if (probes.empty()) throw ValidationError("plan: no probe kinds");
  if (std::set<ProbeKind>(probes.begin(), probes.end()).size() != probes.size()) throw ValidationError("plan: repeated probe kind");
  if (sweep_from < 1) throw ValidationError("plan: sweep_from must be at least 1");
  if (sweep_to != 0 && sweep_to < sweep_from) throw ValidationError("plan: sweep_to is below sweep_from");
  for (int n : ablation_ns) {
    if (n < 1) throw ValidationError("plan: ablation head counts must be positive");
  }
  if (ablation_conditions.empty()) throw ValidationError("plan: no ablation conditions");
  for (const auto& run : holdout_runs) {
    if (run.patterns.empty() && run.lemmas.empty() && run.random_lemmas == 0) {
      throw ValidationError("plan: holdout run holds nothing out");
    }
    if (!run.lemmas.empty() && run.random_lemmas > 0) {
      throw ValidationError("plan: holdout run has both explicit and random lemmas");
    }
  }
  if (jobs < 1) throw ValidationError("plan: jobs must be at least 1");
  if (probe_threads < 1) throw ValidationError("plan: probe_threads must be at least 1");
  split_config(dist_thresholds.front(), seed).validate();
}

ProbeConfig ExperimentPlan::probe_config(ProbeKind kind, std::uint64_t probe_seed) const {
  auto cfg = ProbeConfig::defaults(kind, probe_seed);
  cfg.threads = probe_threads;
  if (const auto it = overrides.find(kind); it != overrides.end()) {
    const auto& o = it->second;
    if (o.max_iter) cfg.max_iter = *o.max_iter;
    if (o.trees) cfg.trees = *o.trees;
    if (o.hidden_sizes) cfg.hidden_sizes = *o.hidden_sizes;
    if (o.l2_strength) cfg.l2_strength = *o.l2_strength;
    if (o.standardize) cfg.standardize = *o.standardize;
  }
  return cfg;
}

SplitConfig ExperimentPlan::split_config(int dist_threshold, std::uint64_t split_seed) const {
  SplitConfig cfg;
  cfg.dist_threshold = dist_threshold;
  cfg.seed = split_seed;
  cfg.test_fraction = test_fraction;
  cfg.tolerance = tolerance;
  cfg.max_feature_share = max_feature_share;
  return cfg;
}

ExperimentPlan ExperimentPlan::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("plan: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("plan: top level must be an object");
  reject_unknown_keys(j,
                      {"languages", "dist_thresholds", "probes", "repetitions", "seed", "pool_mode", "test_fraction", "tolerance",
                       "max_feature_share", "sweep_from", "sweep_to", "ablation_ns", "ablation_conditions", "holdout_runs",
                       "overrides", "jobs", "probe_threads"},
                      "plan");
  ExperimentPlan p;
  if (j.contains("languages")) p.languages = get_list<std::string>(j, "languages");
  if (j.contains("dist_thresholds")) p.dist_thresholds = get_list<int>(j, "dist_thresholds");
  if (j.contains("probes")) {
    p.probes.clear();
    for (const auto& name : get_list<std::string>(j, "probes")) p.probes.push_back(parse_probe_kind(name));
  }
  if (j.contains("repetitions")) p.repetitions = get_value<int>(j, "repetitions");
  if (j.contains("seed")) p.seed = get_value<std::uint64_t>(j, "seed");
  if (j.contains("pool_mode")) p.pool_mode = parse_pool_mode(get_value<std::string>(j, "pool_mode"));
  if (j.contains("test_fraction")) p.test_fraction = get_value<double>(j, "test_fraction");
  if (j.contains("tolerance")) p.tolerance = get_value<double>(j, "tolerance");
  if (j.contains("max_feature_share")) p.max_feature_share = get_value<double>(j, "max_feature_share");
  if (j.contains("sweep_from")) p.sweep_from = get_value<int>(j, "sweep_from");
  if (j.contains("sweep_to")) p.sweep_to = get_value<int>(j, "sweep_to");
  if (j.contains("ablation_ns")) p.ablation_ns = get_list<int>(j, "ablation_ns");
  if (j.contains("ablation_conditions")) {
    p.ablation_conditions.clear();
    for (const auto& name : get_list<std::string>(j, "ablation_conditions")) p.ablation_conditions.push_back(parse_ablation_condition(name));
  }
  if (j.contains("holdout_runs")) {
    if (!j["holdout_runs"].is_array()) throw ValidationError("plan: 'holdout_runs' must be an array");
    for (const auto& r : j["holdout_runs"]) {
      if (!r.is_object()) throw ValidationError("plan: holdout run must be an object");
      reject_unknown_keys(r, {"patterns", "lemmas", "random_lemmas"}, "holdout run");
      HoldoutRun run;
      if (r.contains("patterns")) run.patterns = get_list<std::string>(r, "patterns");
      if (r.contains("lemmas")) run.lemmas = get_list<std::string>(r, "lemmas");
      if (r.contains("random_lemmas")) run.random_lemmas = get_value<std::size_t>(r, "random_lemmas");
      p.holdout_runs.push_back(std::move(run));
    }
  }
  if (j.contains("overrides")) {
    if (!j["overrides"].is_object()) throw ValidationError("plan: 'overrides' must be an object");
    for (const auto& [name, o] : j["overrides"].items()) {
      if (!o.is_object()) throw ValidationError("plan: override for '" + name + "' must be an object");
      reject_unknown_keys(o, {"max_iter", "trees", "hidden_sizes", "l2_strength", "standardize"}, "overrides." + name);
      ProbeOverrides po;
      if (o.contains("max_iter")) po.max_iter = get_value<int>(o, "max_iter");
      if (o.contains("trees")) po.trees = get_value<int>(o, "trees");
      if (o.contains("hidden_sizes")) po.hidden_sizes = get_list<int>(o, "hidden_sizes");
      if (o.contains("l2_strength")) po.l2_strength = get_value<double>(o, "l2_strength");
      if (o.contains("standardize")) po.standardize = get_value<bool>(o, "standardize");
      p.overrides[parse_probe_kind(name)] = std::move(po);
    }
  }
  if (j.contains("jobs")) p.jobs = get_value<int>(j, "jobs");
  if (j.contains("probe_threads")) p.probe_threads = get_value<int>(j, "probe_threads");
  p.validate();
  return p;
}

ExperimentPlan ExperimentPlan::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open plan " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string ExperimentPlan::to_json() const {
  json j;
  j["languages"] = languages;
  j["dist_thresholds"] = dist_thresholds;
  j["probes"] = json::array();
  for (auto k : probes) j["probes"].push_back(std::string(govprobe::to_string(k)));
  j["repetitions"] = repetitions;
  j["seed"] = seed;
  j["pool_mode"] = std::string(govprobe::to_string(pool_mode));
  j["test_fraction"] = test_fraction;
  j["tolerance"] = tolerance;
  j["max_feature_share"] = max_feature_share;
  j["sweep_from"] = sweep_from;
  j["sweep_to"] = sweep_to;
  j["ablation_ns"] = ablation_ns;
  j["ablation_conditions"] = json::array();
  for (auto c : ablation_conditions) j["ablation_conditions"].push_back(std::string(govprobe::to_string(c)));
  j["holdout_runs"] = json::array();
  for (const auto& r : holdout_runs) {
    j["holdout_runs"].push_back({{"patterns", r.patterns}, {"lemmas", r.lemmas}, {"random_lemmas", r.random_lemmas}});
  }
  j["overrides"] = json::object();
  for (const auto& [kind, o] : overrides) {
    json oj = json::object();
    if (o.max_iter) oj["max_iter"] = *o.max_iter;
    if (o.trees) oj["trees"] = *o.trees;
    if (o.hidden_sizes) oj["hidden_sizes"] = *o.hidden_sizes;
    if (o.l2_strength) oj["l2_strength"] = *o.l2_strength;
    if (o.standardize) oj["standardize"] = *o.standardize;
    j["overrides"][std::string(govprobe::to_string(kind))] = oj;
  }
  j["jobs"] = jobs;
  j["probe_threads"] = probe_threads;
  return j.dump(2);
}

ExperimentData::ExperimentData(std::string language, LanguageProfile profile, std::vector<Instance> instances,
                               std::span<const AttentionRecord> records, PoolMode mode)
    : language_(std::move(language)), profile_(std::move(profile)), instances_(std::move(instances)) {
  std::map<std::string_view, const AttentionRecord*> by_id;
  for (const auto& rec : records) {
    if (by_id.empty()) {
      layers_ = rec.layers;
      heads_ = rec.heads;
    } else if (rec.layers != layers_ || rec.heads != heads_) {
      throw ValidationError("attention record " + rec.instance_id + " has " + std::to_string(rec.layers) + "x" +
                            std::to_string(rec.heads) + " heads, expected " + std::to_string(layers_) + "x" + std::to_string(heads_));
    }
    by_id.emplace(rec.instance_id, &rec);
  }
  std::vector<std::string> missing;
  for (const auto& inst : instances_) {
    if (!by_id.contains(inst.instance_id)) missing.push_back(inst.instance_id);
  }
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " instance(s) without an attention record:";
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
    if (missing.size() > 20) msg += " ...";
    throw ValidationError(msg);
  }
  if (instances_.empty()) return;
  const auto mask = HeadMask::full(layers_, heads_);
  features_ = FeatureMatrix(instances_.size(), mask.size());
  for (std::size_t i = 0; i < instances_.size(); ++i) {
    const auto fv = pool(*by_id.at(instances_[i].instance_id), mode, mask);
    std::copy(fv.values.begin(), fv.values.end(), features_.row(i).begin());
  }
  index_rows();
}

ExperimentData::ExperimentData(std::string language, LanguageProfile profile, std::vector<Instance> instances,
                               FeatureMatrix features, int layers, int heads)
    : language_(std::move(language)),
      profile_(std::move(profile)),
      instances_(std::move(instances)),
      features_(std::move(features)),
      layers_(layers),
      heads_(heads) {
  if (layers < 1 || heads < 1) throw ValidationError("model dimensions must be positive");
  if (features_.rows() != instances_.size() || (features_.rows() > 0 && features_.cols() != static_cast<std::size_t>(layers * heads))) {
    throw ValidationError("feature matrix shape does not match instances and model dimensions");
  }
  index_rows();
}

void ExperimentData::index_rows() {
  for (std::size_t i = 0; i < instances_.size(); ++i) {
    if (!row_of_.emplace(instances_[i].instance_id, i).second) {
      throw ValidationError("duplicate instance_id " + instances_[i].instance_id);
    }
  }
}

std::vector<HeadCell> ExperimentData::full_head_map() const {
  const auto cells = HeadMask::full(layers_, heads_).cells();
  return {cells.begin(), cells.end()};
}

FeatureMatrix ExperimentData::matrix(std::span<const Instance> subset, const HeadMask& mask) const {
  mask.check_within(layers_, heads_);
  std::vector<std::size_t> cols;
  cols.reserve(mask.size());
  for (const auto& c : mask.cells()) cols.push_back(static_cast<std::size_t>(c.layer * heads_ + c.head));
  FeatureMatrix m(subset.size(), cols.size());
  for (std::size_t i = 0; i < subset.size(); ++i) {
    const auto it = row_of_.find(subset[i].instance_id);
    if (it == row_of_.end()) throw ValidationError("no features for instance " + subset[i].instance_id);
    const auto src = features_.row(it->second);
    auto dst = m.row(i);
    for (std::size_t j = 0; j < cols.size(); ++j) dst[j] = src[cols[j]];
  }
  return m;
}

std::vector<ResultRow> run_overall(const ExperimentPlan& plan, const ExperimentData& data) {
  const auto full = HeadMask::full(data.layers(), data.heads());
  return mask_experiment(plan, data, "overall", [&](int, int, const LabeledDataset&) {
    return std::vector<std::pair<std::string, std::pair<int, HeadMask>>>{{"all_heads", {0, full}}};
  });
}

std::vector<ResultRow> run_near_far(const ExperimentPlan& plan, const ExperimentData& data, std::span<const ResultRow> overall) {
  plan.validate();
  std::vector<ResultRow> computed;
  if (overall.empty()) {
    computed = run_overall(plan, data);
    overall = computed;
  }
  const auto summaries = summarize(overall);
  const auto splits = make_splits(plan, data);
  const auto full = HeadMask::full(data.layers(), data.heads());

  std::vector<std::vector<Instance>> subsets;  // near, far per (threshold, repetition)
  subsets.reserve(splits.thresholds.size() * static_cast<std::size_t>(plan.repetitions) * 2);
  std::vector<Cell> cells;
  for (std::size_t ti = 0; ti < splits.thresholds.size(); ++ti) {
    const int t = splits.thresholds[ti];
    const SummaryRow* best = nullptr;
    for (const auto& s : summaries) {
      if (s.experiment != "overall" || s.dist_threshold != t || s.language != data.language()) continue;
      if (std::find(plan.probes.begin(), plan.probes.end(), s.probe) == plan.probes.end()) continue;
      if (!best || s.mean.f1 > best->mean.f1) best = &s;
    }
    if (!best) throw ValidationError("no overall results for threshold " + std::to_string(t));
    log::info("near/far: best probe for threshold " + std::to_string(t) + " is " + std::string(to_string(best->probe)));
    for (int r = 0; r < plan.repetitions; ++r) {
      const auto& ds = splits.by_threshold[ti][static_cast<std::size_t>(r)];
      std::vector<Instance> near, far;
      for (const auto& inst : ds.test) (near_far(inst, t) == Range::Near ? near : far).push_back(inst);
      if (near.empty()) throw ValidationError("NEAR test subset is empty (threshold " + std::to_string(t) + ")");
      if (far.empty()) throw ValidationError("FAR test subset is empty (threshold " + std::to_string(t) + ")");
      subsets.push_back(std::move(near));
      subsets.push_back(std::move(far));
      Cell c;
      c.threshold = t;
      c.repetition = r;
      c.probe = best->probe;
      c.mask = full;
      c.train = &ds.train;
      c.tests = {&subsets[subsets.size() - 2], &subsets.back()};
      c.test_conditions = {"near", "far"};
      cells.push_back(std::move(c));
    }
  }
  return run_cells(plan, data, "near_far", cells);
}

std::vector<ResultRow> run_layer_sweep(const ExperimentPlan& plan, const ExperimentData& data) {
  const int to = plan.sweep_to == 0 ? data.layers() : plan.sweep_to;
  if (to > data.layers()) {
    throw ValidationError("layer sweep up to " + std::to_string(to) + " exceeds the model's " + std::to_string(data.layers()) + " layers");
  }
  std::vector<std::pair<std::string, std::pair<int, HeadMask>>> masks;
  for (int n = plan.sweep_from; n <= to; ++n) {
    masks.push_back({"first_n=" + std::to_string(n), {n, first_n_layers_mask(data.layers(), data.heads(), n)}});
  }
  return mask_experiment(plan, data, "layer_sweep", [&](int, int, const LabeledDataset&) { return masks; });
}

std::vector<ResultRow> run_head_ablation(const ExperimentPlan& plan, const ExperimentData& data) {
  const int total = data.layers() * data.heads();
  std::vector<int> ns = plan.ablation_ns;
  if (ns.empty()) {
    ns.resize(static_cast<std::size_t>(total));
    std::iota(ns.begin(), ns.end(), 1);
  }
  for (int n : ns) {
    if (n > total) throw ValidationError("ablation head count " + std::to_string(n) + " exceeds " + std::to_string(total) + " heads");
  }
  const auto full = HeadMask::full(data.layers(), data.heads());
  const auto all_cells = full.cells();

  return mask_experiment(plan, data, "head_ablation", [&](int t, int r, const LabeledDataset& ds) {
    Cell rank_cell;
    rank_cell.threshold = t;
    rank_cell.repetition = r;
    rank_cell.probe = ProbeKind::LogReg;
    rank_cell.mask = full;
    rank_cell.train = &ds.train;
    const auto ranking = head_ranking(fit_cell(plan, data, rank_cell));

    std::vector<std::pair<std::string, std::pair<int, HeadMask>>> masks;
    for (int n : ns) {
      const auto top = std::span<const HeadCell>(ranking).first(static_cast<std::size_t>(n));
      for (auto cond : plan.ablation_conditions) {
        std::vector<HeadCell> cells;
        switch (cond) {
          case AblationCondition::TopNOnly: cells.assign(top.begin(), top.end()); break;
          case AblationCondition::AllButTopN: {
            const std::set<HeadCell> drop(top.begin(), top.end());
            for (const auto& c : all_cells) {
              if (!drop.contains(c)) cells.push_back(c);
            }
            break;
          }
          case AblationCondition::RandomN: {
            Rng rng(derive_seed(plan.seed, {kRandomMaskTag, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(r),
                                            static_cast<std::uint64_t>(n)}));
            for (auto i : rng.sample_indices(all_cells.size(), static_cast<std::size_t>(n))) cells.push_back(all_cells[i]);
            break;
          }
        }
        const auto condition = std::string(to_string(cond)) + "=" + std::to_string(n);
        if (cells.empty()) {
          log::warn("head ablation: skipping " + condition + " (no heads left)");
          continue;
        }
        masks.push_back({condition, {n, HeadMask(std::move(cells), condition)}});
      }
    }
    return masks;
  });
}

std::vector<ResultRow> run_holdout(const ExperimentPlan& plan, const ExperimentData& data) {
  plan.validate();
  if (plan.holdout_runs.empty()) throw ValidationError("plan has no holdout runs");
  const auto full = HeadMask::full(data.layers(), data.heads());

  std::vector<LabeledDataset> splits;
  std::vector<std::vector<Instance>> overall_tests;
  std::vector<std::string> run_conditions;
  splits.reserve(plan.dist_thresholds.size() * plan.holdout_runs.size());
  overall_tests.reserve(splits.capacity());
  std::vector<std::pair<int, int>> keys;  // (threshold, run)
  for (int t : plan.dist_thresholds) {
    for (std::size_t run = 0; run < plan.holdout_runs.size(); ++run) {
      const auto& spec = plan.holdout_runs[run];
      auto cfg = plan.split_config(t, derive_seed(plan.seed, {kHoldoutSplitTag, static_cast<std::uint64_t>(t), run}));
      cfg.holdout_patterns = spec.patterns;
      cfg.holdout_lemmas = spec.lemmas;
      if (spec.random_lemmas > 0) {
        cfg.holdout_lemmas = sample_holdout_lemmas(data.instances(), spec.random_lemmas,
                                                   derive_seed(plan.seed, {kLemmaTag, static_cast<std::uint64_t>(t), run}));
      }
      auto ds = split_with_holdout(data.instances(), cfg, data.profile());
      // Leakage is impossible by construction; fail loudly if it ever happens.
      const std::set<std::string> held(cfg.holdout_lemmas.begin(), cfg.holdout_lemmas.end());
      for (const auto& inst : ds.train) {
        if (held.contains(inst.governor_lemma)) throw std::logic_error("held-out lemma " + inst.governor_lemma + " leaked into train");
      }
      if (ds.holdout.empty()) throw ValidationError("holdout run " + std::to_string(run) + " held out no instances");
      run_conditions.push_back(cfg.holdout_lemmas.empty() ? "unseen_patterns" : "unseen_governors");
      overall_tests.push_back(ds.all_test());
      splits.push_back(std::move(ds));
      keys.emplace_back(t, static_cast<int>(run));
    }
  }
  std::vector<Cell> cells;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    for (auto kind : plan.probes) {
      Cell c;
      c.threshold = keys[i].first;
      c.repetition = keys[i].second;
      c.probe = kind;
      c.mask = full;
      c.train = &splits[i].train;
      c.tests = {&splits[i].holdout, &overall_tests[i]};
      c.test_conditions = {run_conditions[i], run_conditions[i] + "_overall"};
      cells.push_back(std::move(c));
    }
  }
  return run_cells(plan, data, "holdout", cells);
}

std::vector<SummaryRow> summarize(std::span<const ResultRow> rows) {
  std::vector<SummaryRow> out;
  std::vector<std::vector<Metrics>> groups;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const SummaryRow& s) {
      return s.experiment == r.experiment && s.language == r.language && s.dist_threshold == r.dist_threshold &&
             s.probe == r.probe && s.condition == r.condition;
    });
    if (it == out.end()) {
      SummaryRow s;
      s.experiment = r.experiment;
      s.language = r.language;
      s.dist_threshold = r.dist_threshold;
      s.probe = r.probe;
      s.condition = r.condition;
      s.n = r.n;
      s.aggregation = r.experiment == "holdout" ? "micro" : "mean";
      out.push_back(std::move(s));
      groups.emplace_back();
      it = out.end() - 1;
    }
    groups[static_cast<std::size_t>(it - out.begin())].push_back(r.metrics);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].runs = static_cast<int>(groups[i].size());
    if (out[i].aggregation == "micro") {
      out[i].mean = micro_average(groups[i]);
    } else {
      out[i].mean = metrics_mean(groups[i], out[i].stddev);
    }
  }
  return out;
}

std::string results_csv(std::span<const ResultRow> rows) {
  std::string out = "experiment,language,dist_threshold,probe,condition,n,repetition,accuracy,precision,recall,f1,tp,fp,fn,tn\n";
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out += csv_field(r.experiment) + "," + csv_field(r.language) + "," + std::to_string(r.dist_threshold) + "," +
           std::string(to_string(r.probe)) + "," + csv_field(r.condition) + "," + std::to_string(r.n) + "," +
           std::to_string(r.repetition) + "," + fmt(m.accuracy) + "," + fmt(m.precision) + "," + fmt(m.recall) + "," +
           fmt(m.f1) + "," + std::to_string(m.tp) + "," + std::to_string(m.fp) + "," + std::to_string(m.fn) + "," +
           std::to_string(m.tn) + "\n";
  }
  return out;
}

std::string summary_csv(std::span<const SummaryRow> rows) {
  std::string out =
      "experiment,language,dist_threshold,probe,condition,n,aggregation,runs,accuracy,accuracy_std,precision,precision_std,"
      "recall,recall_std,f1,f1_std\n";
  for (const auto& s : rows) {
    out += csv_field(s.experiment) + "," + csv_field(s.language) + "," + std::to_string(s.dist_threshold) + "," +
           std::string(to_string(s.probe)) + "," + csv_field(s.condition) + "," + std::to_string(s.n) + "," + s.aggregation +
           "," + std::to_string(s.runs) + "," + fmt(s.mean.accuracy) + "," + fmt(s.stddev.accuracy) + "," +
           fmt(s.mean.precision) + "," + fmt(s.stddev.precision) + "," + fmt(s.mean.recall) + "," + fmt(s.stddev.recall) +
           "," + fmt(s.mean.f1) + "," + fmt(s.stddev.f1) + "\n";
  }
  return out;
}

std::string summary_json(std::span<const SummaryRow> rows) {
  json arr = json::array();
  for (const auto& s : rows) {
    const auto metrics = [](const Metrics& m) {
      return json{{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
    };
    json j = {{"experiment", s.experiment},
              {"language", s.language},
              {"dist_threshold", s.dist_threshold},
              {"probe", std::string(to_string(s.probe))},
              {"condition", s.condition},
              {"n", s.n},
              {"aggregation", s.aggregation},
              {"runs", s.runs},
              {"mean", metrics(s.mean)},
              {"std", metrics(s.stddev)},
              {"counts", {{"tp", s.mean.tp}, {"fp", s.mean.fp}, {"fn", s.mean.fn}, {"tn", s.mean.tn}}}};
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

std::string curve_csv(std::span<const SummaryRow> rows) {
  std::string out = "language,dist_threshold,probe,condition,n,f1_mean,f1_std\n";
  for (const auto& s : rows) {
    if (s.n <= 0) continue;
    out += csv_field(s.language) + "," + std::to_string(s.dist_threshold) + "," + std::string(to_string(s.probe)) + "," +
           csv_field(s.condition) + "," + std::to_string(s.n) + "," + fmt(s.mean.f1) + "," + fmt(s.stddev.f1) + "\n";
  }
  return out;
}

Projection principal_components(const FeatureMatrix& X) {
  Projection p;
  const auto n = X.rows();
  const auto d = X.cols();
  p.components.assign(2 * d, 0.0);
  p.coords.assign(2 * n, 0.0);
  p.explained_variance.assign(2, 0.0);
  if (n == 0 || d == 0) return p;

  Eigen::MatrixXd M(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = X(i, j);
  }
  M.rowwise() -= M.colwise().mean();
  const Eigen::MatrixXd cov = (M.transpose() * M) / static_cast<double>(std::max<std::size_t>(n - 1, 1));
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  const auto& values = solver.eigenvalues();
  const auto& vectors = solver.eigenvectors();
  const auto axes = std::min<std::size_t>(2, d);
  for (std::size_t k = 0; k < axes; ++k) {
    const auto col = static_cast<Eigen::Index>(d - 1 - k);
    Eigen::VectorXd v = vectors.col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    p.explained_variance[k] = std::max(0.0, values(col));
    for (std::size_t j = 0; j < d; ++j) p.components[k * d + j] = v(static_cast<Eigen::Index>(j));
    const Eigen::VectorXd proj = M * v;
    for (std::size_t i = 0; i < n; ++i) p.coords[i * 2 + k] = proj(static_cast<Eigen::Index>(i));
  }
  return p;
}

std::string projection_csv(const ExperimentData& data, std::span<const Instance> subset, bool with_pca) {
  const auto full = HeadMask::full(data.layers(), data.heads());
  std::string out = "instance_id,label";
  for (const auto& c : full.cells()) out += ",L" + std::to_string(c.layer + 1) + "H" + std::to_string(c.head + 1);
  if (with_pca) out += ",pc1,pc2";
  out += "\n";
  if (subset.empty()) return out;

  const auto X = data.matrix(subset, full);
  Projection pca;
  if (with_pca) pca = principal_components(X);
  char buf[40];
  for (std::size_t i = 0; i < subset.size(); ++i) {
    out += csv_field(subset[i].instance_id) + "," + std::string(to_string(subset[i].label));
    for (double v : X.row(i)) {
      std::snprintf(buf, sizeof buf, ",%.9g", v);
      out += buf;
    }
    if (with_pca) out += "," + fmt(pca.coords[i * 2]) + "," + fmt(pca.coords[i * 2 + 1]);
    out += "\n";
  }
  return out;
}

PermutationResult permutation_test(std::span<const double> a, std::span<const double> b, int permutations, std::uint64_t seed) {
  if (a.empty() || b.empty()) throw ValidationError("permutation test needs two non-empty samples");
  if (permutations < 1) throw ValidationError("permutation count must be positive");
  const auto mean = [](std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); };
  PermutationResult res;
  res.observed = mean(a) - mean(b);
  res.permutations = permutations;
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  Rng rng(seed);
  int extreme = 0;
  const double eps = 1e-12 * std::max(1.0, std::abs(res.observed));
  for (int i = 0; i < permutations; ++i) {
    rng.shuffle(pooled);
    const double d = mean(std::span<const double>(pooled).first(a.size())) - mean(std::span<const double>(pooled).subspan(a.size()));
    if (std::abs(d) >= std::abs(res.observed) - eps) ++extreme;
  }
  res.p_value = static_cast<double>(extreme + 1) / static_cast<double>(permutations + 1);
  return res;
}

}  // namespace govprobe

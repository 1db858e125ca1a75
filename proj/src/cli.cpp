#include "govprobe/cli.hpp"

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "govprobe/attnio.hpp"
#include "govprobe/conllu.hpp"
#include "govprobe/dataset.hpp"
#include "govprobe/error.hpp"
#include "govprobe/experiments.hpp"
#include "govprobe/govbank.hpp"
#include "govprobe/log.hpp"
#include "govprobe/matcher.hpp"
#include "govprobe/probes.hpp"
#include "govprobe/text.hpp"

namespace govprobe::cli {

namespace {

using nlohmann::json;

// JSON config file: top-level keys are global flags, nested objects are
// subcommand sections, e.g. {"seed": 7, "train": {"probe": "rf"}}.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    return dump(app, default_also).dump(2) + "\n";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      j = json::parse(input);
    } catch (const json::parse_error& e) {
      throw CLI::ConfigError(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConfigError("config: top level must be an object");
    std::vector<CLI::ConfigItem> items;
    collect(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

  static void collect(const json& j, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        auto sub = parents;
        sub.push_back(key);
        collect(value, sub, items);
        continue;
      }
      if (value.is_null()) continue;
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
  }

  static json dump(const CLI::App* app, bool default_also) {
    json j = json::object();
    for (const auto* opt : app->get_options()) {
      if (!opt->get_configurable() || opt->get_lnames().empty()) continue;
      const auto& name = opt->get_lnames().front();
      if (opt->count() > 0) {
        const auto& results = opt->results();
        if (results.size() == 1) {
          j[name] = results.front();
        } else {
          j[name] = results;
        }
      } else if (default_also && !opt->get_default_str().empty()) {
        j[name] = opt->get_default_str();
      }
    }
    for (const auto* sub : app->get_subcommands({})) {
      auto section = dump(sub, default_also);
      if (!section.empty()) j[sub->get_name()] = std::move(section);
    }
    return j;
  }
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Empty path or "-" writes to `out`.
void write_text(const std::string& path, std::string_view text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    out.flush();
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << text;
  if (!f) throw IoError("failed writing " + path);
}

// Arguments of the form @file expand to the file's non-empty, non-comment lines.
std::vector<std::string> expand_list(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    if (item.starts_with('@')) {
      std::istringstream in(read_text(item.substr(1)));
      std::string line;
      while (std::getline(in, line)) {
        const auto t = trim(line);
        if (!t.empty() && !t.starts_with('#')) out.emplace_back(t);
      }
    } else {
      out.push_back(item);
    }
  }
  return out;
}

int parse_int(std::string_view s, std::string_view what) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw ValidationError("bad " + std::string(what) + " '" + std::string(s) + "'");
  return v;
}

// "1..5,8,10..12" -> 1 2 3 4 5 8 10 11 12
std::vector<int> parse_int_ranges(std::string_view spec) {
  std::vector<int> out;
  for (auto part : split(spec, ',')) {
    part = trim(part);
    if (part.empty()) continue;
    if (const auto dots = part.find(".."); dots != std::string_view::npos) {
      const int lo = parse_int(trim(part.substr(0, dots)), "range");
      const int hi = parse_int(trim(part.substr(dots + 2)), "range");
      if (hi < lo) throw ValidationError("empty range '" + std::string(part) + "'");
      for (int v = lo; v <= hi; ++v) out.push_back(v);
    } else {
      out.push_back(parse_int(part, "number"));
    }
  }
  return out;
}

LanguageProfile load_profile(const std::string& language, const std::string& profile_path) {
  if (!profile_path.empty()) {
    auto p = LanguageProfile::load(profile_path);
    if (!language.empty() && p.language != language) {
      throw ValidationError("profile " + profile_path + " is for '" + p.language + "', not '" + language + "'");
    }
    return p;
  }
  if (language.empty()) throw ValidationError("--language or --profile is required");
  return LanguageProfile::builtin(language);
}

std::string language_of(std::span<const Instance> xs, const std::string& fallback) {
  if (!fallback.empty()) return fallback;
  return xs.empty() ? std::string() : xs.front().language;
}

struct Globals {
  std::uint64_t seed = 0;
  int jobs = 1;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* jobs_opt = nullptr;
};

struct ProbeFlags {
  std::string kind = "logreg";
  int max_iter = 0;
  int trees = 0;
  std::vector<int> hidden;
  double l2 = 0.0;
  bool standardize = false;
  int threads = 1;

  void add(CLI::App* sub) {
    sub->add_option("--probe", kind, "Probe kind: logreg, mlp1, mlp2, rf")->capture_default_str();
    sub->add_option("--max-iter", max_iter, "LOGREG iterations or MLP epochs (0 = kind default)");
    sub->add_option("--trees", trees, "RF tree count (0 = default 300)");
    sub->add_option("--hidden", hidden, "MLP hidden layer sizes");
    sub->add_option("--l2", l2, "LOGREG inverse regularization strength (0 = default 1.0)");
    sub->add_flag("--standardize", standardize, "z-score features before fitting");
    sub->add_option("--threads", threads, "RF tree-building threads")->capture_default_str();
  }

  ProbeConfig config(std::uint64_t seed) const {
    auto cfg = ProbeConfig::defaults(parse_probe_kind(kind), seed);
    if (max_iter > 0) cfg.max_iter = max_iter;
    if (trees > 0) cfg.trees = trees;
    if (!hidden.empty()) cfg.hidden_sizes = hidden;
    if (l2 > 0) cfg.l2_strength = l2;
    cfg.standardize = standardize;
    cfg.threads = threads;
    return cfg;
  }
};

// Flags shared by the experiment subcommands; each overrides the plan when given.
struct ExperimentFlags {
  std::string plan_path;
  std::string instances_path;
  std::string attention_path;
  std::string language;
  std::string profile_path;
  std::string out_prefix;
  std::string mode;
  int repetitions = 0;
  std::vector<std::string> probes;
  std::vector<int> thresholds;

  void add(CLI::App* sub) {
    sub->add_option("--plan", plan_path, "Experiment plan (JSON)");
    sub->add_option("--instances", instances_path, "Instance manifest (JSONL)")->required();
    sub->add_option("--attention", attention_path, "Attention container (ATN1)")->required();
    sub->add_option("--language", language, "Language code of the built-in profile");
    sub->add_option("--profile", profile_path, "Language profile JSON");
    sub->add_option("--out-prefix", out_prefix, "Report path prefix; results.csv to stdout when absent");
    sub->add_option("--mode", mode, "Pooling: gov_to_dep, dep_to_gov, max_both");
    sub->add_option("--repetitions", repetitions, "Repetitions per cell");
    sub->add_option("--probes", probes, "Probe kinds");
    sub->add_option("--dist-thresholds", thresholds, "Near/far thresholds (2 and/or 3)");
  }

  ExperimentPlan plan(const Globals& g) const {
    ExperimentPlan p = plan_path.empty() ? ExperimentPlan{} : ExperimentPlan::load(plan_path);
    if (g.seed_opt->count() > 0) p.seed = g.seed;
    if (g.jobs_opt->count() > 0) p.jobs = g.jobs;
    if (!mode.empty()) p.pool_mode = parse_pool_mode(mode);
    if (repetitions > 0) p.repetitions = repetitions;
    if (!probes.empty()) {
      p.probes.clear();
      for (const auto& k : probes) p.probes.push_back(parse_probe_kind(k));
    }
    if (!thresholds.empty()) p.dist_thresholds = thresholds;
    return p;
  }

  ExperimentData data(const ExperimentPlan& p) const {
    auto instances = read_instances_jsonl(instances_path);
    const auto lang = language_of(instances, language);
    auto profile = load_profile(lang, profile_path);
    const auto records = read_container(attention_path);
    log::info("loaded " + std::to_string(instances.size()) + " instances and " + std::to_string(records.size()) + " attention records");
    return ExperimentData(lang, std::move(profile), std::move(instances), records, p.pool_mode);
  }

  void write_reports(std::span<const ResultRow> rows, bool curve, std::ostream& out) const {
    const auto summary = summarize(rows);
    if (out_prefix.empty()) {
      out << results_csv(rows);
      return;
    }
    write_text(out_prefix + "results.csv", results_csv(rows), out);
    write_text(out_prefix + "summary.csv", summary_csv(summary), out);
    write_text(out_prefix + "summary.json", summary_json(summary), out);
    if (curve) write_text(out_prefix + "curve.csv", curve_csv(summary), out);
    log::info("wrote reports with prefix " + out_prefix);
  }
};

std::string metrics_json(const Metrics& m) {
  json j = {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
            {"tp", m.tp},             {"fp", m.fp},               {"fn", m.fn},         {"tn", m.tn}};
  return j.dump() + "\n";
}

LabeledDataset load_split(const std::string& path, int threshold) { return read_split_manifest(path, threshold); }

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Probe transformer attention heads for verb government.", "govprobe"};
  app.require_subcommand(1);
  app.fallthrough();
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config file (flags take precedence)")->envname("GOVPROBE_CONFIG");
  app.allow_config_extras(CLI::config_extras_mode::error);

  Globals g;
  g.seed_opt = app.add_option("--seed", g.seed, "Seed for every random decision")->capture_default_str();
  g.jobs_opt = app.add_option("--jobs", g.jobs, "Parallel experiment cells")->capture_default_str()->check(CLI::PositiveNumber);

  std::function<void()> action;

  // bank-validate
  struct {
    std::string bank, language, profile, canonical, json_out;
  } bv;
  auto* sub = app.add_subcommand("bank-validate", "Load and validate a Government Bank TSV");
  sub->add_option("--bank", bv.bank, "Bank TSV")->required();
  sub->add_option("--language", bv.language, "Language code");
  sub->add_option("--profile", bv.profile, "Language profile JSON");
  sub->add_option("--canonical-out", bv.canonical, "Write the canonical TSV here");
  sub->add_option("--json-out", bv.json_out, "Write the bank as JSON here");
  sub->callback([&] {
    action = [&] {
      const auto profile = load_profile(bv.language, bv.profile);
      const auto bank = load_bank(bv.bank, profile);
      if (!bv.canonical.empty()) write_text(bv.canonical, serialize_bank(bank), out);
      if (!bv.json_out.empty()) write_text(bv.json_out, bank_to_json(bank), out);
      log::info(bv.bank + ": " + std::to_string(bank.size()) + " rules, " + std::to_string(bank.lemmas().size()) + " lemmas");
    };
  });

  // extract-instances
  struct {
    std::string bank, language, profile, corpus_id = "corpus", out_path, rejected;
    std::vector<std::string> conllu;
  } ex;
  sub = app.add_subcommand("extract-instances", "Match CoNLL-U sentences against the bank");
  sub->add_option("--bank", ex.bank, "Bank TSV")->required();
  sub->add_option("--conllu", ex.conllu, "CoNLL-U files")->required();
  sub->add_option("--language", ex.language, "Language code");
  sub->add_option("--profile", ex.profile, "Language profile JSON");
  sub->add_option("--corpus-id", ex.corpus_id, "Prefix of instance ids")->capture_default_str();
  sub->add_option("--out", ex.out_path, "Instance manifest (JSONL); stdout when absent");
  sub->add_option("--rejected", ex.rejected, "Rejected-sentence log (JSONL)");
  sub->callback([&] {
    action = [&] {
      const auto profile = load_profile(ex.language, ex.profile);
      const auto bank = load_bank(ex.bank, profile);
      const auto cfg = MatchConfig::from_profile(profile, ex.corpus_id);
      std::vector<Instance> instances;
      std::vector<RejectedSentence> rejected;
      std::size_t sentences = 0;
      for (const auto& path : ex.conllu) {
        for (const auto& s : read_conllu(path, &rejected)) {
          ++sentences;
          auto found = match_sentence(s, bank, profile, cfg);
          instances.insert(instances.end(), std::make_move_iterator(found.begin()), std::make_move_iterator(found.end()));
        }
      }
      write_text(ex.out_path, instances_to_jsonl(instances), out);
      if (!ex.rejected.empty()) write_text(ex.rejected, rejected_to_jsonl(rejected), out);
      std::size_t pos = 0;
      for (const auto& i : instances) pos += i.label == Label::Positive ? 1 : 0;
      log::info(std::to_string(sentences) + " sentences, " + std::to_string(rejected.size()) + " rejected, " +
                std::to_string(instances.size()) + " instances (" + std::to_string(pos) + " positive)");
    };
  });

  // balance
  struct {
    std::string instances, language, profile, out_path, stats;
    int threshold = 3;
    double test_fraction = 0.2, tolerance = 0.10, max_share = 0.30;
    std::vector<std::string> patterns, lemmas;
    std::size_t random_lemmas = 0;
  } bal;
  sub = app.add_subcommand("balance", "Balance instances and split them into train/test/holdout");
  sub->add_option("--instances", bal.instances, "Instance manifest (JSONL)")->required();
  sub->add_option("--language", bal.language, "Language code (default: from instances)");
  sub->add_option("--profile", bal.profile, "Language profile JSON");
  sub->add_option("--dist-threshold", bal.threshold, "Near/far threshold (2 or 3)")->capture_default_str();
  sub->add_option("--test-fraction", bal.test_fraction, "Share of each stratum sent to test")->capture_default_str();
  sub->add_option("--tolerance", bal.tolerance, "Allowed relative gap between paired strata")->capture_default_str();
  sub->add_option("--max-feature-share", bal.max_share, "Cap on one governee class among positives (0 disables)")
      ->capture_default_str();
  sub->add_option("--holdout-patterns", bal.patterns, "Pattern selectors to hold out, e.g. case=ablative");
  sub->add_option("--holdout-lemmas", bal.lemmas, "Governor lemmas to hold out; @file reads one per line");
  sub->add_option("--random-lemmas", bal.random_lemmas, "Hold out this many governor lemmas drawn under --seed");
  sub->add_option("--out", bal.out_path, "Split manifest (JSONL); stdout when absent");
  sub->add_option("--stats", bal.stats, "Write the stats CSV here");
  sub->callback([&] {
    action = [&] {
      const auto instances = read_instances_jsonl(bal.instances);
      const auto profile = load_profile(language_of(instances, bal.language), bal.profile);
      SplitConfig cfg;
      cfg.dist_threshold = bal.threshold;
      cfg.seed = g.seed;
      cfg.test_fraction = bal.test_fraction;
      cfg.tolerance = bal.tolerance;
      cfg.max_feature_share = bal.max_share;
      cfg.holdout_patterns = bal.patterns;
      cfg.holdout_lemmas = expand_list(bal.lemmas);
      if (bal.random_lemmas > 0) {
        if (!cfg.holdout_lemmas.empty()) throw ValidationError("--random-lemmas and --holdout-lemmas are exclusive");
        cfg.holdout_lemmas = sample_holdout_lemmas(instances, bal.random_lemmas, g.seed);
      }
      const auto ds = split_with_holdout(instances, cfg, profile);
      write_text(bal.out_path, split_manifest_jsonl(ds), out);
      if (!bal.stats.empty()) write_text(bal.stats, stats_report(ds), out);
      log::info("train " + std::to_string(ds.train.size()) + ", test " + std::to_string(ds.test.size()) + ", holdout " +
                std::to_string(ds.holdout.size()));
    };
  });

  // pool
  struct {
    std::string attention, mode = "gov_to_dep", layers, out_path;
  } pl;
  sub = app.add_subcommand("pool", "Max-pool attention records into per-head feature vectors");
  sub->add_option("--attention", pl.attention, "Attention container (ATN1)")->required();
  sub->add_option("--mode", pl.mode, "gov_to_dep, dep_to_gov or max_both")->capture_default_str();
  sub->add_option("--layers", pl.layers, "Layers to keep, 1-based, e.g. 1..5 (default: all)");
  sub->add_option("--out", pl.out_path, "Feature vectors (JSONL); stdout when absent");
  sub->callback([&] {
    action = [&] {
      const auto mode = parse_pool_mode(pl.mode);
      ContainerReader reader(pl.attention);
      std::string text;
      std::size_t count = 0;
      while (auto rec = reader.next()) {
        const auto mask = pl.layers.empty() ? HeadMask::full(rec->layers, rec->heads) : parse_layer_spec(pl.layers, rec->layers, rec->heads);
        const auto fv = pool(*rec, mode, mask);
        json heads = json::array();
        for (const auto& h : fv.head_index_map) heads.push_back({h.layer, h.head});
        text += json{{"instance_id", fv.instance_id}, {"heads", heads}, {"values", fv.values}}.dump() + "\n";
        ++count;
      }
      write_text(pl.out_path, text, out);
      log::info("pooled " + std::to_string(count) + " records");
    };
  });

  // train
  ProbeFlags train_probe;
  struct {
    std::string split, attention, mode = "gov_to_dep", layers, language, out_path;
    int threshold = 3;
  } tr;
  sub = app.add_subcommand("train", "Fit a probe on the train part of a split manifest");
  sub->add_option("--split", tr.split, "Split manifest (JSONL)")->required();
  sub->add_option("--attention", tr.attention, "Attention container (ATN1)")->required();
  sub->add_option("--mode", tr.mode, "Pooling mode")->capture_default_str();
  sub->add_option("--layers", tr.layers, "Layers to use, 1-based, e.g. 1..5 (default: all)");
  sub->add_option("--dist-threshold", tr.threshold, "Near/far threshold of the split")->capture_default_str();
  sub->add_option("--out", tr.out_path, "Trained probe (JSON)")->required();
  train_probe.add(sub);
  sub->callback([&] {
    action = [&] {
      const auto ds = load_split(tr.split, tr.threshold);
      const auto records = read_container(tr.attention);
      ExperimentData data(language_of(ds.train, tr.language), LanguageProfile{}, ds.train, records, parse_pool_mode(tr.mode));
      const auto mask = tr.layers.empty() ? HeadMask::full(data.layers(), data.heads()) : parse_layer_spec(tr.layers, data.layers(), data.heads());
      std::vector<Label> y;
      for (const auto& i : ds.train) y.push_back(i.label);
      const std::vector<HeadCell> heads(mask.cells().begin(), mask.cells().end());
      const auto probe = fit(train_probe.config(g.seed), data.matrix(ds.train, mask), y, heads);
      save_probe(tr.out_path, probe);
      log::info("trained " + std::string(to_string(probe.kind)) + " on " + std::to_string(ds.train.size()) + " instances, " +
                std::to_string(heads.size()) + " heads");
    };
  });

  // eval
  struct {
    std::string probe, split, attention, mode = "gov_to_dep", subset = "test", out_path;
    int threshold = 3;
  } ev;
  sub = app.add_subcommand("eval", "Evaluate a trained probe on part of a split manifest");
  sub->add_option("--probe", ev.probe, "Trained probe (JSON)")->required();
  sub->add_option("--split", ev.split, "Split manifest (JSONL)")->required();
  sub->add_option("--attention", ev.attention, "Attention container (ATN1)")->required();
  sub->add_option("--mode", ev.mode, "Pooling mode")->capture_default_str();
  sub->add_option("--subset", ev.subset, "train, test, holdout or all_test")->capture_default_str()
      ->check(CLI::IsMember({"train", "test", "holdout", "all_test"}));
  sub->add_option("--dist-threshold", ev.threshold, "Near/far threshold of the split")->capture_default_str();
  sub->add_option("--out", ev.out_path, "Metrics (JSON); stdout when absent");
  sub->callback([&] {
    action = [&] {
      const auto probe = load_probe(ev.probe);
      const auto ds = load_split(ev.split, ev.threshold);
      std::vector<Instance> subset = ev.subset == "train" ? ds.train : ev.subset == "test" ? ds.test : ev.subset == "holdout" ? ds.holdout : ds.all_test();
      const auto records = read_container(ev.attention);
      ExperimentData data(language_of(subset, ""), LanguageProfile{}, subset, records, parse_pool_mode(ev.mode));
      if (probe.head_index_map.empty()) throw ValidationError("probe has no head index map");
      const HeadMask mask(probe.head_index_map);
      std::vector<Label> y;
      for (const auto& i : subset) y.push_back(i.label);
      write_text(ev.out_path, metrics_json(evaluate(probe, data.matrix(subset, mask), y)), out);
    };
  });

  // stats
  struct {
    std::string split, out_path;
    int threshold = 3;
  } st;
  sub = app.add_subcommand("stats", "Count instances per split, label, range and governee class");
  sub->add_option("--split", st.split, "Split manifest (JSONL)")->required();
  sub->add_option("--dist-threshold", st.threshold, "Near/far threshold")->capture_default_str();
  sub->add_option("--out", st.out_path, "CSV; stdout when absent");
  sub->callback([&] { action = [&] { write_text(st.out_path, stats_report(load_split(st.split, st.threshold)), out); }; });

  // overall
  ExperimentFlags ov;
  sub = app.add_subcommand("overall", "Overall probe performance plus the near/far breakdown of the best probe");
  ov.add(sub);
  sub->callback([&] {
    action = [&] {
      const auto plan = ov.plan(g);
      const auto data = ov.data(plan);
      auto rows = run_overall(plan, data);
      const auto nf = run_near_far(plan, data, rows);
      rows.insert(rows.end(), nf.begin(), nf.end());
      ov.write_reports(rows, false, out);
    };
  });

  // sweep-layers
  ExperimentFlags sw;
  int sweep_from = 0, sweep_to = 0;
  sub = app.add_subcommand("sweep-layers", "Probe performance using only the first N layers");
  sw.add(sub);
  sub->add_option("--from", sweep_from, "First N (default 1)");
  sub->add_option("--to", sweep_to, "Last N (default: all layers)");
  sub->callback([&] {
    action = [&] {
      auto plan = sw.plan(g);
      if (sweep_from > 0) plan.sweep_from = sweep_from;
      if (sweep_to > 0) plan.sweep_to = sweep_to;
      const auto data = sw.data(plan);
      sw.write_reports(run_layer_sweep(plan, data), true, out);
    };
  });

  // ablate-heads
  ExperimentFlags ab;
  std::string ablation_ns;
  std::vector<std::string> ablation_conditions;
  sub = app.add_subcommand("ablate-heads", "Probe performance with top-N, all-but-top-N and random-N heads");
  ab.add(sub);
  sub->add_option("--ns", ablation_ns, "Head counts, e.g. 1..10,20,50 (default: 1..L*A)");
  sub->add_option("--conditions", ablation_conditions, "top_n_only, top_n_excluded, random_n");
  sub->callback([&] {
    action = [&] {
      auto plan = ab.plan(g);
      if (!ablation_ns.empty()) plan.ablation_ns = parse_int_ranges(ablation_ns);
      if (!ablation_conditions.empty()) {
        plan.ablation_conditions.clear();
        for (const auto& c : ablation_conditions) plan.ablation_conditions.push_back(parse_ablation_condition(c));
      }
      const auto data = ab.data(plan);
      ab.write_reports(run_head_ablation(plan, data), true, out);
    };
  });

  // holdout
  ExperimentFlags ho;
  std::vector<std::string> ho_patterns, ho_lemmas;
  std::size_t ho_random = 0;
  int ho_runs = 1;
  sub = app.add_subcommand("holdout", "Generalization to unseen patterns or governor lemmas");
  ho.add(sub);
  sub->add_option("--holdout-patterns", ho_patterns, "Selectors held out together in one run, e.g. case=ablative");
  sub->add_option("--holdout-lemmas", ho_lemmas, "Governor lemmas held out in one run; @file reads one per line");
  sub->add_option("--random-lemmas", ho_random, "Hold out this many random governor lemmas per run");
  sub->add_option("--runs", ho_runs, "Runs of --random-lemmas")->capture_default_str()->check(CLI::PositiveNumber);
  sub->callback([&] {
    action = [&] {
      auto plan = ho.plan(g);
      const auto lemmas = expand_list(ho_lemmas);
      if (!ho_patterns.empty() || !lemmas.empty() || ho_random > 0) plan.holdout_runs.clear();
      if (!ho_patterns.empty() || !lemmas.empty()) plan.holdout_runs.push_back({ho_patterns, lemmas, 0});
      for (int r = 0; ho_random > 0 && r < ho_runs; ++r) plan.holdout_runs.push_back({{}, {}, ho_random});
      const auto data = ho.data(plan);
      ho.write_reports(run_holdout(plan, data), false, out);
    };
  });

  // export-projection
  struct {
    std::string instances, attention, mode = "gov_to_dep", out_path;
    bool pca = false;
  } pj;
  sub = app.add_subcommand("export-projection", "Write pooled vectors, optionally with 2-D principal components");
  sub->add_option("--instances", pj.instances, "Instance manifest or split manifest (JSONL)")->required();
  sub->add_option("--attention", pj.attention, "Attention container (ATN1)")->required();
  sub->add_option("--mode", pj.mode, "Pooling mode")->capture_default_str();
  sub->add_flag("--pca", pj.pca, "Append pc1,pc2 columns");
  sub->add_option("--out", pj.out_path, "CSV; stdout when absent");
  sub->callback([&] {
    action = [&] {
      auto instances = read_instances_jsonl(pj.instances);
      const auto records = read_container(pj.attention);
      const auto lang = language_of(instances, "");
      if (instances.empty()) {
        const int L = records.empty() ? 12 : records.front().layers;
        const int A = records.empty() ? 12 : records.front().heads;
        write_text(pj.out_path, projection_csv(ExperimentData(lang, LanguageProfile{}, {}, FeatureMatrix(), L, A), {}, pj.pca), out);
        return;
      }
      ExperimentData data(lang, LanguageProfile{}, instances, records, parse_pool_mode(pj.mode));
      write_text(pj.out_path, projection_csv(data, instances, pj.pca), out);
    };
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::FileError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 1;
  }
  if (action) action();
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  log::ScopedSink sink([&err](log::Level level, std::string_view message) {
    err << (level == log::Level::Warn ? "warning: " : "") << message << '\n';
  });
  try {
    return dispatch(args, out, err);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace govprobe::cli

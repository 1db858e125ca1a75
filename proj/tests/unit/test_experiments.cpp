#include <cmath>
#include <set>

#include "doctest.h"
#include "govprobe/error.hpp"
#include "govprobe/experiments.hpp"
#include "govprobe/log.hpp"
#include "synth.hpp"

using namespace govprobe;

namespace {

struct Small {
  synth::PlantedSet set;
  ExperimentData data;
};

const Small& small() {
  static const Small s = [] {
    synth::PlantedSpec spec;
    spec.count = 480;
    spec.layers = 3;
    spec.heads = 4;
    spec.planted = {1, 2};
    spec.lemmas = 24;
    auto set = synth::planted(spec);
    ExperimentData data("fi", LanguageProfile::builtin("fi"), set.instances, set.records, PoolMode::GovToDep);
    return Small{std::move(set), std::move(data)};
  }();
  return s;
}

ExperimentPlan plan(int reps = 2) {
  ExperimentPlan p;
  p.languages = {"fi"};
  p.probes = {ProbeKind::LogReg};
  p.repetitions = reps;
  p.seed = 7;
  return p;
}

const ResultRow& find(const std::vector<ResultRow>& rows, const std::string& condition, int rep) {
  for (const auto& r : rows) {
    if (r.condition == condition && r.repetition == rep) return r;
  }
  FAIL("missing row " << condition);
  return rows.front();
}

bool same_metrics(const Metrics& a, const Metrics& b) {
  return a.tp == b.tp && a.fp == b.fp && a.fn == b.fn && a.tn == b.tn && a.f1 == b.f1 && a.accuracy == b.accuracy;
}

}  // namespace

TEST_CASE("experiments: data pooling and lookup") {
  const auto& d = small().data;
  CHECK(d.layers() == 3);
  CHECK(d.heads() == 4);
  CHECK(d.features().cols() == 12);
  CHECK(d.full_head_map().size() == 12);
  const auto m = d.matrix(d.instances().first(5), first_n_layers_mask(3, 4, 1));
  CHECK(m.rows() == 5);
  CHECK(m.cols() == 4);
  CHECK(m(3, 2) == d.features()(3, 2));

  auto instances = small().set.instances;
  instances.push_back(synth::instance("orphan", Label::Positive, 1));
  try {
    ExperimentData bad("fi", LanguageProfile::builtin("fi"), instances, small().set.records, PoolMode::GovToDep);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("orphan") != std::string::npos);
  }
}

TEST_CASE("experiments: overall on planted data") {
  const auto rows = run_overall(plan(), small().data);
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    CHECK(r.experiment == "overall");
    CHECK(r.condition == "all_heads");
    CHECK(r.metrics.accuracy >= 0.97);
  }
  CHECK(results_csv(rows) == results_csv(run_overall(plan(), small().data)));
  auto parallel = plan();
  parallel.jobs = 3;
  CHECK(results_csv(run_overall(parallel, small().data)) == results_csv(rows));
}

TEST_CASE("experiments: one repetition summarizes to itself") {
  const auto rows = run_overall(plan(1), small().data);
  REQUIRE(rows.size() == 1);
  const auto summary = summarize(rows);
  REQUIRE(summary.size() == 1);
  CHECK(summary[0].runs == 1);
  CHECK(summary[0].aggregation == "mean");
  CHECK(summary[0].mean.f1 == rows[0].metrics.f1);
  CHECK(summary[0].mean.accuracy == rows[0].metrics.accuracy);
  CHECK(summary[0].stddev.f1 == 0.0);
}

TEST_CASE("experiments: mean and population std") {
  std::vector<ResultRow> rows(3);
  const double f1s[] = {0.5, 0.7, 0.9};
  for (int i = 0; i < 3; ++i) {
    rows[i].experiment = "overall";
    rows[i].condition = "all_heads";
    rows[i].repetition = i;
    rows[i].metrics.f1 = f1s[i];
  }
  const auto s = summarize(rows);
  REQUIRE(s.size() == 1);
  CHECK(s[0].mean.f1 == doctest::Approx(0.7));
  CHECK(s[0].stddev.f1 == doctest::Approx(std::sqrt(0.08 / 3)));
}

TEST_CASE("experiments: holdout summaries are micro-averaged") {
  Rng rng(4);
  std::vector<ResultRow> rows;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (int r = 0; r < 4; ++r) {
    ResultRow row;
    row.experiment = "holdout";
    row.condition = "unseen_governors";
    row.repetition = r;
    row.metrics = metrics_from_counts(rng.uniform_index(20), rng.uniform_index(20), rng.uniform_index(20), rng.uniform_index(20));
    tp += row.metrics.tp;
    fp += row.metrics.fp;
    fn += row.metrics.fn;
    tn += row.metrics.tn;
    rows.push_back(row);
  }
  const auto s = summarize(rows);
  REQUIRE(s.size() == 1);
  CHECK(s[0].aggregation == "micro");
  const auto pooled = metrics_from_counts(tp, fp, fn, tn);
  CHECK(s[0].mean.f1 == doctest::Approx(pooled.f1));
  CHECK(s[0].mean.tp == tp);
}

TEST_CASE("experiments: full layer sweep equals overall") {
  auto p = plan(1);
  const auto overall = run_overall(p, small().data);
  const auto sweep = run_layer_sweep(p, small().data);
  REQUIRE(sweep.size() == 3);
  CHECK(sweep[0].n == 1);
  CHECK(sweep[2].condition == "first_n=3");
  CHECK(same_metrics(sweep[2].metrics, overall[0].metrics));
  // the planted head sits in layer 2
  CHECK(sweep[0].metrics.f1 < 0.8);
  CHECK(sweep[1].metrics.f1 > 0.95);

  const auto curve = curve_csv(summarize(sweep));
  CHECK(std::count(curve.begin(), curve.end(), '\n') == 4);

  p.sweep_to = 4;
  CHECK_THROWS_AS(run_layer_sweep(p, small().data), ValidationError);
}

TEST_CASE("experiments: head ablation") {
  auto p = plan(1);
  p.ablation_ns = {1, 12};
  const auto rows = run_head_ablation(p, small().data);
  const auto overall = run_overall(p, small().data);
  CHECK(find(rows, "top_n_only=1", 0).metrics.f1 >= 0.97);
  CHECK(find(rows, "top_n_excluded=1", 0).metrics.accuracy <= 0.65);
  CHECK(same_metrics(find(rows, "top_n_only=12", 0).metrics, overall[0].metrics));
  CHECK(find(rows, "random_n=12", 0).n == 12);
  // excluding all twelve heads leaves nothing to train on
  for (const auto& r : rows) CHECK(r.condition != "top_n_excluded=12");

  p.ablation_ns = {13};
  CHECK_THROWS_AS(run_head_ablation(p, small().data), ValidationError);
}

TEST_CASE("experiments: near and far") {
  auto p = plan(1);
  p.probes = {ProbeKind::LogReg, ProbeKind::RandomForest};
  p.overrides[ProbeKind::RandomForest].trees = 20;
  const auto rows = run_near_far(p, small().data);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].condition == "near");
  CHECK(rows[1].condition == "far");
  CHECK(std::fabs(rows[0].metrics.f1 - rows[1].metrics.f1) <= 0.05);

  std::vector<Instance> near_only;
  std::vector<AttentionRecord> recs;
  for (std::size_t i = 0; i < small().set.instances.size(); ++i) {
    if (small().set.instances[i].distance <= 3) {
      near_only.push_back(small().set.instances[i]);
      recs.push_back(small().set.records[i]);
    }
  }
  const ExperimentData near_data("fi", LanguageProfile::builtin("fi"), near_only, recs, PoolMode::GovToDep);
  CHECK_THROWS_AS(run_near_far(plan(1), near_data), ValidationError);
}

TEST_CASE("experiments: holdout conditions and leakage") {
  auto p = plan(1);
  p.holdout_runs = {HoldoutRun{{}, {}, 4}, HoldoutRun{{"case=elative"}, {}, 0}};
  const auto rows = run_holdout(p, small().data);
  std::set<std::string> conditions;
  for (const auto& r : rows) conditions.insert(r.condition);
  CHECK(conditions == std::set<std::string>{"unseen_governors", "unseen_governors_overall", "unseen_patterns", "unseen_patterns_overall"});
  for (const auto& s : summarize(rows)) CHECK(s.aggregation == "micro");

  p.holdout_runs = {};
  CHECK_THROWS_AS(run_holdout(p, small().data), ValidationError);
}

TEST_CASE("experiments: plan JSON") {
  auto p = ExperimentPlan::from_json(R"({"languages": ["fi"], "probes": ["logreg", "rf"], "repetitions": 3,
    "ablation_ns": [1, 2], "holdout_runs": [{"random_lemmas": 66}], "overrides": {"rf": {"trees": 50}}})");
  CHECK(p.repetitions == 3);
  CHECK(p.probes == std::vector<ProbeKind>{ProbeKind::LogReg, ProbeKind::RandomForest});
  CHECK(p.holdout_runs.at(0).random_lemmas == 66);
  CHECK(p.probe_config(ProbeKind::RandomForest, 1).trees == 50);
  CHECK(p.probe_config(ProbeKind::LogReg, 1).max_iter == 10000);
  const auto again = ExperimentPlan::from_json(p.to_json());
  CHECK(again.to_json() == p.to_json());

  CHECK_THROWS_AS(ExperimentPlan::from_json(R"({"repetitons": 3})"), ValidationError);
  CHECK_THROWS_AS(ExperimentPlan::from_json(R"({"overrides": {"rf": {"depth": 3}}})"), ValidationError);
  CHECK_THROWS_AS(ExperimentPlan::from_json(R"({"probes": ["svm"]})"), ValidationError);
  CHECK_THROWS_AS(ExperimentPlan::from_json(R"({"repetitions": 0})"), ValidationError);
  CHECK_THROWS_AS(ExperimentPlan::from_json("{"), ValidationError);
  CHECK_THROWS_AS(ExperimentPlan::load("/nonexistent/plan.json"), IoError);
}

TEST_CASE("experiments: principal components recover a dominant axis") {
  Rng rng(6);
  const std::vector<double> axis{0.6, 0.0, -0.8};
  FeatureMatrix X(300, 3);
  for (std::size_t i = 0; i < 300; ++i) {
    const double t = rng.normal(0.0, 5.0);
    for (std::size_t j = 0; j < 3; ++j) X(i, j) = 2.0 + t * axis[j] + rng.normal(0.0, 0.1);
  }
  const auto p = principal_components(X);
  REQUIRE(p.components.size() == 6);
  // sign rule: the largest-magnitude entry of each axis is positive
  CHECK(p.components[0] == doctest::Approx(-0.6).epsilon(0.01));
  CHECK(p.components[2] == doctest::Approx(0.8).epsilon(0.01));
  double dot = 0;
  for (int j = 0; j < 3; ++j) dot += p.components[j] * p.components[3 + j];
  CHECK(std::fabs(dot) < 1e-9);
  CHECK(p.explained_variance[0] > 20 * p.explained_variance[1]);
  REQUIRE(p.coords.size() == 600);
  double mean = 0;
  for (std::size_t i = 0; i < 300; ++i) mean += p.coords[2 * i];
  CHECK(std::fabs(mean / 300) < 1e-9);
}

TEST_CASE("experiments: projection CSV") {
  const auto& d = small().data;
  const auto empty = projection_csv(d, {}, true);
  CHECK(empty.substr(0, 27) == "instance_id,label,L1H1,L1H2");
  CHECK(std::count(empty.begin(), empty.end(), '\n') == 1);
  CHECK(empty.find(",L3H4,pc1,pc2\n") != std::string::npos);
  const auto csv = projection_csv(d, d.instances().first(10), false);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 11);
  CHECK(csv.find("\nsyn:0,POSITIVE,") != std::string::npos);
}

TEST_CASE("experiments: permutation test") {
  const std::vector<double> a{0.81, 0.82, 0.80, 0.83, 0.82}, b{0.70, 0.71, 0.69, 0.72, 0.70};
  const auto r = permutation_test(a, b, 2000, 1);
  CHECK(r.observed == doctest::Approx(0.112));
  CHECK(r.p_value < 0.02);
  const auto same = permutation_test(a, a, 500, 1);
  CHECK(same.p_value == 1.0);
  CHECK(permutation_test(a, b, 2000, 1).p_value == r.p_value);
}

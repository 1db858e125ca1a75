#include <algorithm>
#include <map>
#include <set>

#include "doctest.h"
#include "govprobe/dataset.hpp"
#include "govprobe/error.hpp"
#include "govprobe/log.hpp"
#include "synth.hpp"

using namespace govprobe;
using synth::instance;

namespace {

const LanguageProfile& fi() {
  static const auto p = LanguageProfile::builtin("fi");
  return p;
}

std::map<std::string, std::size_t> strata(std::span<const Instance> items, int threshold) {
  std::map<std::string, std::size_t> n;
  for (const auto& inst : items) ++n[std::string(to_string(inst.label)) + "/" + std::string(to_string(near_far(inst, threshold)))];
  return n;
}

std::multiset<std::string> ids(std::span<const Instance> items) {
  std::multiset<std::string> out;
  for (const auto& inst : items) out.insert(inst.instance_id);
  return out;
}

}  // namespace

TEST_CASE("dataset: near_far boundaries") {
  CHECK(near_far(instance("a", Label::Positive, 4), 3) == Range::Far);
  CHECK(near_far(instance("a", Label::Positive, 3), 3) == Range::Near);
  CHECK(near_far(instance("a", Label::Positive, 3), 2) == Range::Far);
  CHECK(near_far(instance("a", Label::Positive, 1), 2) == Range::Near);
}

TEST_CASE("dataset: split config validation") {
  SplitConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.dist_threshold = 4;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.test_fraction = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.max_feature_share = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("dataset: NEAR down-sampling is uniform") {
  // 10 NEAR + 4 FAR positives, 4 + 4 negatives: NEAR positives drop to 4.
  std::vector<Instance> pool;
  for (int i = 0; i < 10; ++i) pool.push_back(instance("pn" + std::to_string(i), Label::Positive, 1, "v", "NOUN+Case:C" + std::to_string(i)));
  for (int i = 0; i < 4; ++i) pool.push_back(instance("pf" + std::to_string(i), Label::Positive, 5, "v", "NOUN+Case:F" + std::to_string(i)));
  for (int i = 0; i < 4; ++i) pool.push_back(instance("nn" + std::to_string(i), Label::Negative, 2));
  for (int i = 0; i < 4; ++i) pool.push_back(instance("nf" + std::to_string(i), Label::Negative, 6));

  SplitConfig cfg;
  cfg.max_feature_share = 0.0;
  std::map<std::string, int> hits;
  const int seeds = 4000;
  for (int seed = 0; seed < seeds; ++seed) {
    cfg.seed = static_cast<std::uint64_t>(seed);
    const auto out = balance(pool, cfg);
    const auto n = strata(out, 3);
    REQUIRE(n.at("POSITIVE/near") == 4);
    REQUIRE(n.at("POSITIVE/far") == 4);
    REQUIRE(n.at("NEGATIVE/near") == 4);
    REQUIRE(n.at("NEGATIVE/far") == 4);
    for (const auto& inst : out) ++hits[inst.instance_id];
    // survivors keep input order
    REQUIRE(std::is_sorted(out.begin(), out.end(), [&](const Instance& a, const Instance& b) {
      const auto pos = [&](const Instance& x) {
        return std::find_if(pool.begin(), pool.end(), [&](const Instance& p) { return p.instance_id == x.instance_id; }) - pool.begin();
      };
      return pos(a) < pos(b);
    }));
  }
  // Each NEAR positive survives with probability 4/10.
  for (int i = 0; i < 10; ++i) {
    const double rate = static_cast<double>(hits["pn" + std::to_string(i)]) / seeds;
    CHECK(rate == doctest::Approx(0.4).epsilon(0.1));
  }
  for (int i = 0; i < 4; ++i) CHECK(hits["pf" + std::to_string(i)] == seeds);
}

TEST_CASE("dataset: balanced input is a fixed point") {
  std::vector<Instance> pool;
  // 10/10 positives, 11/10 negatives: every gap is within 10%
  for (int i = 0; i < 20; ++i) pool.push_back(instance("a" + std::to_string(i), Label::Positive, 1 + (i % 2) * 4, "v", "NOUN+Case:C" + std::to_string(i)));
  for (int i = 0; i < 21; ++i) pool.push_back(instance("b" + std::to_string(i), Label::Negative, 1 + (i % 2) * 4));
  SplitConfig cfg;
  CHECK_FALSE(balance_violation(pool, 3, 0.1));
  CHECK(ids(balance(pool, cfg)) == ids(pool));
}

TEST_CASE("dataset: empty strata and pools are errors") {
  std::vector<Instance> pool;
  for (int i = 0; i < 4; ++i) pool.push_back(instance("p" + std::to_string(i), Label::Positive, 1 + (i % 2) * 4));
  for (int i = 0; i < 4; ++i) pool.push_back(instance("n" + std::to_string(i), Label::Negative, 1));
  SplitConfig cfg;
  cfg.max_feature_share = 0.0;
  try {
    balance(pool, cfg);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("NEGATIVE/far") != std::string::npos);
  }
  CHECK_THROWS_AS(balance(std::vector<Instance>{}, cfg), ValidationError);
}

TEST_CASE("dataset: feature cap bounds the largest governee class") {
  std::vector<Instance> pool;
  for (int i = 0; i < 60; ++i) {
    const std::string cls = i < 30 ? "NOUN+Case:Ela" : "NOUN+Case:C" + std::to_string(i % 6);
    pool.push_back(instance("p" + std::to_string(i), Label::Positive, 1 + (i % 2) * 4, "v", cls));
    pool.push_back(instance("n" + std::to_string(i), Label::Negative, 1 + (i % 2) * 4));
  }
  SplitConfig cfg;
  cfg.max_feature_share = 0.3;
  const auto out = balance(pool, cfg);
  std::map<std::string, std::size_t> classes;
  std::size_t positives = 0;
  for (const auto& inst : out) {
    if (inst.label != Label::Positive) continue;
    ++positives;
    ++classes[*inst.matched_spec_summary];
  }
  REQUIRE(positives > 0);
  for (const auto& [name, n] : classes) CHECK(static_cast<double>(n) <= 0.3 * static_cast<double>(positives) + 1e-9);
  CHECK_FALSE(balance_violation(out, 3, 0.1));
}

TEST_CASE("dataset: holdout lemmas never reach train") {
  Rng rng(5);
  const auto pool = synth::random_pool(rng, 3000, 80, 12);
  const auto lemmas = sample_holdout_lemmas(pool, 20, 9);
  CHECK(lemmas.size() == 20);
  CHECK(std::is_sorted(lemmas.begin(), lemmas.end()));
  SplitConfig cfg;
  cfg.seed = 3;
  cfg.holdout_lemmas = lemmas;
  const auto ds = split_with_holdout(pool, cfg, fi());
  const std::set<std::string> held(lemmas.begin(), lemmas.end());
  CHECK_FALSE(ds.holdout.empty());
  for (const auto& inst : ds.train) CHECK_FALSE(held.contains(inst.governor_lemma));
  for (const auto& inst : ds.test) CHECK_FALSE(held.contains(inst.governor_lemma));
  for (const auto& inst : ds.holdout) CHECK(held.contains(inst.governor_lemma));
  // train and test are disjoint
  const auto train_ids = ids(ds.train);
  for (const auto& inst : ds.test) CHECK_FALSE(train_ids.contains(inst.instance_id));
  CHECK(ds.all_test().size() == ds.test.size() + ds.holdout.size());
  CHECK_FALSE(balance_violation(ds.train, 3, 0.1));
  CHECK_FALSE(balance_violation(ds.test, 3, 0.1));
}

TEST_CASE("dataset: holdout patterns") {
  Rng rng(8);
  auto pool = synth::random_pool(rng, 2000, 40, 6);
  for (std::size_t i = 0; i < pool.size(); i += 7) {
    if (pool[i].label == Label::Positive) pool[i].matched_spec_summary = "NOUN+Case:Abl";
  }
  SplitConfig cfg;
  cfg.holdout_patterns = {"case=ablative"};
  const auto ds = split_with_holdout(pool, cfg, fi());
  std::size_t ablative = 0;
  for (const auto& inst : pool) ablative += inst.label == Label::Positive && inst.matched_spec_summary == "NOUN+Case:Abl";
  CHECK(ds.holdout.size() == ablative);
  for (const auto& inst : ds.train) CHECK(inst.matched_spec_summary != "NOUN+Case:Abl");

  cfg.holdout_patterns = {"case=translative"};
  CHECK_THROWS_AS(split_with_holdout(pool, cfg, fi()), ValidationError);
  cfg.holdout_patterns = {"colour=red"};
  CHECK_THROWS_AS(split_with_holdout(pool, cfg, fi()), ValidationError);
  cfg.holdout_patterns = {};
  cfg.holdout_lemmas = {"not-a-lemma"};
  CHECK_THROWS_AS(split_with_holdout(pool, cfg, fi()), ValidationError);
}

TEST_CASE("dataset: plain split is seeded") {
  Rng rng(13);
  const auto pool = synth::random_pool(rng, 1500, 30, 6);
  SplitConfig cfg;
  cfg.seed = 21;
  const auto a = split_with_holdout(pool, cfg, fi());
  const auto b = split_with_holdout(pool, cfg, fi());
  CHECK(a.holdout.empty());
  CHECK(ids(a.train) == ids(b.train));
  CHECK(ids(a.test) == ids(b.test));
  cfg.seed = 22;
  CHECK(ids(split_with_holdout(pool, cfg, fi()).train) != ids(a.train));
}

TEST_CASE("dataset: pattern selectors") {
  auto inf = instance("i", Label::Positive, 1, "v", "VERB+VerbForm:Inf+InfForm:3+Case:Ill");
  auto adp = instance("a", Label::Positive, 1, "taistella", "ADP+Base:puolesta+Side:POST+Case:Gen");
  adp.pattern_id = "fi:taistella:I#1";
  CHECK(PatternSelector::parse("inf_form=inf-3").matches(inf, fi()));
  CHECK_FALSE(PatternSelector::parse("inf_form=inf-1").matches(inf, fi()));
  CHECK(PatternSelector::parse("case=illative").matches(inf, fi()));
  CHECK(PatternSelector::parse("pos=VERB").matches(inf, fi()));
  CHECK(PatternSelector::parse("pos=ADPOSITION").matches(adp, fi()));
  CHECK(PatternSelector::parse("base=puolesta").matches(adp, fi()));
  CHECK(PatternSelector::parse("pattern=fi:taistella:I").matches(adp, fi()));
  CHECK(PatternSelector::parse("pattern=fi:taistella:I#1").matches(adp, fi()));
  CHECK_FALSE(PatternSelector::parse("pattern=fi:taistella:I#2").matches(adp, fi()));
  CHECK_FALSE(PatternSelector::parse("pattern=fi:taist").matches(adp, fi()));
  CHECK_FALSE(PatternSelector::parse("case=genitive").matches(instance("n", Label::Negative, 1, "v", "NOUN+Case:Gen"), fi()));
  CHECK_THROWS_AS(PatternSelector::parse("case"), ValidationError);
  CHECK_THROWS_AS(PatternSelector::parse("=x"), ValidationError);
}

TEST_CASE("dataset: stats report") {
  LabeledDataset empty;
  CHECK(stats_report(empty) == "split,label,range,pos,feature,count\n");

  LabeledDataset one;
  one.train = {instance("a", Label::Positive, 1)};
  CHECK(stats_report(one) == "split,label,range,pos,feature,count\ntrain,POSITIVE,near,NOUN,Case:Ela,1\n");

  LabeledDataset ds;
  ds.train = {instance("a", Label::Positive, 1), instance("b", Label::Positive, 5), instance("c", Label::Positive, 2),
              instance("d", Label::Negative, 4, "v", "ADP+Base:kanssa+Side:POST+Case:Gen"),
              instance("e", Label::Negative, 3, "v", "NOUN+Case:Ine")};
  CHECK(stats_report(ds) ==
        "split,label,range,pos,feature,count\n"
        "train,NEGATIVE,far,ADP,Base:kanssa+Side:POST+Case:Gen,1\n"
        "train,NEGATIVE,near,NOUN,Case:Ine,1\n"
        "train,POSITIVE,far,NOUN,Case:Ela,1\n"
        "train,POSITIVE,near,NOUN,Case:Ela,2\n");
}

TEST_CASE("dataset: split manifest round trip") {
  Rng rng(17);
  const auto pool = synth::random_pool(rng, 600, 20, 6);
  SplitConfig cfg;
  cfg.holdout_lemmas = sample_holdout_lemmas(pool, 3, 1);
  const auto ds = split_with_holdout(pool, cfg, fi());
  const auto back = parse_split_manifest(split_manifest_jsonl(ds), 3);
  CHECK(back.train == ds.train);
  CHECK(back.test == ds.test);
  CHECK(back.holdout == ds.holdout);
  CHECK_THROWS_AS(parse_split_manifest("{\"split\": \"train\"}\n", 3), ParseError);
  CHECK_THROWS_AS(read_split_manifest("/nonexistent/split.jsonl", 3), IoError);
}

#include "govprobe/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "govprobe/error.hpp"
#include "govprobe/log.hpp"
#include "govprobe/rng.hpp"
#include "govprobe/text.hpp"
#include "json_io.hpp"

namespace govprobe {

namespace {

struct Summary {
  std::string pos;
  std::map<std::string, std::string> fields;
};

Summary parse_summary(const std::optional<std::string>& text) {
  Summary out;
  if (!text || text->empty()) {
    out.pos = "-";
    return out;
  }
  const auto parts = split(*text, '+');
  out.pos = std::string(parts.front());
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const auto colon = parts[i].find(':');
    if (colon == std::string_view::npos) continue;
    out.fields[std::string(parts[i].substr(0, colon))] = std::string(parts[i].substr(colon + 1));
  }
  return out;
}

std::string feature_class(const Instance& inst) { return inst.matched_spec_summary.value_or("-"); }

bool within(std::size_t a, std::size_t b, double tolerance) {
  const double gap = a > b ? static_cast<double>(a - b) : static_cast<double>(b - a);
  return gap <= tolerance * static_cast<double>(std::min(a, b));
}

// Stratum order is fixed; it also fixes the order of random draws.
constexpr std::array<std::pair<Label, Range>, 4> kStrata{{
    {Label::Positive, Range::Near},
    {Label::Positive, Range::Far},
    {Label::Negative, Range::Near},
    {Label::Negative, Range::Far},
}};

std::size_t stratum_of(const Instance& inst, int threshold) {
  const bool far = near_far(inst, threshold) == Range::Far;
  return (inst.label == Label::Positive ? 0 : 2) + (far ? 1 : 0);
}

std::string stratum_name(std::size_t s) {
  return std::string(to_string(kStrata[s].first)) + "/" + std::string(to_string(kStrata[s].second));
}

// Down-samples positives so that no governee class exceeds `share` of them.
void apply_feature_cap(std::span<const Instance> instances, std::vector<bool>& keep, double share, Rng& rng) {
  std::map<std::string, std::vector<std::size_t>> classes;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (keep[i] && instances[i].label == Label::Positive) classes[feature_class(instances[i])].push_back(i);
  }
  if (classes.empty()) return;

  std::size_t largest = 0;
  for (const auto& [name, members] : classes) largest = std::max(largest, members.size());
  const auto feasible = [&](std::size_t cap) {
    std::size_t total = 0;
    for (const auto& [name, members] : classes) total += std::min(members.size(), cap);
    return static_cast<double>(std::min(largest, cap)) <= share * static_cast<double>(total);
  };
  if (feasible(largest)) return;
  if (!feasible(1)) {
    log::warn("feature cap of " + std::to_string(share) + " cannot be met with " + std::to_string(classes.size()) +
              " governee classes; cap skipped");
    return;
  }
  // feasible() is monotone: true for every cap below the largest feasible one.
  std::size_t lo = 1, hi = largest;
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    (feasible(mid) ? lo : hi) = mid;
  }
  for (const auto& [name, members] : classes) {
    if (members.size() <= lo) continue;
    const auto chosen = rng.sample_indices(members.size(), lo);
    std::vector<bool> selected(members.size(), false);
    for (auto c : chosen) selected[c] = true;
    for (std::size_t m = 0; m < members.size(); ++m) {
      if (!selected[m]) keep[members[m]] = false;
    }
  }
}

// Target sizes for the four strata.
std::array<std::size_t, 4> balance_targets(std::array<std::size_t, 4> n, double tol) {
  auto t = n;
  for (std::size_t label = 0; label < 2; ++label) {
    auto& near = t[2 * label];
    auto& far = t[2 * label + 1];
    if (!within(near, far, tol)) near = far = std::min(near, far);
  }
  const std::size_t pos = t[0] + t[1];
  const std::size_t neg = t[2] + t[3];
  if (!within(pos, neg, tol)) {
    const std::size_t big = pos > neg ? 0 : 2;
    const std::size_t total = std::min(pos, neg);
    std::size_t& a = t[big];
    std::size_t& b = t[big + 1];
    std::size_t new_b = std::min(b, total / 2);
    std::size_t new_a = total - new_b;
    if (new_a > a) {
      new_a = a;
      new_b = total - a;
    }
    a = new_a;
    b = new_b;
  }
  const bool ok = within(t[0], t[1], tol) && within(t[2], t[3], tol) && within(t[0] + t[1], t[2] + t[3], tol);
  if (!ok) {
    const std::size_t k = *std::min_element(t.begin(), t.end());
    t.fill(k);
  }
  return t;
}

std::vector<Instance> filter(std::span<const Instance> instances, const std::vector<bool>& keep) {
  std::vector<Instance> out;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (keep[i]) out.push_back(instances[i]);
  }
  return out;
}

}  // namespace

std::string_view to_string(Range range) { return range == Range::Far ? "far" : "near"; }

Range near_far(const Instance& inst, int dist_threshold) { return inst.distance > dist_threshold ? Range::Far : Range::Near; }

void SplitConfig::validate() const {
  if (dist_threshold != 2 && dist_threshold != 3) {
    throw ValidationError("dist_threshold must be 2 or 3, got " + std::to_string(dist_threshold));
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ValidationError("test_fraction must lie in (0, 1)");
  if (!(tolerance >= 0.0)) throw ValidationError("tolerance must be non-negative");
  if (!(max_feature_share >= 0.0 && max_feature_share <= 1.0)) throw ValidationError("max_feature_share must lie in [0, 1]");
}

PatternSelector PatternSelector::parse(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos || eq == 0 || eq + 1 == text.size()) {
    throw ValidationError("pattern selector must look like key=value: '" + std::string(text) + "'");
  }
  PatternSelector sel{std::string(trim(text.substr(0, eq))), std::string(trim(text.substr(eq + 1)))};
  static const std::set<std::string> keys{"case", "inf_form", "pos", "base", "pattern"};
  if (!keys.contains(sel.key)) throw ValidationError("unknown pattern selector key '" + sel.key + "'");
  return sel;
}

bool PatternSelector::matches(const Instance& inst, const LanguageProfile& profile) const {
  if (inst.label != Label::Positive) return false;
  const auto summary = parse_summary(inst.matched_spec_summary);
  const auto field = [&](const char* name) -> std::optional<std::string> {
    const auto it = summary.fields.find(name);
    if (it == summary.fields.end()) return std::nullopt;
    return it->second;
  };
  if (key == "case") {
    const auto c = field("Case");
    return c && profile.ud_cases(value).contains(*c);
  }
  if (key == "inf_form") {
    if (summary.pos != "VERB") return false;
    for (const auto& [name, required] : profile.infinitive_features(value)) {
      if (field(name.c_str()) != required) return false;
    }
    return true;
  }
  if (key == "pos") {
    if (value == "ADPOSITION") return summary.pos == "ADP";
    return summary.pos == value;
  }
  if (key == "base") return field("Base") == normalize_lemma(value);
  if (key == "pattern") {
    const auto& id = *inst.pattern_id;
    return id == value || (id.size() > value.size() && id.starts_with(value) && id[value.size()] == '#');
  }
  return false;
}

std::vector<Instance> LabeledDataset::all_test() const {
  std::vector<Instance> out = test;
  out.insert(out.end(), holdout.begin(), holdout.end());
  return out;
}

std::optional<std::string> balance_violation(std::span<const Instance> instances, int dist_threshold, double tolerance) {
  std::array<std::size_t, 4> n{};
  for (const auto& inst : instances) ++n[stratum_of(inst, dist_threshold)];
  std::ostringstream msg;
  if (!within(n[0], n[1], tolerance)) msg << "POSITIVE near/far " << n[0] << "/" << n[1] << "; ";
  if (!within(n[2], n[3], tolerance)) msg << "NEGATIVE near/far " << n[2] << "/" << n[3] << "; ";
  if (!within(n[0] + n[1], n[2] + n[3], tolerance)) msg << "POSITIVE/NEGATIVE " << n[0] + n[1] << "/" << n[2] + n[3];
  if (msg.str().empty()) return std::nullopt;
  return msg.str();
}

std::vector<Instance> balance(std::span<const Instance> instances, const SplitConfig& cfg) {
  cfg.validate();
  if (instances.empty()) throw ValidationError("cannot balance an empty instance pool");
  Rng rng(cfg.seed);
  std::vector<bool> keep(instances.size(), true);

  if (cfg.max_feature_share > 0.0) apply_feature_cap(instances, keep, cfg.max_feature_share, rng);

  std::array<std::vector<std::size_t>, 4> members;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (keep[i]) members[stratum_of(instances[i], cfg.dist_threshold)].push_back(i);
  }
  std::array<std::size_t, 4> sizes{};
  for (std::size_t s = 0; s < 4; ++s) {
    if (members[s].empty()) {
      throw ValidationError("stratum " + stratum_name(s) + " is empty (dist threshold " + std::to_string(cfg.dist_threshold) + ")");
    }
    sizes[s] = members[s].size();
  }
  const auto targets = balance_targets(sizes, cfg.tolerance);
  for (std::size_t s = 0; s < 4; ++s) {
    if (targets[s] == sizes[s]) continue;
    const auto chosen = rng.sample_indices(sizes[s], targets[s]);
    std::vector<bool> selected(sizes[s], false);
    for (auto c : chosen) selected[c] = true;
    for (std::size_t m = 0; m < sizes[s]; ++m) {
      if (!selected[m]) keep[members[s][m]] = false;
    }
  }
  return filter(instances, keep);
}

LabeledDataset split_with_holdout(std::span<const Instance> instances, const SplitConfig& cfg, const LanguageProfile& profile) {
  cfg.validate();
  std::set<std::string> lemmas;
  for (const auto& lemma : cfg.holdout_lemmas) lemmas.insert(normalize_lemma(lemma));
  std::vector<PatternSelector> selectors;
  for (const auto& text : cfg.holdout_patterns) selectors.push_back(PatternSelector::parse(text));

  std::map<std::string, std::size_t> lemma_hits;
  std::vector<std::size_t> selector_hits(selectors.size(), 0);
  std::vector<bool> held(instances.size(), false);
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    if (lemmas.contains(inst.governor_lemma)) {
      held[i] = true;
      ++lemma_hits[inst.governor_lemma];
    }
    for (std::size_t s = 0; s < selectors.size(); ++s) {
      if (selectors[s].matches(inst, profile)) {
        held[i] = true;
        ++selector_hits[s];
      }
    }
  }
  for (const auto& lemma : lemmas) {
    if (!lemma_hits.contains(lemma)) throw ValidationError("held-out lemma '" + lemma + "' matches no instance");
  }
  for (std::size_t s = 0; s < selectors.size(); ++s) {
    if (selector_hits[s] == 0) throw ValidationError("holdout pattern '" + selectors[s].to_string() + "' matches no instance");
  }

  LabeledDataset ds;
  ds.dist_threshold = cfg.dist_threshold;
  std::array<std::vector<std::size_t>, 4> strata;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (held[i]) {
      ds.holdout.push_back(instances[i]);
    } else {
      strata[stratum_of(instances[i], cfg.dist_threshold)].push_back(i);
    }
  }

  Rng rng(derive_seed(cfg.seed, {0x5b117}));
  std::vector<bool> in_test(instances.size(), false);
  for (auto& members : strata) {
    const std::size_t n = members.size();
    auto k = static_cast<std::size_t>(std::floor(static_cast<double>(n) * cfg.test_fraction + 0.5));
    if (k == 0 && n >= 2) k = 1;
    if (k >= n && n > 0) k = n - 1;
    for (auto c : rng.sample_indices(n, k)) in_test[members[c]] = true;
  }
  std::vector<Instance> train, test;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (held[i]) continue;
    (in_test[i] ? test : train).push_back(instances[i]);
  }

  SplitConfig train_cfg = cfg;
  train_cfg.seed = derive_seed(cfg.seed, {0x7a1});
  SplitConfig test_cfg = cfg;
  test_cfg.seed = derive_seed(cfg.seed, {0x7e57});
  try {
    ds.train = balance(train, train_cfg);
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("train split: ") + e.what());
  }
  try {
    ds.test = balance(test, test_cfg);
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("test split: ") + e.what());
  }
  return ds;
}

std::vector<std::string> sample_holdout_lemmas(std::span<const Instance> instances, std::size_t count, std::uint64_t seed) {
  std::set<std::string> unique;
  for (const auto& inst : instances) unique.insert(inst.governor_lemma);
  if (count > unique.size()) {
    throw ValidationError("cannot hold out " + std::to_string(count) + " lemmas from " + std::to_string(unique.size()));
  }
  const std::vector<std::string> all(unique.begin(), unique.end());
  Rng rng(seed);
  std::vector<std::string> out;
  for (auto i : rng.sample_indices(all.size(), count)) out.push_back(all[i]);
  return out;
}

std::string stats_report(const LabeledDataset& ds) {
  using Key = std::tuple<std::string, std::string, std::string, std::string, std::string>;
  std::map<Key, std::size_t> counts;
  const auto add = [&](std::string_view split_name, const std::vector<Instance>& items) {
    for (const auto& inst : items) {
      const auto summary = parse_summary(inst.matched_spec_summary);
      std::string feature;
      const auto& text = inst.matched_spec_summary;
      if (text && text->find('+') != std::string::npos) feature = text->substr(text->find('+') + 1);
      if (feature.empty()) feature = "-";
      ++counts[{std::string(split_name), std::string(to_string(inst.label)),
                std::string(to_string(near_far(inst, ds.dist_threshold))), summary.pos, feature}];
    }
  };
  add("train", ds.train);
  add("test", ds.test);
  add("holdout", ds.holdout);

  std::string out = "split,label,range,pos,feature,count\n";
  for (const auto& [key, n] : counts) {
    const auto& [split_name, label, range, pos, feature] = key;
    out += split_name + "," + label + "," + range + "," + pos + "," + feature + "," + std::to_string(n) + "\n";
  }
  return out;
}

std::string split_manifest_jsonl(const LabeledDataset& ds) {
  std::string out;
  const auto add = [&](const char* split_name, const std::vector<Instance>& items) {
    for (const auto& inst : items) {
      auto node = detail::instance_to_value(inst);
      node["split"] = split_name;
      out += node.dump();
      out += '\n';
    }
  };
  add("train", ds.train);
  add("test", ds.test);
  add("holdout", ds.holdout);
  return out;
}

LabeledDataset parse_split_manifest(std::string_view text, int dist_threshold) {
  LabeledDataset ds;
  ds.dist_threshold = dist_threshold;
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto node = nlohmann::json::parse(line);
      auto inst = detail::instance_from_value(node);
      const auto split_name = node.at("split").get<std::string>();
      if (split_name == "train") {
        ds.train.push_back(std::move(inst));
      } else if (split_name == "test") {
        ds.test.push_back(std::move(inst));
      } else if (split_name == "holdout") {
        ds.holdout.push_back(std::move(inst));
      } else {
        throw ValidationError("unknown split '" + split_name + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("<split manifest>", line_no, e.what());
    } catch (const ValidationError& e) {
      throw ParseError("<split manifest>", line_no, e.what());
    }
  }
  return ds;
}

LabeledDataset read_split_manifest(const std::string& path, int dist_threshold) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open split manifest " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_split_manifest(buffer.str(), dist_threshold);
}

void write_split_manifest(const std::string& path, const LabeledDataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << split_manifest_jsonl(ds);
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace govprobe

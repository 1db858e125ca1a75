#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "govprobe/language.hpp"
#include "govprobe/matcher.hpp"

namespace govprobe {

enum class Range : std::uint8_t { Near, Far };

std::string_view to_string(Range range);

/// FAR iff the governee is more than `dist_threshold` words from the governor.
Range near_far(const Instance& inst, int dist_threshold);

struct SplitConfig {
  int dist_threshold = 3;
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
  std::vector<std::string> holdout_patterns;  // "case=ablative", "inf_form=inf-3", ...
  std::vector<std::string> holdout_lemmas;
  /// Allowed relative gap between paired strata: |a - b| <= tolerance * min(a, b).
  double tolerance = 0.10;
  /// Largest share of positives one governee class may hold; 0 disables the cap.
  double max_feature_share = 0.30;

  void validate() const;
};

/// Selector over positive instances, written "key=value".
///
///   case=<bank case>        governee Case feature is one of the case's UD values
///   inf_form=<bank label>   governee carries the infinitive form's UD features
///   pos=NOUN|VERB|ADPOSITION
///   base=<adposition lemma>
///   pattern=<pattern id>    exact pattern id, or a rule id matching all its patterns
struct PatternSelector {
  std::string key;
  std::string value;

  static PatternSelector parse(std::string_view text);
  bool matches(const Instance& inst, const LanguageProfile& profile) const;
  std::string to_string() const { return key + "=" + value; }
};

struct LabeledDataset {
  int dist_threshold = 3;
  std::vector<Instance> train;
  std::vector<Instance> test;
  /// Held-out lemma/pattern instances. They belong to the test side only.
  std::vector<Instance> holdout;

  /// test followed by holdout
  std::vector<Instance> all_test() const;
};

/// Feature cap on positives, then NEAR/FAR balance within each label, then
/// POSITIVE/NEGATIVE balance, all by seeded uniform down-sampling. Survivors
/// keep their input order. Throws ValidationError naming an empty stratum.
std::vector<Instance> balance(std::span<const Instance> instances, const SplitConfig& cfg);

/// Empty when the pool meets the NEAR/FAR and POS/NEG tolerance, otherwise a description.
std::optional<std::string> balance_violation(std::span<const Instance> instances, int dist_threshold, double tolerance);

/// Moves held-out instances to `holdout`, splits the rest per (label, range)
/// stratum by test_fraction, and balances train and test independently.
LabeledDataset split_with_holdout(std::span<const Instance> instances, const SplitConfig& cfg, const LanguageProfile& profile);

/// `count` distinct governor lemmas drawn uniformly under seed, sorted.
std::vector<std::string> sample_holdout_lemmas(std::span<const Instance> instances, std::size_t count, std::uint64_t seed);

/// CSV "split,label,range,pos,feature,count", rows sorted by key.
std::string stats_report(const LabeledDataset& ds);

/// Split manifest: one instance per line with an extra "split" field
/// ("train", "test" or "holdout").
std::string split_manifest_jsonl(const LabeledDataset& ds);
LabeledDataset parse_split_manifest(std::string_view text, int dist_threshold);
LabeledDataset read_split_manifest(const std::string& path, int dist_threshold);
void write_split_manifest(const std::string& path, const LabeledDataset& ds);

}  // namespace govprobe

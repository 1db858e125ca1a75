#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "govprobe/conllu.hpp"
#include "govprobe/govbank.hpp"
#include "govprobe/language.hpp"
#include "govprobe/types.hpp"

namespace govprobe {

/// Labeled governor-governee pair.
struct Instance {
  std::string instance_id;
  std::string sent_id;
  std::string language;
  int governor_index = 0;
  int governee_index = 0;
  std::string governor_lemma;
  std::optional<std::string> pattern_id;  // present iff label == Positive
  Label label = Label::Negative;
  int distance = 0;
  /// Observed governee class, e.g. "NOUN+Case:Ela" or "ADP+Base:vastaan+Side:POST+Case:Par".
  std::optional<std::string> matched_spec_summary;

  void validate() const;
  friend bool operator==(const Instance&, const Instance&) = default;
};

struct MatchConfig {
  std::string corpus_id = "corpus";
  std::set<std::string> adjunct_deprels;
  std::set<std::string> subject_deprels;
  /// Bank case names; positives matched through a dobj spec with one of these
  /// cases produce no instance.
  std::set<std::string> excluded_object_cases;

  /// Defaults taken from the language profile.
  static MatchConfig from_profile(const LanguageProfile& profile, std::string corpus_id = "corpus");
};

/// True iff every present field of the spec holds for dependent d of sentence s.
bool spec_matches(const Sentence& s, const WordToken& d, const ComplementSpec& spec, const LanguageProfile& profile);

/// |i - j| over syntactic words. Throws std::out_of_range for invalid indices.
int distance_of(const Sentence& s, int i, int j);

/// Governee class string stored in Instance::matched_spec_summary.
std::string governee_summary(const Sentence& s, const WordToken& d);

std::string make_instance_id(std::string_view corpus_id, std::string_view sent_id, int governor, int governee);

/// Instances for every VERB token with bank rules, in (governor, governee) index order.
std::vector<Instance> match_sentence(const Sentence& s, const GovernmentBank& bank, const LanguageProfile& profile,
                                     const MatchConfig& cfg);

std::string instance_to_json(const Instance& inst);
Instance instance_from_json(std::string_view line);
std::string instances_to_jsonl(std::span<const Instance> instances);
std::vector<Instance> read_instances_jsonl(const std::string& path);
void write_instances_jsonl(const std::string& path, std::span<const Instance> instances);

}  // namespace govprobe

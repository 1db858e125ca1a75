#include "govprobe/matcher.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "govprobe/error.hpp"
#include "govprobe/text.hpp"
#include "json_io.hpp"

namespace govprobe {

namespace {

bool is_nominal(Upos upos) { return upos == Upos::NOUN || upos == Upos::PROPN || upos == Upos::PRON; }

bool listed(const std::set<std::string>& relations, const WordToken& tok) {
  return relations.contains(tok.deprel) || relations.contains(std::string(tok.base_deprel()));
}

bool case_holds(const WordToken& d, const ComplementSpec& spec, const LanguageProfile& profile) {
  if (!spec.case_name) return true;
  const auto value = d.feat("Case");
  return value && profile.ud_cases(*spec.case_name).contains(std::string(*value));
}

bool matches_with(const WordToken& d, const std::optional<CaseChild>& cc, const ComplementSpec& spec,
                  const LanguageProfile& profile) {
  switch (spec.head_pos) {
    case HeadPos::Noun:
      return is_nominal(d.upos) && !cc && case_holds(d, spec, profile);
    case HeadPos::Adposition:
      return cc && spec.base && spec.adposition_side && normalize_lemma(cc->token->lemma) == *spec.base &&
             cc->side == *spec.adposition_side && case_holds(d, spec, profile);
    case HeadPos::Verb: {
      if (d.upos != Upos::VERB || d.feat("VerbForm") != std::optional<std::string_view>("Inf")) return false;
      if (spec.infinitive_form) {
        for (const auto& [name, value] : profile.infinitive_features(*spec.infinitive_form)) {
          if (d.feat(name) != std::optional<std::string_view>(value)) return false;
        }
      }
      return case_holds(d, spec, profile);
    }
  }
  return false;
}

std::string summary_with(const WordToken& d, const std::optional<CaseChild>& cc) {
  std::string out;
  if (cc) {
    out = "ADP+Base:" + normalize_lemma(cc->token->lemma) + "+Side:" + std::string(to_string(cc->side));
  } else if (is_nominal(d.upos)) {
    out = "NOUN";
  } else if (d.upos == Upos::VERB) {
    out = "VERB";
    if (auto v = d.feat("VerbForm")) out += "+VerbForm:" + std::string(*v);
    if (auto v = d.feat("InfForm")) out += "+InfForm:" + std::string(*v);
  } else {
    out = std::string(to_string(d.upos));
  }
  if (auto c = d.feat("Case")) out += "+Case:" + std::string(*c);
  return out;
}

}  // namespace

void Instance::validate() const {
  if (governor_index == governee_index) throw ValidationError("instance " + instance_id + ": governor equals governee");
  if (distance != std::abs(governor_index - governee_index)) {
    throw ValidationError("instance " + instance_id + ": distance does not match indices");
  }
  if (pattern_id.has_value() != (label == Label::Positive)) {
    throw ValidationError("instance " + instance_id + ": pattern_id must be present exactly for positives");
  }
}

MatchConfig MatchConfig::from_profile(const LanguageProfile& profile, std::string corpus_id) {
  MatchConfig cfg;
  cfg.corpus_id = std::move(corpus_id);
  cfg.adjunct_deprels = profile.adjunct_deprels;
  cfg.subject_deprels = profile.subject_deprels;
  cfg.excluded_object_cases = profile.excluded_object_cases;
  return cfg;
}

bool spec_matches(const Sentence& s, const WordToken& d, const ComplementSpec& spec, const LanguageProfile& profile) {
  return matches_with(d, case_child(s, d.index), spec, profile);
}

int distance_of(const Sentence& s, int i, int j) {
  s.at(i);
  s.at(j);
  return std::abs(i - j);
}

std::string governee_summary(const Sentence& s, const WordToken& d) { return summary_with(d, case_child(s, d.index)); }

std::string make_instance_id(std::string_view corpus_id, std::string_view sent_id, int governor, int governee) {
  return std::string(corpus_id) + ":" + std::string(sent_id) + ":" + std::to_string(governor) + ":" + std::to_string(governee);
}

std::vector<Instance> match_sentence(const Sentence& s, const GovernmentBank& bank, const LanguageProfile& profile,
                                     const MatchConfig& cfg) {
  std::vector<Instance> out;
  for (const auto& verb : s.tokens()) {
    if (verb.upos != Upos::VERB) continue;
    const auto rules = bank.rules_for(verb.lemma);
    if (rules.empty()) continue;

    for (const auto* dep : dependents(s, verb.index)) {
      if (listed(cfg.subject_deprels, *dep) || listed(cfg.adjunct_deprels, *dep)) continue;
      const auto cc = case_child(s, dep->index);

      bool matched = false;
      std::optional<std::string> pattern;
      for (const auto* rule : rules) {
        for (std::size_t k = 0; k < rule->complements.size() && !pattern; ++k) {
          const auto& spec = rule->complements[k];
          if (!matches_with(*dep, cc, spec, profile)) continue;
          matched = true;
          const bool excluded = spec.is_direct_object && spec.case_name && cfg.excluded_object_cases.contains(*spec.case_name);
          if (!excluded) pattern = rule->pattern_id(k);
        }
        if (pattern) break;
      }
      if (matched && !pattern) continue;  // only excluded object specs matched
      if (!matched && !is_nominal(dep->upos) && !cc) continue;

      Instance inst;
      inst.instance_id = make_instance_id(cfg.corpus_id, s.sent_id(), verb.index, dep->index);
      inst.sent_id = s.sent_id();
      inst.language = bank.language();
      inst.governor_index = verb.index;
      inst.governee_index = dep->index;
      inst.governor_lemma = normalize_lemma(verb.lemma);
      inst.pattern_id = pattern;
      inst.label = pattern ? Label::Positive : Label::Negative;
      inst.distance = std::abs(verb.index - dep->index);
      inst.matched_spec_summary = summary_with(*dep, cc);
      out.push_back(std::move(inst));
    }
  }
  return out;
}

namespace detail {

nlohmann::json instance_to_value(const Instance& inst) {
  return nlohmann::json{
      {"instance_id", inst.instance_id},
      {"sent_id", inst.sent_id},
      {"language", inst.language},
      {"governor_index", inst.governor_index},
      {"governee_index", inst.governee_index},
      {"governor_lemma", inst.governor_lemma},
      {"pattern_id", inst.pattern_id ? nlohmann::json(*inst.pattern_id) : nlohmann::json(nullptr)},
      {"label", std::string(to_string(inst.label))},
      {"distance", inst.distance},
      {"matched_spec_summary",
       inst.matched_spec_summary ? nlohmann::json(*inst.matched_spec_summary) : nlohmann::json(nullptr)},
  };
}

Instance instance_from_value(const nlohmann::json& node) {
  Instance inst;
  try {
    inst.instance_id = node.at("instance_id").get<std::string>();
    inst.sent_id = node.at("sent_id").get<std::string>();
    inst.language = node.at("language").get<std::string>();
    inst.governor_index = node.at("governor_index").get<int>();
    inst.governee_index = node.at("governee_index").get<int>();
    inst.governor_lemma = node.at("governor_lemma").get<std::string>();
    if (node.contains("pattern_id") && !node.at("pattern_id").is_null()) inst.pattern_id = node.at("pattern_id").get<std::string>();
    inst.label = parse_label(node.at("label").get<std::string>());
    inst.distance = node.at("distance").get<int>();
    if (node.contains("matched_spec_summary") && !node.at("matched_spec_summary").is_null()) {
      inst.matched_spec_summary = node.at("matched_spec_summary").get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("instance record: ") + e.what());
  }
  inst.validate();
  return inst;
}

}  // namespace detail

std::string instance_to_json(const Instance& inst) { return detail::instance_to_value(inst).dump(); }

Instance instance_from_json(std::string_view line) {
  nlohmann::json node;
  try {
    node = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("instance JSON: ") + e.what());
  }
  return detail::instance_from_value(node);
}

std::string instances_to_jsonl(std::span<const Instance> instances) {
  std::string out;
  for (const auto& inst : instances) {
    out += instance_to_json(inst);
    out += '\n';
  }
  return out;
}

std::vector<Instance> read_instances_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open instance manifest " + path);
  std::vector<Instance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      out.push_back(instance_from_json(line));
    } catch (const ValidationError& e) {
      throw ParseError(path, line_no, e.what());
    }
  }
  return out;
}

void write_instances_jsonl(const std::string& path, std::span<const Instance> instances) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << instances_to_jsonl(instances);
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace govprobe

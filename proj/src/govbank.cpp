#include "govprobe/govbank.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <sstream>

#include <json.hpp>

#include "govprobe/error.hpp"
#include "govprobe/text.hpp"

namespace govprobe {

namespace {

constexpr std::size_t kBankColumns = 9;

std::optional<std::string> optional_field(std::string_view value) {
  if (value.empty()) return std::nullopt;
  return std::string(value);
}

std::string_view or_empty(const std::optional<std::string>& value) { return value ? std::string_view(*value) : std::string_view(); }

void check_labels(const ComplementSpec& spec, const LanguageProfile& profile) {
  if (spec.case_name && !profile.knows_case(*spec.case_name)) {
    throw ValidationError("unknown case label '" + *spec.case_name + "' for language " + profile.language);
  }
  if (spec.infinitive_form && !profile.knows_infinitive_form(*spec.infinitive_form)) {
    throw ValidationError("unknown infinitive form '" + *spec.infinitive_form + "' for language " + profile.language);
  }
}

}  // namespace

std::string_view to_string(HeadPos pos) {
  switch (pos) {
    case HeadPos::Noun:
      return "NOUN";
    case HeadPos::Verb:
      return "VERB";
    case HeadPos::Adposition:
      return "ADPOSITION";
  }
  return "?";
}

std::string_view to_string(AdpositionSide side) { return side == AdpositionSide::Pre ? "PRE" : "POST"; }

HeadPos parse_head_pos(std::string_view text) {
  if (text == "NOUN") return HeadPos::Noun;
  if (text == "VERB") return HeadPos::Verb;
  if (text == "ADPOSITION") return HeadPos::Adposition;
  throw ValidationError("unknown head_pos '" + std::string(text) + "'");
}

AdpositionSide parse_side(std::string_view text) {
  if (text == "PRE") return AdpositionSide::Pre;
  if (text == "POST") return AdpositionSide::Post;
  throw ValidationError("unknown adposition_side '" + std::string(text) + "'");
}

void ComplementSpec::validate() const {
  const bool adposition = head_pos == HeadPos::Adposition;
  if (adposition != base.has_value() || adposition != adposition_side.has_value()) {
    throw ValidationError("base and adposition_side must be given exactly for ADPOSITION complements: " + describe());
  }
  if (infinitive_form && head_pos != HeadPos::Verb) {
    throw ValidationError("infinitive_form is only allowed on VERB complements: " + describe());
  }
  if (!case_name && !base && !infinitive_form) {
    throw ValidationError("complement needs at least one of case, base, infinitive_form");
  }
}

std::string ComplementSpec::describe() const {
  std::string out;
  switch (head_pos) {
    case HeadPos::Noun:
      out = "Noun";
      break;
    case HeadPos::Verb:
      out = "Verb";
      break;
    case HeadPos::Adposition:
      out = adposition_side == AdpositionSide::Post ? "Postposition" : "Preposition";
      break;
  }
  if (infinitive_form) out += " + Inf_Form:" + *infinitive_form;
  if (base) out += " + Base:" + *base;
  if (case_name) out += " + Case:" + *case_name;
  return out;
}

std::string GovernmentRule::pattern_id(std::size_t ordinal) const { return rule_id + "#" + std::to_string(ordinal + 1); }

void GovernmentRule::validate() const {
  if (lemma.empty()) throw ValidationError("rule " + rule_id + " has an empty lemma");
  if (complements.empty()) throw ValidationError("rule " + rule_id + " has no complements");
  const auto objects = std::count_if(complements.begin(), complements.end(), [](const auto& c) { return c.is_direct_object; });
  if (transitive && objects != 1) {
    throw ValidationError("transitive rule " + rule_id + " needs exactly one dobj complement, has " + std::to_string(objects));
  }
  if (!transitive && objects != 0) throw ValidationError("intransitive rule " + rule_id + " has a dobj complement");
  for (std::size_t i = 0; i < complements.size(); ++i) {
    complements[i].validate();
    for (std::size_t j = 0; j < i; ++j) {
      if (complements[i] == complements[j]) {
        throw ValidationError("rule " + rule_id + " lists complement " + complements[i].describe() + " twice");
      }
    }
  }
}

std::string make_rule_id(std::string_view language, std::string_view lemma, bool transitive) {
  return std::string(language) + ":" + std::string(lemma) + ":" + (transitive ? "T" : "I");
}

GovernmentBank::GovernmentBank(std::string language, std::vector<GovernmentRule> rules, const LanguageProfile& profile)
    : language_(std::move(language)), rules_(std::move(rules)) {
  if (language_ != profile.language) {
    throw ValidationError("bank language " + language_ + " does not match profile " + profile.language);
  }
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    auto& rule = rules_[i];
    if (rule.language != language_) {
      throw ValidationError("rule " + rule.rule_id + " has language " + rule.language + ", bank is " + language_);
    }
    if (rule.rule_id.empty()) throw ValidationError("rule for lemma '" + rule.lemma + "' has an empty rule_id");
    rule.lemma = normalize_lemma(rule.lemma);
    rule.validate();
    for (const auto& spec : rule.complements) check_labels(spec, profile);
    if (!by_id_.emplace(rule.rule_id, i).second) throw ValidationError("duplicate rule_id " + rule.rule_id);
    by_lemma_[rule.lemma].push_back(i);
  }
}

std::vector<const GovernmentRule*> GovernmentBank::rules_for(std::string_view lemma) const {
  std::vector<const GovernmentRule*> out;
  const auto it = by_lemma_.find(normalize_lemma(lemma));
  if (it == by_lemma_.end()) return out;
  for (std::size_t i : it->second) out.push_back(&rules_[i]);
  return out;
}

const GovernmentRule* GovernmentBank::find_rule(std::string_view rule_id) const {
  const auto it = by_id_.find(rule_id);
  return it == by_id_.end() ? nullptr : &rules_[it->second];
}

std::vector<std::string> GovernmentBank::lemmas() const {
  std::vector<std::string> out;
  for (const auto& [lemma, ids] : by_lemma_) out.push_back(lemma);
  return out;
}

GovernmentBank parse_bank_tsv(std::istream& in, const LanguageProfile& profile, std::string_view source) {
  const std::string src(source);
  std::vector<GovernmentRule> rules;
  std::map<std::pair<std::string, bool>, std::size_t> group;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line.front() == '#') continue;

    const auto cols = split(line, '\t');
    if (cols.size() != kBankColumns) {
      throw ParseError(src, line_no, "expected 9 tab-separated columns, found " + std::to_string(cols.size()));
    }
    try {
      if (cols[0] != profile.language) {
        throw ValidationError("language '" + std::string(cols[0]) + "' does not match " + profile.language);
      }
      const std::string lemma = normalize_lemma(cols[1]);
      if (lemma.empty()) throw ValidationError("empty lemma");
      bool transitive = false;
      if (cols[2] == "T") {
        transitive = true;
      } else if (cols[2] != "I") {
        throw ValidationError("transitivity must be T or I, got '" + std::string(cols[2]) + "'");
      }
      ComplementSpec spec;
      if (cols[3] == "dobj") {
        spec.is_direct_object = true;
      } else if (cols[3] != "arg") {
        throw ValidationError("slot must be dobj or arg, got '" + std::string(cols[3]) + "'");
      }
      spec.head_pos = parse_head_pos(cols[4]);
      spec.case_name = optional_field(cols[5]);
      spec.base = optional_field(cols[6]);
      if (spec.base) spec.base = normalize_lemma(*spec.base);
      if (!cols[7].empty()) spec.adposition_side = parse_side(cols[7]);
      spec.infinitive_form = optional_field(cols[8]);
      spec.validate();
      check_labels(spec, profile);

      const auto [it, inserted] = group.try_emplace({lemma, transitive}, rules.size());
      if (inserted) {
        GovernmentRule rule;
        rule.language = profile.language;
        rule.lemma = lemma;
        rule.transitive = transitive;
        rule.rule_id = make_rule_id(profile.language, lemma, transitive);
        rules.push_back(std::move(rule));
      }
      rules[it->second].complements.push_back(std::move(spec));
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ValidationError(src + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return GovernmentBank(profile.language, std::move(rules), profile);
}

GovernmentBank load_bank(const std::string& path, const LanguageProfile& profile) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open bank file " + path);
  return parse_bank_tsv(in, profile, path);
}

std::string serialize_bank(const GovernmentBank& bank) {
  std::vector<const GovernmentRule*> ordered;
  for (const auto& rule : bank.rules()) ordered.push_back(&rule);
  std::sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) { return a->rule_id < b->rule_id; });

  std::string out;
  for (const auto* rule : ordered) {
    for (const auto& spec : rule->complements) {
      out += rule->language;
      out += '\t';
      out += rule->lemma;
      out += '\t';
      out += rule->transitive ? "T" : "I";
      out += '\t';
      out += spec.is_direct_object ? "dobj" : "arg";
      out += '\t';
      out += to_string(spec.head_pos);
      out += '\t';
      out += or_empty(spec.case_name);
      out += '\t';
      out += or_empty(spec.base);
      out += '\t';
      if (spec.adposition_side) out += to_string(*spec.adposition_side);
      out += '\t';
      out += or_empty(spec.infinitive_form);
      out += '\n';
    }
  }
  return out;
}

namespace {

nlohmann::json nullable(const std::optional<std::string>& value) { return value ? nlohmann::json(*value) : nlohmann::json(nullptr); }

std::optional<std::string> optional_string(const nlohmann::json& node, const char* key) {
  if (!node.contains(key) || node.at(key).is_null()) return std::nullopt;
  auto value = node.at(key).get<std::string>();
  if (value.empty()) return std::nullopt;
  return value;
}

}  // namespace

std::string bank_to_json(const GovernmentBank& bank) {
  nlohmann::json rules = nlohmann::json::array();
  for (const auto& rule : bank.rules()) {
    nlohmann::json complements = nlohmann::json::array();
    for (const auto& spec : rule.complements) {
      complements.push_back({
          {"slot", spec.is_direct_object ? "dobj" : "arg"},
          {"head_pos", std::string(to_string(spec.head_pos))},
          {"case", nullable(spec.case_name)},
          {"base", nullable(spec.base)},
          {"adposition_side", spec.adposition_side ? nlohmann::json(std::string(to_string(*spec.adposition_side))) : nlohmann::json(nullptr)},
          {"infinitive_form", nullable(spec.infinitive_form)},
      });
    }
    rules.push_back({
        {"rule_id", rule.rule_id},
        {"language", rule.language},
        {"lemma", rule.lemma},
        {"transitivity", rule.transitive ? "T" : "I"},
        {"complements", std::move(complements)},
    });
  }
  nlohmann::json doc{{"language", bank.language()}, {"rules", std::move(rules)}};
  return doc.dump(2) + "\n";
}

GovernmentBank bank_from_json(std::string_view text, const LanguageProfile& profile) {
  std::vector<GovernmentRule> rules;
  std::string language;
  try {
    const auto doc = nlohmann::json::parse(text);
    language = doc.at("language").get<std::string>();
    for (const auto& node : doc.at("rules")) {
      GovernmentRule rule;
      rule.rule_id = node.at("rule_id").get<std::string>();
      rule.language = node.at("language").get<std::string>();
      rule.lemma = node.at("lemma").get<std::string>();
      const auto transitivity = node.at("transitivity").get<std::string>();
      if (transitivity != "T" && transitivity != "I") throw ValidationError("transitivity must be T or I in " + rule.rule_id);
      rule.transitive = transitivity == "T";
      for (const auto& c : node.at("complements")) {
        ComplementSpec spec;
        const auto slot = c.at("slot").get<std::string>();
        if (slot != "dobj" && slot != "arg") throw ValidationError("slot must be dobj or arg in " + rule.rule_id);
        spec.is_direct_object = slot == "dobj";
        spec.head_pos = parse_head_pos(c.at("head_pos").get<std::string>());
        spec.case_name = optional_string(c, "case");
        spec.base = optional_string(c, "base");
        if (auto side = optional_string(c, "adposition_side")) spec.adposition_side = parse_side(*side);
        spec.infinitive_form = optional_string(c, "infinitive_form");
        rule.complements.push_back(std::move(spec));
      }
      rules.push_back(std::move(rule));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bank JSON: ") + e.what());
  }
  return GovernmentBank(language, std::move(rules), profile);
}

}  // namespace govprobe

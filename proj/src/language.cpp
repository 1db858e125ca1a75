#include "govprobe/language.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "govprobe/error.hpp"

namespace govprobe {

namespace detail {
// Generated from data/languages/*.json at configure time.
const std::map<std::string, std::string_view>& builtin_profile_sources();
}  // namespace detail

namespace {

std::set<std::string> string_set(const nlohmann::json& node, std::string_view key, std::string_view source) {
  std::set<std::string> out;
  if (!node.contains(key)) return out;
  const auto& list = node.at(std::string(key));
  if (!list.is_array()) throw ValidationError(std::string(source) + ": '" + std::string(key) + "' must be an array");
  for (const auto& item : list) out.insert(item.get<std::string>());
  return out;
}

}  // namespace

const std::set<std::string>& LanguageProfile::ud_cases(std::string_view name) const {
  const auto it = cases.find(std::string(name));
  if (it == cases.end()) throw ValidationError("unknown case label '" + std::string(name) + "' for language " + language);
  return it->second;
}

const std::map<std::string, std::string>& LanguageProfile::infinitive_features(std::string_view label) const {
  const auto it = infinitive_forms.find(std::string(label));
  if (it == infinitive_forms.end()) {
    throw ValidationError("unknown infinitive form '" + std::string(label) + "' for language " + language);
  }
  return it->second;
}

LanguageProfile LanguageProfile::from_json_text(std::string_view text, std::string_view source) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string(source) + ": " + e.what());
  }
  LanguageProfile profile;
  try {
    profile.language = doc.at("language").get<std::string>();
    for (const auto& [name, values] : doc.at("cases").items()) {
      auto& accepted = profile.cases[name];
      for (const auto& v : values) accepted.insert(v.get<std::string>());
      if (accepted.empty()) throw ValidationError(std::string(source) + ": case '" + name + "' maps to nothing");
    }
    if (doc.contains("infinitive_forms")) {
      for (const auto& [label, feats] : doc.at("infinitive_forms").items()) {
        auto& required = profile.infinitive_forms[label];
        for (const auto& [k, v] : feats.items()) required[k] = v.get<std::string>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string(source) + ": " + e.what());
  }
  profile.adjunct_deprels = string_set(doc, "adjunct_deprels", source);
  profile.subject_deprels = string_set(doc, "subject_deprels", source);
  profile.excluded_object_cases = string_set(doc, "excluded_object_cases", source);
  for (const auto& name : profile.excluded_object_cases) {
    if (!profile.knows_case(name)) {
      throw ValidationError(std::string(source) + ": excluded object case '" + name + "' is not in the case list");
    }
  }
  return profile;
}

LanguageProfile LanguageProfile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open language profile " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_json_text(buffer.str(), path);
}

LanguageProfile LanguageProfile::builtin(std::string_view language) {
  const auto& sources = detail::builtin_profile_sources();
  const auto it = sources.find(std::string(language));
  if (it == sources.end()) throw ValidationError("no built-in language profile for '" + std::string(language) + "'");
  return from_json_text(it->second, "builtin:" + it->first);
}

std::vector<std::string> LanguageProfile::builtin_languages() {
  std::vector<std::string> out;
  for (const auto& [code, text] : detail::builtin_profile_sources()) out.push_back(code);
  return out;
}

}  // namespace govprobe

#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace govprobe {

/// Per-language vocabulary that ties Government Bank labels to treebank features.
///
/// Profiles are JSON documents (see data/languages/). The fi and ru profiles
/// are compiled into the library; any other language is loaded from a file.
struct LanguageProfile {
  std::string language;
  /// bank case name ("elative") -> accepted UD Case values ({"Ela"})
  std::map<std::string, std::set<std::string>> cases;
  /// bank infinitive label ("inf-3") -> required UD features ({VerbForm: Inf, InfForm: 3})
  std::map<std::string, std::map<std::string, std::string>> infinitive_forms;
  std::set<std::string> adjunct_deprels;
  std::set<std::string> subject_deprels;
  /// direct-object cases whose instances are left out of the data
  std::set<std::string> excluded_object_cases;

  bool knows_case(std::string_view name) const { return cases.contains(std::string(name)); }
  bool knows_infinitive_form(std::string_view label) const { return infinitive_forms.contains(std::string(label)); }

  /// Throws ValidationError for an unknown name.
  const std::set<std::string>& ud_cases(std::string_view name) const;
  const std::map<std::string, std::string>& infinitive_features(std::string_view label) const;

  static LanguageProfile from_json_text(std::string_view text, std::string_view source = "<profile>");
  static LanguageProfile load(const std::string& path);
  static LanguageProfile builtin(std::string_view language);
  static std::vector<std::string> builtin_languages();
};

}  // namespace govprobe

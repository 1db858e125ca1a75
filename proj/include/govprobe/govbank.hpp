#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "govprobe/language.hpp"

namespace govprobe {

enum class HeadPos : std::uint8_t { Noun, Verb, Adposition };
enum class AdpositionSide : std::uint8_t { Pre, Post };

std::string_view to_string(HeadPos pos);
std::string_view to_string(AdpositionSide side);
HeadPos parse_head_pos(std::string_view text);
AdpositionSide parse_side(std::string_view text);

/// One expected complement of a governor verb.
struct ComplementSpec {
  HeadPos head_pos = HeadPos::Noun;
  std::optional<std::string> case_name;  // bank vocabulary, e.g. "elative"
  std::optional<std::string> base;       // adposition lemma
  std::optional<AdpositionSide> adposition_side;
  std::optional<std::string> infinitive_form;
  bool is_direct_object = false;

  /// Structural invariants (field presence by head_pos). Throws ValidationError.
  void validate() const;
  /// "Noun + Case:elative" style rendering used in diagnostics.
  std::string describe() const;

  friend bool operator==(const ComplementSpec&, const ComplementSpec&) = default;
};

struct GovernmentRule {
  std::string language;
  std::string lemma;  // normalized
  bool transitive = false;
  std::vector<ComplementSpec> complements;
  std::string rule_id;

  /// pattern id of the complement at position `ordinal` (0-based), "<rule_id>#<ordinal+1>"
  std::string pattern_id(std::size_t ordinal) const;
  void validate() const;

  friend bool operator==(const GovernmentRule&, const GovernmentRule&) = default;
};

/// Rule id assigned to rows grouped by (language, lemma, transitivity): "fi:ajatella:T".
std::string make_rule_id(std::string_view language, std::string_view lemma, bool transitive);

/// Immutable, validated set of government rules with a lemma index.
class GovernmentBank {
 public:
  GovernmentBank() = default;
  /// Validates every rule (ids unique, spec invariants, case and infinitive
  /// labels known to the profile) and builds the lemma index.
  GovernmentBank(std::string language, std::vector<GovernmentRule> rules, const LanguageProfile& profile);

  const std::string& language() const noexcept { return language_; }
  std::span<const GovernmentRule> rules() const noexcept { return rules_; }
  std::size_t size() const noexcept { return rules_.size(); }
  bool empty() const noexcept { return rules_.empty(); }

  /// Rules for a lemma after normalization, in bank order. Empty when absent.
  std::vector<const GovernmentRule*> rules_for(std::string_view lemma) const;
  const GovernmentRule* find_rule(std::string_view rule_id) const;
  std::vector<std::string> lemmas() const;

 private:
  std::string language_;
  std::vector<GovernmentRule> rules_;
  std::map<std::string, std::vector<std::size_t>, std::less<>> by_lemma_;
  std::map<std::string, std::size_t, std::less<>> by_id_;
};

/// Parses the 9-column bank TSV. Rows sharing (lemma, transitivity) form one
/// rule, with complements in file order; rules keep first-appearance order.
GovernmentBank parse_bank_tsv(std::istream& in, const LanguageProfile& profile, std::string_view source = "<bank>");
GovernmentBank load_bank(const std::string& path, const LanguageProfile& profile);

/// Canonical TSV: no comments, rules sorted by rule_id, one row per complement.
std::string serialize_bank(const GovernmentBank& bank);

std::string bank_to_json(const GovernmentBank& bank);
GovernmentBank bank_from_json(std::string_view text, const LanguageProfile& profile);

}  // namespace govprobe

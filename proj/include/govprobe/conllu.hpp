#pragma once

#include <cstdint>
#include <fstream>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "govprobe/govbank.hpp"

namespace govprobe {

/// Universal Dependencies v2 part-of-speech tags.
enum class Upos : std::uint8_t {
  ADJ, ADP, ADV, AUX, CCONJ, DET, INTJ, NOUN, NUM, PART, PRON, PROPN, PUNCT, SCONJ, SYM, VERB, X
};

std::string_view to_string(Upos upos);
std::optional<Upos> parse_upos(std::string_view text);

struct WordToken {
  int index = 0;  // 1-based syntactic word position
  std::string form;
  std::string lemma;
  Upos upos = Upos::X;
  std::string xpos;  // kept verbatim for the diagnostic writer
  std::map<std::string, std::string> feats;
  int head = 0;  // 0 = root
  std::string deprel;
  std::string deps;
  std::string misc;

  std::optional<std::string_view> feat(std::string_view name) const;
  /// deprel without its subtype: "obl:tmod" -> "obl"
  std::string_view base_deprel() const;
};

class Sentence {
 public:
  Sentence() = default;
  /// Checks contiguity of indices, head range, head != index and at least one root.
  /// Throws ValidationError.
  Sentence(std::string sent_id, std::vector<WordToken> tokens, std::optional<std::string> text = std::nullopt);

  const std::string& sent_id() const noexcept { return sent_id_; }
  const std::optional<std::string>& text() const noexcept { return text_; }
  std::span<const WordToken> tokens() const noexcept { return tokens_; }
  std::size_t size() const noexcept { return tokens_.size(); }

  /// Token at a 1-based index; throws std::out_of_range for an invalid index.
  const WordToken& at(int index) const;
  bool valid_index(int index) const noexcept { return index >= 1 && index <= static_cast<int>(tokens_.size()); }

 private:
  std::string sent_id_;
  std::optional<std::string> text_;
  std::vector<WordToken> tokens_;
};

/// Dependents of token i (head == i) in index order.
std::vector<const WordToken*> dependents(const Sentence& s, int index);

struct CaseChild {
  const WordToken* token = nullptr;
  AdpositionSide side = AdpositionSide::Pre;
};

/// The ADP dependent of token i with deprel "case" (or a "case:" subtype).
/// With several, the first by index is returned and a warning is logged.
std::optional<CaseChild> case_child(const Sentence& s, int index);

/// A sentence the reader dropped, for the diagnostic JSONL.
struct RejectedSentence {
  std::string source;
  std::size_t line = 0;  // first line of the sentence block
  std::string sent_id;
  std::string reason;
};

struct ReaderStats {
  std::size_t sentences = 0;
  std::size_t rejected = 0;
  std::size_t multiword_lines = 0;
  std::size_t empty_node_lines = 0;
};

/// Streaming CoNLL-U reader: one sentence block at a time, in file order.
class ConlluReader {
 public:
  ConlluReader(std::istream& in, std::string source = "<conllu>");
  /// Opens the file itself; throws IoError when it cannot.
  explicit ConlluReader(const std::string& path);

  /// Next valid sentence; rejected blocks are skipped and recorded.
  std::optional<Sentence> next();

  const std::vector<RejectedSentence>& rejected() const noexcept { return rejected_; }
  const ReaderStats& stats() const noexcept { return stats_; }

 private:
  std::unique_ptr<std::ifstream> owned_;
  std::istream* in_;
  std::string source_;
  std::size_t line_no_ = 0;
  std::vector<RejectedSentence> rejected_;
  ReaderStats stats_;
};

/// Reads a whole file. Convenience over ConlluReader for small inputs.
std::vector<Sentence> read_conllu(const std::string& path, std::vector<RejectedSentence>* rejected = nullptr);

/// Writes the sentence back as CoNLL-U (comments for sent_id/text, then
/// syntactic word lines), terminated by a blank line.
std::string write_conllu(const Sentence& s);

std::string rejected_to_jsonl(std::span<const RejectedSentence> rejected);

}  // namespace govprobe

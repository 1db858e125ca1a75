#include "govprobe/conllu.hpp"

#include <array>
#include <charconv>
#include <istream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "govprobe/error.hpp"
#include "govprobe/log.hpp"
#include "govprobe/text.hpp"

namespace govprobe {

namespace {

constexpr std::array<std::string_view, 17> kUposNames{"ADJ",  "ADP",  "ADV",   "AUX",   "CCONJ", "DET",
                                                      "INTJ", "NOUN", "NUM",   "PART",  "PRON",  "PROPN",
                                                      "PUNCT", "SCONJ", "SYM", "VERB", "X"};

std::optional<int> parse_int(std::string_view text) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

std::string underscore_if_empty(std::string_view value) { return value.empty() ? "_" : std::string(value); }

std::string from_field(std::string_view value) { return value == "_" ? std::string() : std::string(value); }

// Thrown inside block parsing; turned into a RejectedSentence.
struct BlockError {
  std::string reason;
};

WordToken parse_token_line(std::string_view line, const std::vector<std::string_view>& cols, int id) {
  WordToken tok;
  tok.index = id;
  tok.form = std::string(cols[1]);
  tok.lemma = std::string(cols[2]);
  const auto upos = parse_upos(cols[3]);
  if (!upos) throw BlockError{"unknown UPOS '" + std::string(cols[3]) + "' in line: " + std::string(line)};
  tok.upos = *upos;
  tok.xpos = from_field(cols[4]);
  if (cols[5] != "_") {
    for (auto pair : split(cols[5], '|')) {
      const auto eq = pair.find('=');
      if (eq == std::string_view::npos || eq == 0) throw BlockError{"malformed FEATS '" + std::string(cols[5]) + "'"};
      tok.feats[std::string(pair.substr(0, eq))] = std::string(pair.substr(eq + 1));
    }
  }
  const auto head = parse_int(cols[6]);
  if (!head) throw BlockError{"non-numeric HEAD '" + std::string(cols[6]) + "' for token " + std::to_string(id)};
  tok.head = *head;
  tok.deprel = std::string(cols[7]);
  tok.deps = from_field(cols[8]);
  tok.misc = from_field(cols[9]);
  return tok;
}

}  // namespace

std::string_view to_string(Upos upos) { return kUposNames[static_cast<std::size_t>(upos)]; }

std::optional<Upos> parse_upos(std::string_view text) {
  for (std::size_t i = 0; i < kUposNames.size(); ++i) {
    if (kUposNames[i] == text) return static_cast<Upos>(i);
  }
  return std::nullopt;
}

std::optional<std::string_view> WordToken::feat(std::string_view name) const {
  const auto it = feats.find(std::string(name));
  if (it == feats.end()) return std::nullopt;
  return std::string_view(it->second);
}

std::string_view WordToken::base_deprel() const {
  const std::string_view rel(deprel);
  return rel.substr(0, rel.find(':'));
}

Sentence::Sentence(std::string sent_id, std::vector<WordToken> tokens, std::optional<std::string> text)
    : sent_id_(std::move(sent_id)), text_(std::move(text)), tokens_(std::move(tokens)) {
  if (tokens_.empty()) throw ValidationError("sentence " + sent_id_ + " has no words");
  const int n = static_cast<int>(tokens_.size());
  int roots = 0;
  for (int i = 0; i < n; ++i) {
    const auto& tok = tokens_[static_cast<std::size_t>(i)];
    if (tok.index != i + 1) {
      throw ValidationError("sentence " + sent_id_ + ": word indices are not contiguous at " + std::to_string(tok.index));
    }
    if (tok.head < 0 || tok.head > n) {
      throw ValidationError("sentence " + sent_id_ + ": token " + std::to_string(tok.index) + " has dangling head " +
                            std::to_string(tok.head));
    }
    if (tok.head == tok.index) {
      throw ValidationError("sentence " + sent_id_ + ": token " + std::to_string(tok.index) + " is its own head");
    }
    if (tok.head == 0) ++roots;
  }
  if (roots == 0) throw ValidationError("sentence " + sent_id_ + " has no root");
}

const WordToken& Sentence::at(int index) const {
  if (!valid_index(index)) {
    throw std::out_of_range("word index " + std::to_string(index) + " outside 1.." + std::to_string(tokens_.size()) +
                            " in sentence " + sent_id_);
  }
  return tokens_[static_cast<std::size_t>(index - 1)];
}

std::vector<const WordToken*> dependents(const Sentence& s, int index) {
  s.at(index);
  std::vector<const WordToken*> out;
  for (const auto& tok : s.tokens()) {
    if (tok.head == index) out.push_back(&tok);
  }
  return out;
}

std::optional<CaseChild> case_child(const Sentence& s, int index) {
  std::optional<CaseChild> found;
  for (const auto* dep : dependents(s, index)) {
    if (dep->upos != Upos::ADP || dep->base_deprel() != "case") continue;
    if (found) {
      log::warn("sentence " + s.sent_id() + ": token " + std::to_string(index) + " has several case dependents; using " +
                std::to_string(found->token->index));
      break;
    }
    found = CaseChild{dep, dep->index < index ? AdpositionSide::Pre : AdpositionSide::Post};
  }
  return found;
}

ConlluReader::ConlluReader(std::istream& in, std::string source) : in_(&in), source_(std::move(source)) {}

ConlluReader::ConlluReader(const std::string& path)
    : owned_(std::make_unique<std::ifstream>(path, std::ios::binary)), in_(owned_.get()), source_(path) {
  if (!*owned_) throw IoError("cannot open CoNLL-U file " + path);
}

std::optional<Sentence> ConlluReader::next() {
  std::string line;
  while (true) {
    // Skip separators until a block starts.
    std::vector<std::string> block;
    std::size_t first_line = 0;
    while (std::getline(*in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (trim(line).empty()) {
        if (block.empty()) continue;
        break;
      }
      if (block.empty()) first_line = line_no_;
      block.push_back(line);
    }
    if (block.empty()) return std::nullopt;

    const std::size_t ordinal = stats_.sentences + stats_.rejected + 1;
    std::string sent_id = std::to_string(ordinal);
    std::optional<std::string> text;
    std::vector<WordToken> tokens;
    try {
      for (const auto& raw : block) {
        const std::string_view l(raw);
        if (l.front() == '#') {
          const auto body = trim(l.substr(1));
          if (body.starts_with("sent_id")) {
            const auto eq = body.find('=');
            if (eq != std::string_view::npos) sent_id = std::string(trim(body.substr(eq + 1)));
          } else if (body.starts_with("text")) {
            const auto eq = body.find('=');
            if (eq != std::string_view::npos && trim(body.substr(0, eq)) == "text") text = std::string(trim(body.substr(eq + 1)));
          }
          continue;
        }
        const auto cols = split(l, '\t');
        if (cols.size() != 10) {
          throw BlockError{"expected 10 columns, found " + std::to_string(cols.size()) + " in line: " + raw};
        }
        if (cols[0].find('-') != std::string_view::npos) {
          ++stats_.multiword_lines;
          continue;
        }
        if (cols[0].find('.') != std::string_view::npos) {
          ++stats_.empty_node_lines;
          continue;
        }
        const auto id = parse_int(cols[0]);
        if (!id) throw BlockError{"bad token id '" + std::string(cols[0]) + "'"};
        tokens.push_back(parse_token_line(l, cols, *id));
      }
      Sentence sentence(sent_id, std::move(tokens), std::move(text));
      ++stats_.sentences;
      return sentence;
    } catch (const BlockError& e) {
      rejected_.push_back({source_, first_line, sent_id, e.reason});
    } catch (const ValidationError& e) {
      rejected_.push_back({source_, first_line, sent_id, e.what()});
    }
    ++stats_.rejected;
    log::warn(source_ + ":" + std::to_string(first_line) + ": rejected sentence " + sent_id + ": " + rejected_.back().reason);
  }
}

std::vector<Sentence> read_conllu(const std::string& path, std::vector<RejectedSentence>* rejected) {
  ConlluReader reader(path);
  std::vector<Sentence> out;
  while (auto s = reader.next()) out.push_back(std::move(*s));
  if (rejected) *rejected = reader.rejected();
  return out;
}

std::string write_conllu(const Sentence& s) {
  std::ostringstream out;
  out << "# sent_id = " << s.sent_id() << '\n';
  if (s.text()) out << "# text = " << *s.text() << '\n';
  for (const auto& tok : s.tokens()) {
    std::string feats;
    for (const auto& [k, v] : tok.feats) {
      if (!feats.empty()) feats += '|';
      feats += k + "=" + v;
    }
    out << tok.index << '\t' << underscore_if_empty(tok.form) << '\t' << underscore_if_empty(tok.lemma) << '\t'
        << to_string(tok.upos) << '\t' << underscore_if_empty(tok.xpos) << '\t' << underscore_if_empty(feats) << '\t'
        << tok.head << '\t' << underscore_if_empty(tok.deprel) << '\t' << underscore_if_empty(tok.deps) << '\t'
        << underscore_if_empty(tok.misc) << '\n';
  }
  out << '\n';
  return out.str();
}

std::string rejected_to_jsonl(std::span<const RejectedSentence> rejected) {
  std::string out;
  for (const auto& r : rejected) {
    nlohmann::json row{{"source", r.source}, {"line", r.line}, {"sent_id", r.sent_id}, {"reason", r.reason}};
    out += row.dump() + "\n";
  }
  return out;
}

}  // namespace govprobe

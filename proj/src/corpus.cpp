#include "nmtprobe/corpus.hpp"

#include <algorithm>
#include <fstream>

#include "nmtprobe/error.hpp"
#include "nmtprobe/io.hpp"

namespace nmtprobe {

// ---------------------------------------------------------------------------
// Vocab

namespace {
const std::vector<std::string> kReservedTokens = {"<pad>", "<unk>", "<s>", "</s>"};
}

Vocab::Vocab() : tokens_(kReservedTokens) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) ids_.emplace(tokens_[i], static_cast<int>(i));
}

Vocab Vocab::build(std::span<const Sentence> sentences, std::size_t max_size, std::size_t min_count) {
  if (max_size < kReserved) {
    throw ValueError("build_vocab: max_size " + std::to_string(max_size) + " is below the " +
                     std::to_string(kReserved) + " reserved ids");
  }
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& s : sentences) {
    for (const auto& tok : s) ++counts[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, n] : counts) {
    if (n < min_count) continue;
    if (std::find(kReservedTokens.begin(), kReservedTokens.end(), tok) != kReservedTokens.end()) continue;
    ranked.emplace_back(tok, n);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > max_size - kReserved) ranked.resize(max_size - kReserved);

  Vocab v;
  for (auto& [tok, n] : ranked) {
    v.ids_.emplace(tok, static_cast<int>(v.tokens_.size()));
    v.tokens_.push_back(tok);
  }
  return v;
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
  if (tokens.size() < kReserved || !std::equal(kReservedTokens.begin(), kReservedTokens.end(), tokens.begin())) {
    throw ValueError("vocab token list must start with the reserved entries");
  }
  Vocab v;
  for (std::size_t i = kReserved; i < tokens.size(); ++i) {
    if (!v.ids_.emplace(tokens[i], static_cast<int>(i)).second) {
      throw ValueError("vocab token list repeats '" + tokens[i] + "'");
    }
    v.tokens_.push_back(tokens[i]);
  }
  return v;
}

int Vocab::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const { return ids_.count(std::string(token)) != 0; }

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) return tokens_[kUnk];
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocab::encode(const Sentence& sentence) const {
  std::vector<int> ids;
  ids.reserve(sentence.size());
  for (const auto& tok : sentence) ids.push_back(id(tok));
  return ids;
}

Sentence Vocab::decode(std::span<const int> ids) const {
  Sentence out;
  for (int i : ids) {
    if (i == kEos) break;
    out.push_back(token(i));
  }
  return out;
}

// ---------------------------------------------------------------------------
// TagSchema

TagSchema::TagSchema(std::vector<std::string> fine, const std::vector<std::string>& coarse_of_fine)
    : fine_(std::move(fine)) {
  if (fine_.size() != coarse_of_fine.size()) throw ValueError("tag schema: one coarse tag per fine tag required");
  if (fine_.empty()) throw ValueError("tag schema: no tags");
  for (std::size_t i = 0; i < fine_.size(); ++i) {
    if (!fine_ids_.emplace(fine_[i], static_cast<int>(i)).second) {
      throw ValueError("tag schema: fine tag '" + fine_[i] + "' listed twice");
    }
    const auto& c = coarse_of_fine[i];
    auto [it, inserted] = coarse_ids_.emplace(c, static_cast<int>(coarse_.size()));
    if (inserted) coarse_.push_back(c);
    fine_to_coarse_.push_back(it->second);
  }
}

TagSchema TagSchema::load(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  std::vector<std::string> fine, coarse;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string line = trim(lines[i]);
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_whitespace(line);
    if (fields.size() != 2) throw FormatError(path.string(), i + 1, "expected 'fine<TAB>coarse'");
    fine.push_back(fields[0]);
    coarse.push_back(fields[1]);
  }
  try {
    return TagSchema(std::move(fine), coarse);
  } catch (const ValueError& e) {
    throw FormatError(path.string(), 0, e.what());
  }
}

void TagSchema::save(const std::filesystem::path& path) const {
  std::string out;
  for (std::size_t i = 0; i < fine_.size(); ++i) out += fine_[i] + "\t" + coarse_[static_cast<std::size_t>(fine_to_coarse_[i])] + "\n";
  write_file_atomic(path, out);
}

int TagSchema::fine_id(std::string_view tag) const {
  auto it = fine_ids_.find(std::string(tag));
  if (it == fine_ids_.end()) throw ValueError("unknown tag '" + std::string(tag) + "'");
  return it->second;
}

int TagSchema::coarse_id(std::string_view tag) const {
  auto it = coarse_ids_.find(std::string(tag));
  if (it == coarse_ids_.end()) throw ValueError("unknown coarse tag '" + std::string(tag) + "'");
  return it->second;
}

const std::string& TagSchema::coarse_name_of(std::string_view fine_tag) const {
  return coarse_[static_cast<std::size_t>(fine_to_coarse_[static_cast<std::size_t>(fine_id(fine_tag))])];
}

std::vector<int> TagSchema::members(int coarse_id) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < fine_to_coarse_.size(); ++i) {
    if (fine_to_coarse_[i] == coarse_id) out.push_back(static_cast<int>(i));
  }
  return out;
}

TagSchema TagSchema::coarse_schema() const { return TagSchema(coarse_, coarse_); }

// ---------------------------------------------------------------------------
// Corpora

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train:
      return "train";
    case Split::dev:
      return "dev";
    case Split::test:
      return "test";
  }
  return "?";
}

std::vector<Sentence> ParallelCorpus::sources() const {
  std::vector<Sentence> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(p.first);
  return out;
}

std::vector<Sentence> ParallelCorpus::targets() const {
  std::vector<Sentence> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(p.second);
  return out;
}

ParallelCorpus load_parallel(const std::filesystem::path& src, const std::filesystem::path& tgt, std::size_t max_len,
                             Split split) {
  const auto src_lines = read_lines(src);
  const auto tgt_lines = read_lines(tgt);
  if (src_lines.empty()) throw FormatError(src.string(), 0, "empty file");
  if (tgt_lines.empty()) throw FormatError(tgt.string(), 0, "empty file");
  if (src_lines.size() != tgt_lines.size()) {
    throw FormatError(src.string(), 0,
                      "line count " + std::to_string(src_lines.size()) + " does not match " + tgt.string() + " (" +
                          std::to_string(tgt_lines.size()) + ")");
  }
  ParallelCorpus corpus;
  corpus.split = split;
  for (std::size_t i = 0; i < src_lines.size(); ++i) {
    Sentence s = split_whitespace(src_lines[i]);
    Sentence t = split_whitespace(tgt_lines[i]);
    if (s.empty() || t.empty() || s.size() > max_len || t.size() > max_len) {
      ++corpus.dropped;
      continue;
    }
    corpus.pairs.emplace_back(std::move(s), std::move(t));
  }
  return corpus;
}

void save_parallel(const ParallelCorpus& corpus, const std::filesystem::path& src, const std::filesystem::path& tgt) {
  std::string s, t;
  for (const auto& [a, b] : corpus.pairs) {
    s += join(a, " ") + "\n";
    t += join(b, " ") + "\n";
  }
  write_file_atomic(src, s);
  write_file_atomic(tgt, t);
}

std::string_view to_string(TagKind k) { return k == TagKind::pos ? "pos" : "sem"; }

TagKind parse_tag_kind(std::string_view s) {
  if (s == "pos" || s == "POS") return TagKind::pos;
  if (s == "sem" || s == "SEM") return TagKind::sem;
  throw ValueError("unknown task '" + std::string(s) + "' (expected pos or sem)");
}

std::size_t TaggedCorpus::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.tokens.size();
  return n;
}

std::vector<Sentence> TaggedCorpus::token_sentences() const {
  std::vector<Sentence> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back(s.tokens);
  return out;
}

TaggedCorpus parse_tagged(std::string_view text, const TagSchema& schema, TagKind kind, const std::string& origin) {
  TaggedCorpus corpus;
  corpus.kind = kind;
  TaggedSentence current;
  std::size_t line_no = 0;
  const auto lines = split(text, '\n');
  for (std::string line : lines) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) {
      if (!current.tokens.empty()) corpus.sentences.push_back(std::move(current));
      current = {};
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || line.find('\t', tab + 1) != std::string::npos) {
      throw FormatError(origin, line_no, "expected 'token<TAB>tag'");
    }
    std::string token = line.substr(0, tab);
    std::string tag = line.substr(tab + 1);
    if (tag.empty()) throw FormatError(origin, line_no, "empty tag");
    if (!schema.has_fine(tag)) throw FormatError(origin, line_no, "unknown tag '" + tag + "'");
    current.tokens.push_back(std::move(token));
    current.tags.push_back(std::move(tag));
  }
  if (!current.tokens.empty()) corpus.sentences.push_back(std::move(current));
  if (corpus.sentences.empty()) throw FormatError(origin, 0, "no sentences");
  return corpus;
}

TaggedCorpus load_tagged(const std::filesystem::path& path, const TagSchema& schema, TagKind kind) {
  return parse_tagged(read_file(path), schema, kind, path.string());
}

void save_tagged(const TaggedCorpus& corpus, const std::filesystem::path& path) {
  std::string out;
  for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
    if (s) out += '\n';
    const auto& sent = corpus.sentences[s];
    for (std::size_t i = 0; i < sent.tokens.size(); ++i) out += sent.tokens[i] + "\t" + sent.tags[i] + "\n";
  }
  write_file_atomic(path, out);
}

}  // namespace nmtprobe

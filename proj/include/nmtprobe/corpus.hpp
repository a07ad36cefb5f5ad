#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace nmtprobe {

using Sentence = std::vector<std::string>;

/// Token <-> id map. Ids 0..3 are reserved for padding, unknown and the
/// sentence boundaries; every other id maps to exactly one token.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr std::size_t kReserved = 4;

  Vocab();

  /// Ranks tokens by descending frequency, ties lexicographic; keeps tokens
  /// seen at least `min_count` times; `max_size` counts the reserved ids.
  static Vocab build(std::span<const Sentence> sentences, std::size_t max_size, std::size_t min_count = 1);

  /// Rebuilds from an id-ordered token list that starts with the reserved
  /// entries (the form written into checkpoints).
  static Vocab from_tokens(const std::vector<std::string>& tokens);

  int id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(int id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(const Sentence& sentence) const;
  /// Maps ids back to tokens; stops at the first EOS.
  Sentence decode(std::span<const int> ids) const;

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

/// Fine tag inventory with a total fine -> coarse mapping.
///
/// File format: one `fine<TAB>coarse` pair per line; blank lines and lines
/// starting with '#' are ignored. Fine tags keep file order; coarse tags are
/// ordered by first appearance.
class TagSchema {
 public:
  TagSchema() = default;
  TagSchema(std::vector<std::string> fine, const std::vector<std::string>& coarse_of_fine);

  static TagSchema load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const std::vector<std::string>& fine() const { return fine_; }
  const std::vector<std::string>& coarse() const { return coarse_; }
  std::size_t fine_count() const { return fine_.size(); }
  std::size_t coarse_count() const { return coarse_.size(); }

  bool has_fine(std::string_view tag) const { return fine_ids_.count(std::string(tag)) != 0; }
  int fine_id(std::string_view tag) const;
  int coarse_id(std::string_view tag) const;
  /// Coarse id of a fine id.
  int coarse_of(int fine_id) const { return fine_to_coarse_.at(static_cast<std::size_t>(fine_id)); }
  const std::string& coarse_name_of(std::string_view fine_tag) const;
  /// Fine ids that map to a coarse id, ascending.
  std::vector<int> members(int coarse_id) const;

  /// Schema whose coarse tags are its own coarse categories (identity map).
  TagSchema coarse_schema() const;

 private:
  std::vector<std::string> fine_;
  std::vector<std::string> coarse_;
  std::vector<int> fine_to_coarse_;
  std::map<std::string, int> fine_ids_;
  std::map<std::string, int> coarse_ids_;
};

enum class Split { train, dev, test };
std::string_view to_string(Split s);

struct ParallelCorpus {
  std::vector<std::pair<Sentence, Sentence>> pairs;
  Split split = Split::train;
  /// Pairs dropped by the length filter while loading.
  std::size_t dropped = 0;

  std::vector<Sentence> sources() const;
  std::vector<Sentence> targets() const;
};

/// Reads two line-aligned files of space-separated tokens. Pairs with either
/// side longer than `max_len` tokens (or empty) are dropped and counted.
ParallelCorpus load_parallel(const std::filesystem::path& src, const std::filesystem::path& tgt,
                             std::size_t max_len = 50, Split split = Split::train);
void save_parallel(const ParallelCorpus& corpus, const std::filesystem::path& src, const std::filesystem::path& tgt);

enum class TagKind { pos, sem };
std::string_view to_string(TagKind k);
TagKind parse_tag_kind(std::string_view s);

struct TaggedSentence {
  Sentence tokens;
  std::vector<std::string> tags;
};

struct TaggedCorpus {
  std::vector<TaggedSentence> sentences;
  TagKind kind = TagKind::sem;

  std::size_t token_count() const;
  std::vector<Sentence> token_sentences() const;
};

/// Parses `token<TAB>tag` lines with blank lines between sentences and
/// validates every tag against the schema.
TaggedCorpus load_tagged(const std::filesystem::path& path, const TagSchema& schema, TagKind kind = TagKind::sem);
TaggedCorpus parse_tagged(std::string_view text, const TagSchema& schema, TagKind kind, const std::string& origin);
void save_tagged(const TaggedCorpus& corpus, const std::filesystem::path& path);

}  // namespace nmtprobe

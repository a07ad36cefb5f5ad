#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nmtprobe/corpus.hpp"

namespace nmtprobe {

/// Parameters of a synthetic source language and one target transform.
///
/// Source words `w000`.. are drawn uniformly (within the sentence's topic).
/// Word i has class `i % classes`. Tags:
///   - SEM: fine tag = table[prev state][class], where prev state is BOS or
///     the predecessor's class; every prev state of a class gets its own fine
///     tag, and the fine tag's coarse category is the class. Unsolvable from
///     the token alone.
///   - POS: the word's class, except for a seeded subset of ambiguous words
///     whose tag shifts by one class after odd-class predecessors.
/// Targets, by `generator`:
///   - `copy`: target = source (autoencoder)
///   - `reverse`: target = reversed source
///   - `context-tag`: word-by-word translation whose output word depends on the
///     source word AND the predecessor's class, emitted in reverse order;
///     `language` picks the table.
struct SyntheticSpec {
  std::string generator = "context-tag";
  std::size_t sentences = 200;
  std::size_t vocab_size = 48;
  std::size_t classes = 4;
  std::size_t min_len = 4;
  std::size_t max_len = 12;
  std::size_t topics = 1;
  double ambiguous_fraction = 0.25;
  int language = 1;
  /// Seeds the grammar tables (shared by every split of one language).
  std::uint64_t grammar_seed = 1;
  /// Seeds sentence sampling.
  std::uint64_t seed = 1;
};

/// The generator's fixed tables, derived from (vocab_size, classes,
/// ambiguous_fraction, grammar_seed).
class SyntheticGrammar {
 public:
  explicit SyntheticGrammar(const SyntheticSpec& spec);

  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t classes() const { return classes_; }
  std::string word(std::size_t i) const;
  std::size_t word_class(std::size_t i) const { return i % classes_; }

  /// prev_state 0 is sentence start; s >= 1 means predecessor class s-1.
  int sem_tag(std::size_t prev_state, std::size_t word) const;
  int pos_tag(std::size_t prev_state, std::size_t word) const;
  bool ambiguous(std::size_t word) const { return ambiguous_[word]; }

  TagSchema sem_schema() const;
  TagSchema pos_schema() const;

  /// Accuracy of the best tagger that sees only the current token, under the
  /// generator's own distribution: uniform words, sentence-start probability
  /// 1/E[len] with lengths uniform in [min_len, max_len].
  double sem_context_free_ceiling(std::size_t min_len, std::size_t max_len) const;

  /// Target word for `word` after `prev_state` in target language `language`.
  std::string translate(int language, std::size_t prev_state, std::size_t word) const;

 private:
  std::size_t vocab_size_;
  std::size_t classes_;
  std::uint64_t grammar_seed_;
  std::vector<std::vector<int>> sem_table_;  // [prev_state][class]
  std::vector<bool> ambiguous_;
};

struct SyntheticData {
  ParallelCorpus parallel;
  TaggedCorpus pos;
  TaggedCorpus sem;
  TagSchema pos_schema;
  TagSchema sem_schema;
  double sem_ceiling = 0.0;
};

/// Deterministic in `spec`. Throws ValueError on an unknown generator or
/// inconsistent sizes.
SyntheticData make_synthetic(const SyntheticSpec& spec);

}  // namespace nmtprobe

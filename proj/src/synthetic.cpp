#include "nmtprobe/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "nmtprobe/error.hpp"
#include "nmtprobe/random.hpp"

namespace nmtprobe {

namespace {

std::string numbered(const char* prefix, std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
  return buf;
}

std::vector<std::size_t> language_shifts(std::uint64_t grammar_seed, int language, std::size_t vocab,
                                         std::size_t states) {
  Rng rng(derive_seed(grammar_seed, "language-" + std::to_string(language)));
  std::vector<std::size_t> all(vocab);
  std::iota(all.begin(), all.end(), 0);
  rng.shuffle(all);
  all.resize(std::min(states, vocab));
  while (all.size() < states) all.push_back(all.size());
  return all;
}

}  // namespace

SyntheticGrammar::SyntheticGrammar(const SyntheticSpec& spec)
    : vocab_size_(spec.vocab_size), classes_(spec.classes), grammar_seed_(spec.grammar_seed) {
  if (classes_ < 2) throw ValueError("synthetic: classes must be at least 2");
  if (spec.topics < 1) throw ValueError("synthetic: topics must be at least 1");
  if (vocab_size_ == 0 || vocab_size_ % (classes_ * spec.topics) != 0) {
    throw ValueError("synthetic: vocab_size must be a positive multiple of classes * topics");
  }
  if (spec.min_len < 1 || spec.max_len < spec.min_len) throw ValueError("synthetic: need 1 <= min_len <= max_len");

  Rng rng(derive_seed(spec.grammar_seed, "grammar"));
  const std::size_t states = classes_ + 1;
  sem_table_.assign(states, std::vector<int>(classes_));
  for (std::size_t c = 0; c < classes_; ++c) {
    std::vector<int> perm(states);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    for (std::size_t s = 0; s < states; ++s) sem_table_[s][c] = static_cast<int>(c * states) + perm[s];
  }
  ambiguous_.resize(vocab_size_);
  for (std::size_t w = 0; w < vocab_size_; ++w) ambiguous_[w] = rng.bernoulli(spec.ambiguous_fraction);
}

std::string SyntheticGrammar::word(std::size_t i) const { return numbered("w", i, 3); }

int SyntheticGrammar::sem_tag(std::size_t prev_state, std::size_t w) const {
  return sem_table_.at(prev_state).at(word_class(w));
}

int SyntheticGrammar::pos_tag(std::size_t prev_state, std::size_t w) const {
  const std::size_t c = word_class(w);
  const bool shifted = ambiguous_[w] && prev_state >= 1 && (prev_state - 1) % 2 == 1;
  return static_cast<int>(shifted ? (c + 1) % classes_ : c);
}

TagSchema SyntheticGrammar::sem_schema() const {
  std::vector<std::string> fine, coarse;
  const std::size_t states = classes_ + 1;
  for (std::size_t t = 0; t < classes_ * states; ++t) {
    fine.push_back(numbered("S", t, 2));
    coarse.push_back(numbered("K", t / states, 2));
  }
  return TagSchema(std::move(fine), coarse);
}

TagSchema SyntheticGrammar::pos_schema() const {
  std::vector<std::string> tags;
  for (std::size_t c = 0; c < classes_; ++c) tags.push_back(numbered("P", c, 2));
  return TagSchema(tags, tags);
}

double SyntheticGrammar::sem_context_free_ceiling(std::size_t min_len, std::size_t max_len) const {
  const double mean_len = 0.5 * static_cast<double>(min_len + max_len);
  const double p_start = 1.0 / mean_len;
  const double p_class = (1.0 - p_start) / static_cast<double>(classes_);
  // Classes are equiprobable, and a word's best tag depends only on its class.
  double total = 0.0;
  for (std::size_t c = 0; c < classes_; ++c) {
    std::vector<double> mass(classes_ * (classes_ + 1), 0.0);
    mass[static_cast<std::size_t>(sem_table_[0][c])] += p_start;
    for (std::size_t s = 1; s <= classes_; ++s) mass[static_cast<std::size_t>(sem_table_[s][c])] += p_class;
    total += *std::max_element(mass.begin(), mass.end());
  }
  return total / static_cast<double>(classes_);
}

std::string SyntheticGrammar::translate(int language, std::size_t prev_state, std::size_t w) const {
  const auto shifts = language_shifts(grammar_seed_, language, vocab_size_, classes_ + 1);
  const std::size_t out = (w + shifts[prev_state]) % vocab_size_;
  return "t" + std::to_string(language) + numbered("x", out, 3);
}

SyntheticData make_synthetic(const SyntheticSpec& spec) {
  enum class Gen { copy, reverse, context };
  Gen gen;
  if (spec.generator == "copy") {
    gen = Gen::copy;
  } else if (spec.generator == "reverse") {
    gen = Gen::reverse;
  } else if (spec.generator == "context-tag") {
    gen = Gen::context;
  } else {
    throw ValueError("unknown synthetic generator '" + spec.generator + "' (expected copy, reverse, context-tag)");
  }

  const SyntheticGrammar grammar(spec);
  SyntheticData data;
  data.pos_schema = grammar.pos_schema();
  data.sem_schema = grammar.sem_schema();
  data.sem_ceiling = grammar.sem_context_free_ceiling(spec.min_len, spec.max_len);
  data.pos.kind = TagKind::pos;
  data.sem.kind = TagKind::sem;

  const std::size_t per_topic = spec.vocab_size / spec.topics;
  const auto pos_names = data.pos_schema.fine();
  const auto sem_names = data.sem_schema.fine();

  // Source sentences depend only on the sampling seed, never on the target
  // transform, so every target language shares one multi-parallel source.
  Rng rng(derive_seed(spec.seed, "sentences"));
  for (std::size_t n = 0; n < spec.sentences; ++n) {
    const std::size_t len = spec.min_len + rng.below(spec.max_len - spec.min_len + 1);
    const std::size_t topic = spec.topics > 1 ? rng.below(spec.topics) : 0;
    Sentence src, tgt;
    TaggedSentence pos, sem;
    std::size_t prev_state = 0;
    for (std::size_t j = 0; j < len; ++j) {
      const std::size_t w = topic * per_topic + rng.below(per_topic);
      src.push_back(grammar.word(w));
      pos.tokens.push_back(src.back());
      sem.tokens.push_back(src.back());
      pos.tags.push_back(pos_names[static_cast<std::size_t>(grammar.pos_tag(prev_state, w))]);
      sem.tags.push_back(sem_names[static_cast<std::size_t>(grammar.sem_tag(prev_state, w))]);
      if (gen == Gen::context) {
        tgt.push_back(grammar.translate(spec.language, prev_state, w));
      }
      prev_state = grammar.word_class(w) + 1;
    }
    if (gen == Gen::copy) tgt = src;
    if (gen == Gen::reverse) tgt.assign(src.rbegin(), src.rend());
    // Emitted right to left: the decoder's own history then covers the
    // following words, so the predecessor context has to come from the
    // encoder state at the aligned position.
    if (gen == Gen::context) std::reverse(tgt.begin(), tgt.end());
    data.parallel.pairs.emplace_back(std::move(src), std::move(tgt));
    data.pos.sentences.push_back(std::move(pos));
    data.sem.sentences.push_back(std::move(sem));
  }
  return data;
}

}  // namespace nmtprobe

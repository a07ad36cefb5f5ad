#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nmtprobe/corpus.hpp"

namespace nmtprobe {

struct FeatureDataset;

/// Per-token gold and predicted label ids over one corpus, in corpus order.
/// A predicted id of -1 marks a position with no prediction (always wrong).
struct TaggingResult {
  std::vector<std::string> labels;
  std::vector<int> gold;
  std::vector<int> predicted;
  /// First token index of each sentence, plus a final end offset.
  std::vector<std::size_t> sentence_starts;
  TagKind task = TagKind::sem;
  std::size_t layer = 0;
  std::string model_id;

  std::size_t size() const { return gold.size(); }
  std::size_t sentence_count() const { return sentence_starts.empty() ? 0 : sentence_starts.size() - 1; }
  /// Throws ValueError when lengths, offsets or ids are inconsistent.
  void validate() const;
};

/// Result from tag strings. `predicted` is one tag list per sentence and is
/// aligned position-wise; "" or a missing position becomes -1. Every gold tag
/// and every non-empty predicted tag must be in `labels`.
TaggingResult make_result(const TaggedCorpus& corpus, const std::vector<std::string>& labels,
                          const std::vector<std::vector<std::string>>& predicted);

/// Result from a probe run over a feature dataset.
TaggingResult make_result(const FeatureDataset& data, const std::vector<int>& predicted, TagKind task);

double accuracy(const TaggingResult& result);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Precision, recall and F1 of one label; any 0/0 is taken as 0.
Prf per_tag_f1(const TaggingResult& result, int tag);
Prf per_tag_f1(const TaggingResult& result, std::string_view tag);

/// Maps gold and predicted fine ids through the schema's fine -> coarse map.
/// The result's labels must be exactly the schema's fine inventory.
TaggingResult coarse_collapse(const TaggingResult& fine, const TagSchema& schema);

/// Micro-averaged F1 over the fine members of one coarse tag: TP, FP and FN
/// are pooled over the members, then F1 is computed once.
double micro_f1_within_coarse(const TaggingResult& fine, const TagSchema& schema, std::string_view coarse_tag);

/// Corpus BLEU-4 in [0, 100]: uniform geometric mean of clipped n-gram
/// precisions (n = 1..4) times the brevity penalty. Unsmoothed, so any zero
/// precision gives 0.
double bleu(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references);

struct SignificanceReport {
  std::string system_a;
  std::string system_b;
  /// |accuracy(A) - accuracy(B)|
  double observed = 0.0;
  double p_value = 1.0;
  std::size_t shuffles = 0;
  /// Shuffles whose statistic met or exceeded the observed one.
  std::size_t exceed = 0;
};

/// Approximate randomization test on accuracy. Each shuffle swaps A's and
/// B's predictions for a whole sentence with probability 1/2;
/// p = (exceed + 1) / (R + 1).
SignificanceReport approx_randomization(const TaggingResult& a, const TaggingResult& b, std::size_t shuffles,
                                        std::uint64_t seed, std::string system_a = "A",
                                        std::string system_b = "B");

struct Disagreement {
  std::size_t sentence = 0;
  std::size_t position = 0;
  std::string token;
  std::string gold;
  std::string predicted_a;
  std::string predicted_b;
  /// "B" when B is right and A wrong, "A" for the reverse.
  std::string correct;
  /// The sentence with the token wrapped in [[ ]].
  std::string context;
};

/// Tokens where exactly one of A and B is correct, in corpus order. With a
/// filter, only tokens whose gold tag belongs to that coarse category are
/// kept (the schema maps fine labels; coarse labels map to themselves).
std::vector<Disagreement> disagreement_report(const TaggingResult& a, const TaggingResult& b,
                                              const TaggedCorpus& corpus, const TagSchema* schema = nullptr,
                                              std::optional<std::string> coarse_filter = std::nullopt);

/// TSV with header `sentence position token gold predicted_a predicted_b
/// correct context` (tab-separated).
std::string disagreement_tsv(const std::vector<Disagreement>& report);

}  // namespace nmtprobe

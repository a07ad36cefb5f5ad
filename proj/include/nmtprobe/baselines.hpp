#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "nmtprobe/corpus.hpp"
#include "nmtprobe/seq2seq.hpp"

namespace nmtprobe {

/// Most-frequent-tag tagger: per-type argmax of training tag counts, with the
/// global majority tag for unseen types. Count ties go to the
/// lexicographically smallest tag name.
struct MftModel {
  std::map<std::string, std::string> tag_of;
  std::string global_tag;

  bool operator==(const MftModel&) const = default;
};

MftModel fit_mft(const TaggedCorpus& train);
std::vector<std::string> predict_mft(const MftModel& model, const Sentence& tokens);

/// TSV: one `token<TAB>tag` line per type in token order, then the global
/// majority as a line with an empty token field (`<TAB>tag`).
std::string mft_to_tsv(const MftModel& model);
MftModel mft_from_tsv(std::string_view text, const std::string& origin);
void save_mft(const MftModel& model, const std::filesystem::path& path);
MftModel load_mft(const std::filesystem::path& path);

/// Word sequence -> tag sequence pairs, for training an ordinary
/// encoder-decoder as a tagger.
ParallelCorpus word2tag_pairs(const TaggedCorpus& corpus);

/// Seq2seq model whose target vocabulary is the schema's fine tag inventory
/// (source vocabulary from the training tokens), trained with train_nmt.
Seq2SeqModel train_word2tag(const TaggedCorpus& train, const TaggedCorpus& dev, const TagSchema& schema,
                            const NmtConfig& config, const EpochCallback& on_epoch = {});

/// Greedy tag sequence for a sentence (length may differ from the input).
std::vector<std::string> predict_word2tag(const Seq2SeqModel& model, const Sentence& tokens);

/// Position-wise alignment of a predicted tag sequence to `length` gold
/// positions: extra predictions are dropped, missing ones become "" (always
/// scored wrong).
std::vector<std::string> align_positionwise(const std::vector<std::string>& predicted, std::size_t length);

}  // namespace nmtprobe

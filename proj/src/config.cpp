#include "nmtprobe/config.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "nmtprobe/error.hpp"
#include "nmtprobe/io.hpp"

namespace nmtprobe {

namespace pt = boost::property_tree;

namespace {

pt::ptree parse_ini(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw FormatError(origin, e.line(), e.message());
  }
  return tree;
}

/// Typed access to one INI section that remembers which keys were read, so
/// leftovers (typos) can be reported.
class Section {
 public:
  Section(const pt::ptree& tree, std::string name) : name_(std::move(name)) {
    if (auto child = tree.get_child_optional(pt::ptree::path_type(name_, '\0'))) node_ = &*child;
  }

  std::optional<std::string> raw(const std::string& key) {
    used_.insert(key);
    if (!node_) return std::nullopt;
    auto v = node_->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
    if (!v) return std::nullopt;
    return trim(*v);
  }

  void str(const std::string& key, std::string& out) {
    if (auto v = raw(key)) out = *v;
  }
  void path(const std::string& key, std::filesystem::path& out) {
    if (auto v = raw(key)) out = *v;
  }
  template <typename T>
  void unsigned_int(const std::string& key, T& out) {
    if (auto v = raw(key)) {
      try {
        std::size_t used = 0;
        if (!v->empty() && (*v)[0] == '-') throw std::invalid_argument("negative");
        const unsigned long long parsed = std::stoull(*v, &used);
        if (used != v->size()) throw std::invalid_argument("trailing");
        out = static_cast<T>(parsed);
      } catch (const std::logic_error&) {
        fail(key, "expected a non-negative integer, got '" + *v + "'");
      }
    }
  }
  void real(const std::string& key, double& out) {
    if (auto v = raw(key)) {
      try {
        std::size_t used = 0;
        out = std::stod(*v, &used);
        if (used != v->size()) throw std::invalid_argument("trailing");
      } catch (const std::logic_error&) {
        fail(key, "expected a number, got '" + *v + "'");
      }
    }
  }
  void boolean(const std::string& key, bool& out) {
    if (auto v = raw(key)) {
      std::string s = *v;
      std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
      if (s == "true" || s == "yes" || s == "on" || s == "1") {
        out = true;
      } else if (s == "false" || s == "no" || s == "off" || s == "0") {
        out = false;
      } else {
        fail(key, "expected true/false, got '" + *v + "'");
      }
    }
  }
  /// Space- or comma-separated list.
  std::optional<std::vector<std::string>> list(const std::string& key) {
    auto v = raw(key);
    if (!v) return std::nullopt;
    std::string s = *v;
    std::replace(s.begin(), s.end(), ',', ' ');
    return split_whitespace(s);
  }

  /// List of non-negative integers.
  std::optional<std::vector<std::size_t>> counts(const std::string& key) {
    auto items = list(key);
    if (!items) return std::nullopt;
    std::vector<std::size_t> out;
    for (const auto& item : *items) {
      const bool digits = !item.empty() && std::all_of(item.begin(), item.end(), [](unsigned char ch) {
        return std::isdigit(ch);
      });
      if (!digits) fail(key, "expected non-negative integers, got '" + item + "'");
      out.push_back(static_cast<std::size_t>(std::stoull(item)));
    }
    return out;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& reason) const {
    throw ConfigError(name_ + "." + key, reason);
  }

  void reject_unknown() const {
    if (!node_) return;
    for (const auto& [key, child] : *node_) {
      if (!used_.count(key)) throw ConfigError(name_ + "." + key, "unknown key");
    }
  }

 private:
  std::string name_;
  const pt::ptree* node_ = nullptr;
  std::set<std::string> used_;
};

void read_nmt(Section& s, NmtConfig& c) {
  s.unsigned_int("embed_dim", c.embed_dim);
  s.unsigned_int("hidden_dim", c.hidden_dim);
  s.unsigned_int("layers", c.num_layers);
  s.unsigned_int("attention_dim", c.attention_dim);
  s.boolean("bidirectional", c.bidirectional);
  s.boolean("residual", c.residual);
  s.real("dropout", c.dropout);
  s.unsigned_int("epochs", c.epochs);
  s.real("learning_rate", c.learning_rate);
  s.real("lr_decay", c.lr_decay);
  s.unsigned_int("batch_size", c.batch_size);
  s.unsigned_int("max_len", c.max_len);
  s.real("clip_norm", c.clip_norm);
  s.real("init_range", c.init_range);
}

void read_probe(Section& s, ProbeConfig& c) {
  s.unsigned_int("epochs", c.epochs);
  s.unsigned_int("batch_size", c.batch_size);
  s.real("dropout", c.dropout);
  s.real("init_range", c.init_range);
  s.real("learning_rate", c.adam.lr);
  s.real("beta1", c.adam.beta1);
  s.real("beta2", c.adam.beta2);
  s.real("eps", c.adam.eps);
}

void read_skipgram(Section& s, SkipGramConfig& c) {
  s.unsigned_int("dim", c.dim);
  s.unsigned_int("window", c.window);
  s.unsigned_int("negatives", c.negatives);
  s.unsigned_int("epochs", c.epochs);
  s.real("learning_rate", c.learning_rate);
  s.unsigned_int("max_vocab", c.max_vocab);
  s.unsigned_int("min_count", c.min_count);
}

void validate_nmt(const NmtConfig& c, const std::string& section) {
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(section + "." + e.field(), std::string(e.what()).substr(e.field().size() + 2));
  }
}

const std::set<std::string> kSections = {"experiment", "data",     "nmt",     "grid",    "probe",
                                         "baselines",  "skipgram", "word2tag", "analysis"};

}  // namespace

std::vector<std::size_t> ExperimentConfig::probe_layers(std::size_t depth) const {
  std::vector<std::size_t> out;
  if (layers.empty()) {
    for (std::size_t k = 0; k <= depth; ++k) out.push_back(k);
  } else {
    for (std::size_t k : layers) {
      if (k <= depth) out.push_back(k);
    }
  }
  return out;
}

std::vector<std::string> ExperimentConfig::columns() const {
  std::vector<std::string> out = targets;
  if (autoencoder) out.push_back(source_lang);
  return out;
}

void ExperimentConfig::validate() const {
  if (name.empty()) throw ConfigError("experiment.name", "must not be empty");
  if (jobs == 0) throw ConfigError("experiment.jobs", "must be at least 1");
  if (data.source != "synthetic" && data.source != "files") {
    throw ConfigError("data.source", "expected 'synthetic' or 'files', got '" + data.source + "'");
  }
  if (data.source == "synthetic") {
    if (data.nmt_train == 0 || data.nmt_dev == 0 || data.nmt_test == 0) {
      throw ConfigError("data.nmt_sentences", "train, dev and test sizes must be positive");
    }
    if (data.tag_train == 0 || data.tag_dev == 0 || data.tag_test == 0) {
      throw ConfigError("data.tag_sentences", "train, dev and test sizes must be positive");
    }
    if (data.synthetic.generator != "context-tag") {
      throw ConfigError("data.generator", "the experiment grid needs the context-tag generator");
    }
    try {
      SyntheticGrammar{data.synthetic};
    } catch (const ValueError& e) {
      throw ConfigError("data", e.what());
    }
  } else {
    if (data.parallel_dir.empty()) throw ConfigError("data.parallel_dir", "required when source = files");
    if (data.tagged_dir.empty()) throw ConfigError("data.tagged_dir", "required when source = files");
  }
  if (targets.empty() && !autoencoder) throw ConfigError("grid.targets", "no targets and no autoencoder: empty grid");
  std::set<std::string> seen;
  for (const auto& t : columns()) {
    if (t.empty() || t.find_first_of(" \t,/") != std::string::npos) {
      throw ConfigError("grid.targets", "invalid target name '" + t + "'");
    }
    if (!seen.insert(t).second) throw ConfigError("grid.targets", "duplicate target '" + t + "'");
  }
  validate_nmt(nmt, "nmt");
  for (const auto& a : architectures) {
    if (a != "uni" && a != "bi" && a != "res") {
      throw ConfigError("grid.architectures", "unknown architecture '" + a + "' (expected uni, bi, res)");
    }
    NmtConfig v = nmt;
    v.bidirectional = a == "bi";
    v.residual = a == "res";
    validate_nmt(v, "grid.architectures(" + a + ")");
  }
  for (std::size_t d : depths) {
    NmtConfig v = nmt;
    v.num_layers = d;
    validate_nmt(v, "grid.depths(" + std::to_string(d) + ")");
  }
  if ((!architectures.empty() || !depths.empty()) && targets.empty()) {
    throw ConfigError("grid.targets", "variant tables average over targets; at least one target is required");
  }
  for (double f : data_fractions) {
    if (!(f > 0.0 && f < 1.0)) throw ConfigError("grid.data_fractions", "fractions must lie in (0, 1)");
  }
  if (tasks.empty()) throw ConfigError("probe.tasks", "at least one task is required");
  std::size_t deepest = nmt.num_layers;
  for (std::size_t d : depths) deepest = std::max(deepest, d);
  for (std::size_t k : layers) {
    if (k > deepest) {
      throw ConfigError("probe.layers", "layer " + std::to_string(k) + " exceeds the deepest model (" +
                                            std::to_string(deepest) + " layers)");
    }
  }
  if (probe.epochs == 0) throw ConfigError("probe.epochs", "must be positive");
  if (probe.batch_size == 0) throw ConfigError("probe.batch_size", "must be positive");
  if (probe.dropout < 0.0 || probe.dropout >= 1.0) throw ConfigError("probe.dropout", "must lie in [0, 1)");
  if (probe.adam.lr <= 0.0) throw ConfigError("probe.learning_rate", "must be positive");
  if (word2tag) validate_nmt(word2tag_nmt, "word2tag");
  if (unsupemb) {
    if (skipgram.dim == 0) throw ConfigError("skipgram.dim", "must be positive");
    if (skipgram.window == 0) throw ConfigError("skipgram.window", "must be positive");
  }
  if (shuffles == 0) throw ConfigError("analysis.shuffles", "must be positive");
}

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& origin) {
  const pt::ptree tree = parse_ini(text, origin);
  for (const auto& [name, child] : tree) {
    if (!kSections.count(name)) {
      if (child.empty()) throw ConfigError(name, "keys must live inside a [section]");
      throw ConfigError(name, "unknown section");
    }
  }

  ExperimentConfig c;
  Section exp(tree, "experiment");
  exp.str("name", c.name);
  exp.unsigned_int("seed", c.seed);
  exp.unsigned_int("jobs", c.jobs);
  exp.path("output", c.output);
  exp.reject_unknown();

  Section data(tree, "data");
  data.str("source", c.data.source);
  SyntheticSpec& syn = c.data.synthetic;
  data.str("generator", syn.generator);
  data.unsigned_int("vocab_size", syn.vocab_size);
  data.unsigned_int("classes", syn.classes);
  data.unsigned_int("min_len", syn.min_len);
  data.unsigned_int("max_len", syn.max_len);
  data.unsigned_int("topics", syn.topics);
  data.real("ambiguous_fraction", syn.ambiguous_fraction);
  data.unsigned_int("grammar_seed", syn.grammar_seed);
  if (auto v = data.counts("nmt_sentences")) {
    if (v->size() != 3) data.fail("nmt_sentences", "expected three sizes: train dev test");
    c.data.nmt_train = (*v)[0];
    c.data.nmt_dev = (*v)[1];
    c.data.nmt_test = (*v)[2];
  }
  if (auto v = data.counts("tag_sentences")) {
    if (v->size() != 3) data.fail("tag_sentences", "expected three sizes: train dev test");
    c.data.tag_train = (*v)[0];
    c.data.tag_dev = (*v)[1];
    c.data.tag_test = (*v)[2];
  }
  data.path("parallel_dir", c.data.parallel_dir);
  data.path("tagged_dir", c.data.tagged_dir);
  data.reject_unknown();

  Section nmt(tree, "nmt");
  read_nmt(nmt, c.nmt);
  nmt.reject_unknown();
  c.word2tag_nmt = c.nmt;

  Section grid(tree, "grid");
  if (auto v = grid.list("targets")) c.targets = *v;
  grid.boolean("autoencoder", c.autoencoder);
  grid.str("source_lang", c.source_lang);
  if (auto v = grid.list("architectures")) c.architectures = *v;
  if (auto v = grid.counts("depths")) c.depths = *v;
  if (auto v = grid.list("data_fractions")) {
    c.data_fractions.clear();
    for (const auto& f : *v) {
      try {
        c.data_fractions.push_back(std::stod(f));
      } catch (const std::logic_error&) {
        grid.fail("data_fractions", "expected numbers, got '" + f + "'");
      }
    }
  }
  grid.reject_unknown();

  Section probe(tree, "probe");
  if (auto v = probe.list("tasks")) {
    c.tasks.clear();
    for (const auto& t : *v) {
      try {
        c.tasks.push_back(parse_tag_kind(t));
      } catch (const Error&) {
        probe.fail("tasks", "unknown task '" + t + "' (expected pos, sem)");
      }
    }
  }
  if (auto v = probe.counts("layers")) c.layers = *v;
  probe.boolean("coarse", c.coarse);
  read_probe(probe, c.probe);
  probe.reject_unknown();

  Section base(tree, "baselines");
  base.boolean("mft", c.mft);
  base.boolean("unsupemb", c.unsupemb);
  base.boolean("word2tag", c.word2tag);
  base.reject_unknown();

  Section sg(tree, "skipgram");
  read_skipgram(sg, c.skipgram);
  sg.reject_unknown();

  Section w2t(tree, "word2tag");
  read_nmt(w2t, c.word2tag_nmt);
  w2t.reject_unknown();

  Section analysis(tree, "analysis");
  analysis.unsigned_int("shuffles", c.shuffles);
  if (auto v = analysis.list("disagreement_filter")) c.disagreement_filter = *v;
  analysis.reject_unknown();

  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return parse_experiment_config(read_file(path), path.string());
}

NmtConfig nmt_config_from_ini(const std::string& text, const std::string& section, const std::string& origin) {
  const pt::ptree tree = parse_ini(text, origin);
  NmtConfig c;
  Section s(tree, section);
  read_nmt(s, c);
  s.reject_unknown();
  validate_nmt(c, section);
  return c;
}

ProbeConfig probe_config_from_ini(const std::string& text, const std::string& origin) {
  const pt::ptree tree = parse_ini(text, origin);
  ProbeConfig c;
  Section s(tree, "probe");
  read_probe(s, c);
  // The full experiment config keeps grid keys in [probe]; they are
  // irrelevant to a single probe run.
  s.raw("tasks");
  s.raw("layers");
  s.raw("coarse");
  s.reject_unknown();
  return c;
}

SkipGramConfig skipgram_config_from_ini(const std::string& text, const std::string& origin) {
  const pt::ptree tree = parse_ini(text, origin);
  SkipGramConfig c;
  Section s(tree, "skipgram");
  read_skipgram(s, c);
  s.reject_unknown();
  return c;
}

}  // namespace nmtprobe

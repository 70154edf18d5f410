/* Copyright 2026 The FuseMT Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "fusemt/cli.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "fusemt/bpe.hpp"
#include "fusemt/checkpoint.hpp"
#include "fusemt/corpus.hpp"
#include "fusemt/decoding.hpp"
#include "fusemt/errors.hpp"
#include "fusemt/evaluation.hpp"
#include "fusemt/synthetic.hpp"
#include "fusemt/vocabulary.hpp"

namespace fusemt::cli {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename N>
N parse_number(std::string_view key, std::string_view value) {
  N v{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("config key " + std::string(key) + ": '" + std::string(value) + "' is not a valid number");
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  throw ConfigError("config key " + std::string(key) + ": '" + std::string(value) + "' is not a boolean");
}

// Shortest text that parses back to the same double.
std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct Field {
  std::function<void(RunConfig&, std::string_view, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename N>
Field number_field(N TrainConfig::*member) {
  return {[member](RunConfig& c, std::string_view k, std::string_view v) { c.train.*member = parse_number<N>(k, v); },
          [member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<N>) {
              return num(c.train.*member);
            } else {
              return std::to_string(c.train.*member);
            }
          }};
}

Field path_field(fs::path RunConfig::*member) {
  return {[member](RunConfig& c, std::string_view, std::string_view v) { c.*member = fs::path(std::string(v)); },
          [member](const RunConfig& c) { return (c.*member).string(); }};
}

const std::map<std::string, Field, std::less<>>& fields() {
  static const std::map<std::string, Field, std::less<>> table = {
      {"learning_rate", number_field(&TrainConfig::learning_rate)},
      {"batch_size", number_field(&TrainConfig::batch_size)},
      {"pretrain_epochs", number_field(&TrainConfig::pretrain_epochs)},
      {"max_epochs", number_field(&TrainConfig::max_epochs)},
      {"max_tokens", number_field(&TrainConfig::max_tokens)},
      {"seed", number_field(&TrainConfig::seed)},
      {"embed_size", number_field(&TrainConfig::embed_size)},
      {"hidden_size", number_field(&TrainConfig::hidden_size)},
      {"vocab_size", number_field(&TrainConfig::vocab_size)},
      {"bpe_ops", number_field(&TrainConfig::bpe_ops)},
      {"init_scale", number_field(&TrainConfig::init_scale)},
      {"clip_norm", number_field(&TrainConfig::clip_norm)},
      {"select_by_bleu",
       {[](RunConfig& c, std::string_view k, std::string_view v) { c.train.select_by_bleu = parse_bool(k, v); },
        [](const RunConfig& c) { return std::string(c.train.select_by_bleu ? "1" : "0"); }}},
      {"variant",
       {[](RunConfig& c, std::string_view, std::string_view v) { c.variant = parse_variant(v); },
        [](const RunConfig& c) { return std::string(variant_name(c.variant)); }}},
      {"train_source", path_field(&RunConfig::train_source)},
      {"train_target", path_field(&RunConfig::train_target)},
      {"dev_source", path_field(&RunConfig::dev_source)},
      {"dev_target", path_field(&RunConfig::dev_target)},
      {"test_source", path_field(&RunConfig::test_source)},
      {"test_target", path_field(&RunConfig::test_target)},
      {"monolingual", path_field(&RunConfig::monolingual)},
      {"source_vocab", path_field(&RunConfig::source_vocab)},
      {"target_vocab", path_field(&RunConfig::target_vocab)},
      {"lm_vocab", path_field(&RunConfig::lm_vocab)},
      {"source_bpe", path_field(&RunConfig::source_bpe)},
      {"target_bpe", path_field(&RunConfig::target_bpe)},
      {"lm_bpe", path_field(&RunConfig::lm_bpe)},
  };
  return table;
}

// ---------------------------------------------------------------------------

void require_file(const fs::path& p, std::string_view what) {
  if (p.empty()) throw ConfigError(std::string(what) + " is not set");
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) throw DataError(std::string(what) + " " + p.string() + " does not exist");
}

void optional_file(const fs::path& p, std::string_view what) {
  if (!p.empty()) require_file(p, what);
}

void require_output(const fs::path& p, std::string_view what) {
  if (p.empty()) throw ConfigError(std::string(what) + " is not set");
  const fs::path dir = p.parent_path().empty() ? fs::path(".") : p.parent_path();
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw DataError(std::string(what) + " directory " + dir.string() + " does not exist");
  if (fs::is_directory(p, ec)) throw DataError(std::string(what) + " " + p.string() + " is a directory");
}

void pair_set(const fs::path& a, const fs::path& b, std::string_view what) {
  if (a.empty() != b.empty()) throw ConfigError(std::string(what) + " needs both source and target paths");
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  out << text;
  if (!out) throw DataError("failed writing " + p.string());
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig rc = path.empty() ? RunConfig{} : RunConfig::load(path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    rc.set(trim(std::string_view(kv).substr(0, eq)), trim(std::string_view(kv).substr(eq + 1)));
  }
  rc.train.validate();
  return rc;
}

std::map<std::string, std::string> echo(const RunConfig& rc) {
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : rc.entries()) out["run." + k] = v;
  return out;
}

// One line per epoch, flushed as it is written.
class EpochLogFile {
 public:
  explicit EpochLogFile(const fs::path& p) : out_(p) {
    if (!out_) throw DataError("cannot write log " + p.string());
  }
  EpochCallback callback() {
    return [this](const EpochLog& log) {
      out_ << format_epoch(log) << '\n';
      out_.flush();
      return true;
    };
  }

 private:
  std::ofstream out_;
};

// ---------------------------------------------------------------------------

struct TrainLmArgs {
  std::string config, out, log;
  std::vector<std::string> set;
};

int cmd_train_lm(const TrainLmArgs& a, std::ostream& out) {
  const RunConfig rc = load_config(a.config, a.set);
  require_file(rc.monolingual, "monolingual");
  optional_file(rc.dev_target, "dev_target");
  optional_file(rc.lm_vocab, "lm_vocab");
  optional_file(rc.lm_bpe, "lm_bpe");
  require_output(a.out, "--out");
  if (!a.log.empty()) require_output(a.log, "--log");

  const Corpus mono = read_corpus(rc.monolingual);
  std::optional<BpeModel> bpe;
  if (!rc.lm_bpe.empty()) bpe = BpeModel::load(rc.lm_bpe);
  Corpus segmented;
  for (const auto& s : mono) {
    if (!s.empty()) segmented.push_back(bpe ? bpe->encode(s) : s);
  }
  if (segmented.empty()) throw DataError("monolingual corpus " + rc.monolingual.string() + " has no sentences");
  const Vocabulary vocab =
      rc.lm_vocab.empty() ? Vocabulary::build(segmented, rc.train.vocab_size) : Vocabulary::load(rc.lm_vocab);

  std::vector<std::vector<int>> ids, dev_ids;
  for (const auto& s : segmented) ids.push_back(vocab.encode(s));
  if (!rc.dev_target.empty()) {
    for (const auto& s : read_corpus(rc.dev_target)) {
      if (!s.empty()) dev_ids.push_back(encode_sentence(s, bpe, vocab));
    }
  }

  LmConfig lc;
  lc.embed_size = rc.train.embed_size;
  lc.hidden_size = rc.train.hidden_size;
  lc.init_scale = rc.train.init_scale;
  LanguageModel<float> lm(vocab, lc, rc.train.seed + 2);
  std::unique_ptr<EpochLogFile> log;
  if (!a.log.empty()) log = std::make_unique<EpochLogFile>(a.log);
  const auto report = train_lm(lm, ids, dev_ids.empty() ? nullptr : &dev_ids, rc.train, rc.train.pretrain_epochs,
                               log ? log->callback() : EpochCallback{});
  save_checkpoint(a.out, lm_checkpoint(lm, bpe, echo(rc)));
  out << "trained language model for " << report.epochs.size() << " epochs; wrote " << a.out << '\n';
  return kExitOk;
}

struct TrainTmArgs {
  std::string config, out, log, lm;
  std::vector<std::string> set;
};

int cmd_train_tm(const TrainTmArgs& a, std::ostream& out, std::ostream& err) {
  const RunConfig rc = load_config(a.config, a.set);
  require_file(rc.train_source, "train_source");
  require_file(rc.train_target, "train_target");
  pair_set(rc.dev_source, rc.dev_target, "dev data");
  optional_file(rc.dev_source, "dev_source");
  optional_file(rc.dev_target, "dev_target");
  optional_file(rc.source_vocab, "source_vocab");
  optional_file(rc.target_vocab, "target_vocab");
  optional_file(rc.source_bpe, "source_bpe");
  optional_file(rc.target_bpe, "target_bpe");
  if (rc.source_vocab.empty() != rc.target_vocab.empty()) {
    throw ConfigError("source_vocab and target_vocab must be given together");
  }
  if (rc.variant == Variant::Baseline) {
    if (!a.lm.empty()) err << "warning: the baseline ignores the language model " << a.lm << '\n';
  } else {
    if (a.lm.empty()) throw ConfigError(std::string(variant_name(rc.variant)) + " fusion requires --lm");
    require_file(a.lm, "--lm");
  }
  require_output(a.out, "--out");
  if (!a.log.empty()) require_output(a.log, "--log");

  std::shared_ptr<const LanguageModel<float>> lm;
  if (rc.variant != Variant::Baseline) lm = lm_from_checkpoint(load_checkpoint(a.lm)).lm;

  const ParallelCorpus train = read_parallel(rc.train_source, rc.train_target);
  std::optional<ParallelCorpus> dev;
  if (!rc.dev_source.empty()) dev = read_parallel(rc.dev_source, rc.dev_target);

  std::optional<TextPipeline> text;
  if (!rc.source_vocab.empty() || !rc.source_bpe.empty() || !rc.target_bpe.empty()) {
    TextPipeline tp;
    if (!rc.source_bpe.empty()) tp.source_bpe = BpeModel::load(rc.source_bpe);
    if (!rc.target_bpe.empty()) tp.target_bpe = BpeModel::load(rc.target_bpe);
    if (!rc.source_vocab.empty()) {
      tp.source_vocab = Vocabulary::load(rc.source_vocab);
      tp.target_vocab = Vocabulary::load(rc.target_vocab);
    } else {
      Corpus src, tgt;
      for (const auto& s : train.source) src.push_back(tp.segment_source(s));
      for (const auto& s : train.target) tgt.push_back(tp.segment_target(s));
      tp.source_vocab = Vocabulary::build(src, rc.train.vocab_size);
      tp.target_vocab = Vocabulary::build(tgt, rc.train.vocab_size);
    }
    text = std::move(tp);
  }

  std::unique_ptr<EpochLogFile> log;
  if (!a.log.empty()) log = std::make_unique<EpochLogFile>(a.log);
  TwoStageHooks hooks;
  if (log) hooks.on_tm_epoch = log->callback();
  auto res = train_two_stage<float>(train, dev ? &*dev : nullptr, nullptr, rc.variant, rc.train, lm, hooks,
                                    std::move(text));
  if (res.lm && res.lm_checksum_before != res.lm_checksum_after) {
    throw NumericError("language model parameters changed during translation training");
  }
  save_checkpoint(a.out, model_checkpoint(*res.model, res.text, echo(rc)));
  out << "trained " << variant_name(rc.variant) << " model for " << res.tm_report.epochs.size() << " epochs";
  if (res.tm_report.best_epoch) out << " (best dev epoch " << res.tm_report.best_epoch << ")";
  out << "; wrote " << a.out << '\n';
  return kExitOk;
}

struct TranslateArgs {
  std::string model, input, output, lm, dump_attention;
  std::size_t beam = 1;
  std::size_t max_len = 100;
  std::optional<double> lambda;
  bool shallow = false;
  bool length_normalize = false;
  bool subwords = false;
};

template <typename M>
Hypothesis<typename M::State> search(const M& step, const SearchOptions& opts) {
  return opts.beam == 1 ? greedy_decode(step, opts.max_len) : beam_decode(step, opts);
}

int cmd_translate(const TranslateArgs& a, std::ostream& out) {
  if (a.lambda && !a.shallow) throw ConfigError("--lambda is only valid with --shallow");
  if (!a.lm.empty() && !a.shallow) throw ConfigError("--lm is only valid with --shallow");
  if (a.shallow && a.lm.empty()) throw ConfigError("--shallow requires --lm");
  if (a.shallow && !a.dump_attention.empty()) throw UnsupportedVariant("--dump-attention needs a dynamic model");
  if (a.beam < 1) throw ConfigError("--beam must be at least 1");
  if (a.max_len < 1) throw ConfigError("--max-len must be at least 1");
  require_file(a.model, "--model");
  require_file(a.input, "--input");
  if (a.shallow) require_file(a.lm, "--lm");
  require_output(a.output, "--output");
  if (!a.dump_attention.empty()) require_output(a.dump_attention, "--dump-attention");

  ModelBundle bundle = model_from_checkpoint(load_checkpoint(a.model));
  const FusedModel<float>& model = *bundle.model;
  if (!a.dump_attention.empty() && model.variant() != Variant::Dynamic) {
    throw UnsupportedVariant("--dump-attention needs a dynamic model, got " + std::string(variant_name(model.variant())));
  }
  std::shared_ptr<const LanguageModel<float>> shallow_lm;
  ShallowConfig shallow_cfg;
  if (a.shallow) {
    if (model.variant() != Variant::Baseline) throw ConfigError("--shallow applies to baseline models only");
    shallow_lm = lm_from_checkpoint(load_checkpoint(a.lm)).lm;
    if (a.lambda) shallow_cfg.lambda = *a.lambda;
  }

  const Corpus sources = read_corpus(a.input);
  const SearchOptions opts{a.beam, a.max_len, a.length_normalize};
  const auto& vocab = model.tm().target_vocab();
  std::string hyps, trace;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    Sentence pieces;
    if (!sources[i].empty()) {
      const auto src = encode_sentence(sources[i], bundle.text.source_bpe, bundle.text.source_vocab);
      if (a.shallow) {
        ShallowStepModel<float> step(model.tm(), shallow_lm, shallow_cfg, src);
        pieces = vocab.decode(search(step, opts).tokens);
      } else {
        FusedStepModel<float> step(model, src);
        const auto hyp = search(step, opts);
        pieces = vocab.decode(hyp.tokens);
        if (!a.dump_attention.empty()) {
          if (i) trace += "\n";
          trace += format_attention(attention_records(model, hyp));
        }
      }
    } else if (!a.dump_attention.empty() && i) {
      trace += "\n";
    }
    hyps += join_tokens(a.subwords ? pieces : bundle.text.join_target(pieces)) + "\n";
  }
  write_file(a.output, hyps);
  if (!a.dump_attention.empty()) write_file(a.dump_attention, trace);
  out << "translated " << sources.size() << " sentences; wrote " << a.output << '\n';
  return kExitOk;
}

struct ScoreArgs {
  std::string hyp, ref, rival;
  std::size_t samples = 10000;
  std::uint64_t seed = 1;
};

int cmd_score(const ScoreArgs& a, std::ostream& out) {
  if (a.samples < 1) throw ConfigError("--samples must be at least 1");
  require_file(a.hyp, "--hyp");
  require_file(a.ref, "--ref");
  optional_file(a.rival, "--rival");
  const Corpus hyp = read_corpus(a.hyp), ref = read_corpus(a.ref);
  std::optional<Corpus> rival;
  if (!a.rival.empty()) rival = read_corpus(a.rival);
  out << format_report(score_corpus(hyp, ref, rival ? &*rival : nullptr, a.samples, a.seed));
  return kExitOk;
}

struct SynthArgs {
  std::string out_dir;
  std::size_t train = 2000, dev = 200, test = 200, mono = 5000, vocab = 40;
  std::uint64_t seed = 1;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  if (a.train == 0) throw ConfigError("--train must be positive");
  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  if (ec || !fs::is_directory(a.out_dir)) throw DataError("cannot create output directory " + a.out_dir);
  const fs::path dir(a.out_dir);
  const ParallelCorpus all = generate_synthetic(a.seed, a.train + a.dev + a.test, a.vocab);
  auto slice = [&](std::size_t from, std::size_t n, const std::string& name) {
    if (n == 0) return;
    const auto b = all.source.begin() + static_cast<std::ptrdiff_t>(from);
    const auto t = all.target.begin() + static_cast<std::ptrdiff_t>(from);
    write_corpus(dir / (name + ".src"), Corpus(b, b + static_cast<std::ptrdiff_t>(n)));
    write_corpus(dir / (name + ".tgt"), Corpus(t, t + static_cast<std::ptrdiff_t>(n)));
  };
  slice(0, a.train, "train");
  slice(a.train, a.dev, "dev");
  slice(a.train + a.dev, a.test, "test");
  if (a.mono) write_corpus(dir / "mono.tgt", generate_monolingual(a.seed, a.mono, a.vocab));
  out << "wrote synthetic corpora to " << a.out_dir << '\n';
  return kExitOk;
}

struct BpeArgs {
  std::string input, output;
  std::size_t ops = 1000;
};

int cmd_learn_bpe(const BpeArgs& a, std::ostream& out) {
  require_file(a.input, "--input");
  require_output(a.output, "--output");
  const BpeModel bpe = BpeModel::learn(read_corpus(a.input), a.ops);
  write_file(a.output, bpe.to_text());
  out << "learned " << bpe.merges().size() << " merges; wrote " << a.output << '\n';
  return kExitOk;
}

struct VocabArgs {
  std::string input, output, bpe;
  std::size_t size = 30000;
};

int cmd_build_vocab(const VocabArgs& a, std::ostream& out) {
  if (a.size <= Vocabulary::kReserved) throw ConfigError("--size must exceed the 4 reserved entries");
  require_file(a.input, "--input");
  optional_file(a.bpe, "--bpe");
  require_output(a.output, "--output");
  Corpus corpus = read_corpus(a.input);
  if (!a.bpe.empty()) {
    const BpeModel bpe = BpeModel::load(a.bpe);
    for (auto& s : corpus) s = bpe.encode(s);
  }
  const Vocabulary vocab = Vocabulary::build(corpus, a.size);
  write_file(a.output, vocab.to_text());
  out << "wrote " << vocab.size() << " entries to " << a.output << '\n';
  return kExitOk;
}

}  // namespace

// ---------------------------------------------------------------------------

void RunConfig::set(std::string_view key, std::string_view value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  it->second.set(*this, key, value);
}

RunConfig RunConfig::parse(std::string_view text) {
  RunConfig rc;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + " lacks '=': " + std::string(line));
    }
    rc.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return rc;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  try {
    return parse(os.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::map<std::string, std::string> RunConfig::entries() const {
  std::map<std::string, std::string> out;
  for (const auto& [k, f] : fields()) out[k] = f.get(*this);
  return out;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries()) out += k + "=" + v + "\n";
  return out;
}

const std::vector<std::string>& run_config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, f] : fields()) k.push_back(name);
    return k;
  }();
  return keys;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neural machine translation with language-model fusion", "fusemt"};
  app.require_subcommand(1);

  TrainLmArgs lm_args;
  auto* train_lm_cmd = app.add_subcommand("train-lm", "Train a language model on monolingual text");
  train_lm_cmd->add_option("--config", lm_args.config, "key=value run configuration");
  train_lm_cmd->add_option("--set", lm_args.set, "Override one configuration entry (key=value)");
  train_lm_cmd->add_option("--out", lm_args.out, "Checkpoint to write")->required();
  train_lm_cmd->add_option("--log", lm_args.log, "Per-epoch log file");

  TrainTmArgs tm_args;
  auto* train_tm_cmd = app.add_subcommand("train-tm", "Train a translation model, fused with a frozen LM");
  train_tm_cmd->add_option("--config", tm_args.config, "key=value run configuration");
  train_tm_cmd->add_option("--set", tm_args.set, "Override one configuration entry (key=value)");
  train_tm_cmd->add_option("--lm", tm_args.lm, "Language model checkpoint");
  train_tm_cmd->add_option("--out", tm_args.out, "Checkpoint to write")->required();
  train_tm_cmd->add_option("--log", tm_args.log, "Per-epoch log file");

  TranslateArgs tr_args;
  double lambda = 0.0;
  auto* translate_cmd = app.add_subcommand("translate", "Translate a tokenized source file");
  translate_cmd->add_option("--model", tr_args.model, "Model checkpoint")->required();
  translate_cmd->add_option("--input", tr_args.input, "Source sentences, one per line")->required();
  translate_cmd->add_option("--output", tr_args.output, "Hypotheses file to write")->required();
  translate_cmd->add_option("--beam", tr_args.beam, "Beam width; 1 is greedy search");
  translate_cmd->add_option("--max-len", tr_args.max_len, "Maximum output length in tokens");
  translate_cmd->add_flag("--length-normalize", tr_args.length_normalize, "Rank finished beams by mean log-probability");
  translate_cmd->add_flag("--shallow", tr_args.shallow, "Log-linear LM mixing at decode time");
  translate_cmd->add_option("--lm", tr_args.lm, "Language model checkpoint for --shallow");
  auto* lambda_opt = translate_cmd->add_option("--lambda", lambda, "LM weight for --shallow");
  translate_cmd->add_option("--dump-attention", tr_args.dump_attention, "Write word-attention traces here");
  translate_cmd->add_flag("--subwords", tr_args.subwords, "Keep subword segmentation in the output");

  ScoreArgs sc_args;
  auto* score_cmd = app.add_subcommand("score", "BLEU and RIBES, with optional paired bootstrap");
  score_cmd->add_option("--hyp", sc_args.hyp, "Hypotheses")->required();
  score_cmd->add_option("--ref", sc_args.ref, "References")->required();
  score_cmd->add_option("--rival", sc_args.rival, "Competing hypotheses for significance testing");
  score_cmd->add_option("--samples", sc_args.samples, "Bootstrap samples");
  score_cmd->add_option("--seed", sc_args.seed, "Bootstrap seed");

  SynthArgs sy_args;
  auto* synth_cmd = app.add_subcommand("synth-data", "Generate the bracket-constrained synthetic task");
  synth_cmd->add_option("--out-dir", sy_args.out_dir, "Directory to write into (created if missing)")->required();
  synth_cmd->add_option("--train", sy_args.train, "Training pairs");
  synth_cmd->add_option("--dev", sy_args.dev, "Development pairs");
  synth_cmd->add_option("--test", sy_args.test, "Test pairs");
  synth_cmd->add_option("--mono", sy_args.mono, "Monolingual target sentences");
  synth_cmd->add_option("--vocab", sy_args.vocab, "Content words per language");
  synth_cmd->add_option("--seed", sy_args.seed, "Generator seed");

  BpeArgs bpe_args;
  auto* bpe_cmd = app.add_subcommand("learn-bpe", "Learn BPE merges from a tokenized corpus");
  bpe_cmd->add_option("--input", bpe_args.input, "Tokenized corpus")->required();
  bpe_cmd->add_option("--output", bpe_args.output, "Merges file to write")->required();
  bpe_cmd->add_option("--ops", bpe_args.ops, "Number of merge operations");

  VocabArgs vo_args;
  auto* vocab_cmd = app.add_subcommand("build-vocab", "Build a frequency-ranked vocabulary");
  vocab_cmd->add_option("--input", vo_args.input, "Tokenized corpus")->required();
  vocab_cmd->add_option("--output", vo_args.output, "Vocabulary file to write")->required();
  vocab_cmd->add_option("--size", vo_args.size, "Maximum entries, reserved tokens included");
  vocab_cmd->add_option("--bpe", vo_args.bpe, "Segment with these merges first");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (*train_lm_cmd) return cmd_train_lm(lm_args, out);
    if (*train_tm_cmd) return cmd_train_tm(tm_args, out, err);
    if (*translate_cmd) {
      if (lambda_opt->count()) tr_args.lambda = lambda;
      return cmd_translate(tr_args, out);
    }
    if (*score_cmd) return cmd_score(sc_args, out);
    if (*synth_cmd) return cmd_synth(sy_args, out);
    if (*bpe_cmd) return cmd_learn_bpe(bpe_args, out);
    if (*vocab_cmd) return cmd_build_vocab(vo_args, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const VocabularyMismatch& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const UnsupportedVariant& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const Error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitConfig;
}

}  // namespace fusemt::cli

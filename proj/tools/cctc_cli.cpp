// Command-line driver: corpus generation, training, decoding, evaluation,
// n-gram LM training and the two sweep harnesses.

#include "cctc/acoustic_model.hpp"
#include "cctc/config.hpp"
#include "cctc/corpus.hpp"
#include "cctc/decoder.hpp"
#include "cctc/ngram_lm.hpp"
#include "cctc/trainer.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using namespace cctc;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string corpus;
  std::string checkpoint;
  std::string resume;
  std::string split = "dev";
  std::optional<std::string> mode;
  std::optional<int> beam_width;
  std::string lm;
  std::optional<double> lm_weight;
  std::optional<double> context_weight;
  std::optional<int> context_size;
  std::optional<double> code_switch_prob;
  std::string axis;
  std::string grid;
  int order = 3;
};

ConfigFile load_config(const std::string& path) {
  if (path.empty()) return {};
  auto file = ConfigFile::load(path);
  static const std::set<std::string> sections{"corpus", "model", "train", "decode"};
  for (const auto& [key, value] : file.values()) {
    if (!sections.count(key.substr(0, key.find('.')))) throw Error("unknown config key: " + key);
  }
  return file;
}

std::ostream& output(const Options& o, std::ofstream& file) {
  if (o.out.empty() || o.out == "-") return std::cout;
  file.open(o.out);
  if (!file) throw Error("cannot write " + o.out);
  return file;
}

Corpus require_corpus(const Options& o) {
  if (o.corpus.empty()) throw Error("--corpus is required");
  return load_corpus(o.corpus);
}

ModelConfig model_config(const Options& o, const ConfigFile& file, const Alphabet& alphabet, int input_dim) {
  auto config = ModelConfig::desk_scale(input_dim, alphabet.size(), 1);
  apply(file, config);
  if (o.context_size) config.context_size = *o.context_size;
  config.validate();
  return config;
}

TrainConfig train_config(const Options& o, const ConfigFile& file) {
  TrainConfig config;
  apply(file, config);
  if (o.seed) config.seed = *o.seed;
  if (o.context_weight) config.alpha = config.beta = *o.context_weight;
  const std::string mode = o.mode.value_or("cctc");
  if (mode == "ctc") {
    config.phase2 = Phase2Objective::ctc;
    config.alpha = config.beta = 0;
  } else if (mode != "cctc") {
    throw Error("unknown training mode: " + mode);
  }
  config.validate();
  return config;
}

DecodeConfig decode_config(const Options& o, const ConfigFile& file) {
  DecodeConfig config;
  apply(file, config);
  if (o.mode) config.mode = parse_decode_mode(*o.mode);
  if (o.beam_width) config.beam_width = *o.beam_width;
  if (o.lm_weight) config.lm_weight = *o.lm_weight;
  if (!o.lm.empty()) {
    config.lm = std::make_shared<NgramModel>(NgramModel::load(o.lm));
    if (!o.mode) config.mode = DecodeMode::beam_lm;
  }
  config.validate();
  return config;
}

Checkpoint require_checkpoint(const Options& o, const Alphabet& alphabet) {
  if (o.checkpoint.empty()) throw Error("--checkpoint is required");
  auto ckpt = load_checkpoint(o.checkpoint);
  if (!(ckpt.alphabet == alphabet)) throw Error("checkpoint alphabet does not match corpus alphabet");
  return ckpt;
}

std::string format_double(double x) {
  std::ostringstream out;
  out << std::setprecision(6) << x;
  return out.str();
}

int cmd_generate(const Options& o) {
  if (o.out.empty()) throw Error("--out is required");
  SyntheticSpec spec;
  apply(load_config(o.config), spec);
  if (o.seed) spec.seed = *o.seed;
  if (o.code_switch_prob) spec.code_switch_prob = *o.code_switch_prob;
  const auto corpus = generate(spec);
  save_corpus(corpus, o.out);
  std::ofstream(fs::path(o.out) / "spec.ini") << to_config_text(spec);
  std::cout << "generated train=" << corpus.train.size() << " dev=" << corpus.dev.size()
            << " test=" << corpus.test.size() << " out=" << o.out << '\n';
  return 0;
}

Checkpoint make_checkpoint(const ModelConfig& model, const Alphabet& alphabet, const Trainer& trainer,
                           const TrainConfig& config, const std::string& mode) {
  Checkpoint ckpt{model, alphabet, trainer.state(), {}};
  ckpt.metadata["epochs_done"] = std::to_string(trainer.epochs_done());
  ckpt.metadata["mode"] = mode;
  ckpt.metadata["seed"] = std::to_string(config.seed);
  ckpt.metadata["context_weight"] = format_double(config.alpha);
  return ckpt;
}

int cmd_train(const Options& o, bool phase1_only) {
  if (o.out.empty()) throw Error("--out is required");
  const auto file = load_config(o.config);
  const auto corpus = require_corpus(o);
  const int dim = corpus.train.empty() ? 0 : static_cast<int>(corpus.train.front().features.cols());
  auto model = model_config(o, file, corpus.alphabet, dim);
  const auto config = train_config(o, file);

  Trainer trainer(model, config, corpus.alphabet, corpus.train, &corpus.dev);
  if (!o.resume.empty()) {
    const auto ckpt = load_checkpoint(o.resume);
    if (!(ckpt.alphabet == corpus.alphabet)) throw Error("checkpoint alphabet does not match corpus alphabet");
    if (!(ckpt.config == model)) throw Error("checkpoint model config does not match");
    auto it = ckpt.metadata.find("epochs_done");
    if (it == ckpt.metadata.end()) throw Error("checkpoint has no epochs_done metadata");
    trainer.resume(ckpt.state, std::stoi(it->second));
  }
  const std::string mode = o.mode.value_or("cctc");
  if (phase1_only) {
    trainer.run_phase1();
  } else {
    trainer.run();
  }
  save_checkpoint(o.out, make_checkpoint(model, corpus.alphabet, trainer, config, mode));
  trainer.report().save(o.out + ".report.jsonl");
  const auto& epochs = trainer.report().epochs;
  std::cout << "trained mode=" << mode << " epochs=" << trainer.epochs_done();
  if (!epochs.empty()) {
    std::cout << " final_ctc_loss=" << format_double(epochs.back().ctc_loss);
    if (epochs.back().dev_wer) std::cout << " dev_wer=" << format_double(*epochs.back().dev_wer);
  }
  std::cout << " out=" << o.out << '\n';
  return 0;
}

int cmd_decode(const Options& o, bool with_metrics) {
  const auto file = load_config(o.config);
  const auto corpus = require_corpus(o);
  const auto ckpt = require_checkpoint(o, corpus.alphabet);
  const auto decode = decode_config(o, file);
  const auto& data = corpus.split(o.split);
  const auto result = evaluate(ckpt.state, ckpt.config, data, corpus.alphabet, decode);
  std::ofstream out_file;
  auto& out = output(o, out_file);
  if (with_metrics) {
    out << result.to_text(o.split);
  } else {
    for (std::size_t i = 0; i < data.size(); ++i) {
      out << data[i].id << '\t' << corpus.alphabet.decode(result.hypotheses[i]) << '\t'
          << format_double(result.scores[i]) << '\n';
    }
  }
  return 0;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      grid.push_back(std::stod(item, &used));
      if (used != item.size()) throw Error("");
    } catch (const std::exception&) {
      throw Error("bad grid value: " + item);
    }
  }
  if (grid.empty()) throw Error("empty grid");
  return grid;
}

int cmd_sweep(const Options& o) {
  const auto file = load_config(o.config);
  const auto corpus = require_corpus(o);
  const auto& data = corpus.split(o.split);
  std::ofstream out_file;
  auto& out = output(o, out_file);

  if (o.axis == "beam_width") {
    const auto ckpt = require_checkpoint(o, corpus.alphabet);
    const auto grid = parse_grid(o.grid.empty() ? "1,4,16,64" : o.grid);
    out << "beam_width\twer\tcer\tmixed_rate\n";
    for (double w : grid) {
      if (w < 1 || w != std::floor(w)) throw Error("beam widths must be positive integers");
      auto decode = decode_config(o, file);
      if (decode.mode == DecodeMode::greedy) decode.mode = DecodeMode::beam;
      decode.beam_width = static_cast<int>(w);
      const auto r = evaluate(ckpt.state, ckpt.config, data, corpus.alphabet, decode);
      out << static_cast<int>(w) << '\t' << format_double(r.total.wer()) << '\t' << format_double(r.total.cer())
          << '\t' << format_double(r.total.mixed.rate()) << '\n';
    }
    return 0;
  }
  if (o.axis != "context_weight") throw Error("unknown sweep axis: " + o.axis);

  const auto grid = parse_grid(o.grid.empty() ? "0,0.05,0.1,0.15,0.2,0.5,1.0" : o.grid);
  const int dim = static_cast<int>(corpus.train.front().features.cols());
  const auto model = model_config(o, file, corpus.alphabet, dim);
  Options base_opts = o;
  base_opts.mode = "cctc";
  const auto base = train_config(base_opts, file);
  const auto decode = decode_config(Options{}, file);

  // Phase 1 does not depend on the weight, so it is trained once.
  Trainer phase1(model, base, corpus.alphabet, corpus.train);
  phase1.run_phase1();
  out << "context_weight\twer\tcer\tmixed_rate\n";
  for (double w : grid) {
    auto config = base;
    config.alpha = config.beta = w;
    config.validate();
    Trainer trainer(model, config, corpus.alphabet, corpus.train);
    trainer.resume(phase1.state(), phase1.epochs_done());
    trainer.run_phase2();
    const auto r = evaluate(trainer.state(), model, data, corpus.alphabet, decode);
    out << format_double(w) << '\t' << format_double(r.total.wer()) << '\t' << format_double(r.total.cer()) << '\t'
        << format_double(r.total.mixed.rate()) << '\n';
  }
  return 0;
}

int cmd_lm(const Options& o) {
  if (o.out.empty()) throw Error("--out is required");
  const auto corpus = require_corpus(o);
  std::vector<std::vector<std::string>> sentences;
  for (const auto& utt : corpus.train) sentences.push_back(split_words(utt.transcript, corpus.alphabet));
  const auto lm = NgramModel::train(sentences, o.order);
  lm.save(o.out);
  std::cout << "lm order=" << o.order << " vocabulary=" << lm.vocabulary().size() << " out=" << o.out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Context-aware CTC toolkit"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&o](CLI::App* cmd) {
    cmd->add_option("--config", o.config, "Experiment config file ([corpus]/[model]/[train]/[decode] sections)");
    cmd->add_option("--seed", o.seed, "Random seed");
    cmd->add_option("--out", o.out, "Output path");
  };
  auto add_corpus = [&o](CLI::App* cmd) { cmd->add_option("--corpus", o.corpus, "Corpus directory"); };
  auto add_split = [&o](CLI::App* cmd) { cmd->add_option("--split", o.split, "Split: train, dev or test"); };
  auto add_model = [&o](CLI::App* cmd) {
    cmd->add_option("--context-weight", o.context_weight, "Context loss weight (alpha = beta)");
    cmd->add_option("--context-size", o.context_size, "Context order K");
  };
  auto add_decode = [&o](CLI::App* cmd) {
    cmd->add_option("--beam-width", o.beam_width, "Beam width");
    cmd->add_option("--lm", o.lm, "Word n-gram LM file");
    cmd->add_option("--lm-weight", o.lm_weight, "LM weight");
  };

  auto* gen = app.add_subcommand("generate", "Generate a synthetic code-switched corpus");
  add_common(gen);
  gen->add_option("--code-switch-prob", o.code_switch_prob, "Fraction of code-switched utterances");

  auto* tr = app.add_subcommand("train", "Train a model (phase 1 CTC, then phase 2)");
  add_common(tr);
  add_corpus(tr);
  add_model(tr);
  tr->add_option("--mode", o.mode, "ctc (baseline, zero context weights) or cctc");
  tr->add_option("--resume", o.resume, "Checkpoint to resume from");
  bool phase1_only = false;
  tr->add_flag("--phase1-only", phase1_only, "Stop after phase 1");

  auto* dec = app.add_subcommand("decode", "Decode a split: utt_id<TAB>transcript<TAB>score");
  add_common(dec);
  add_corpus(dec);
  add_split(dec);
  add_decode(dec);
  dec->add_option("--checkpoint", o.checkpoint, "Model checkpoint");
  dec->add_option("--mode", o.mode, "greedy, beam or beam+lm");

  auto* ev = app.add_subcommand("eval", "Decode a split and report WER/CER/mixed-script per subset");
  add_common(ev);
  add_corpus(ev);
  add_split(ev);
  add_decode(ev);
  ev->add_option("--checkpoint", o.checkpoint, "Model checkpoint");
  ev->add_option("--mode", o.mode, "greedy, beam or beam+lm");

  auto* sw = app.add_subcommand("sweep", "WER table over context weights or beam widths");
  add_common(sw);
  add_corpus(sw);
  add_split(sw);
  add_model(sw);
  add_decode(sw);
  sw->add_option("--axis", o.axis, "context_weight or beam_width")->required();
  sw->add_option("--grid", o.grid, "Comma-separated grid values");
  sw->add_option("--checkpoint", o.checkpoint, "Model checkpoint (beam_width axis)");
  sw->add_option("--mode", o.mode, "Decode mode for the beam_width axis: beam or beam+lm");

  auto* lm = app.add_subcommand("lm", "Train a word n-gram LM on the training transcripts");
  add_common(lm);
  add_corpus(lm);
  lm->add_option("--order", o.order, "n-gram order");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error: " << msg << '\n';
    return 2;
  }

  try {
    if (*gen) return cmd_generate(o);
    if (*tr) return cmd_train(o, phase1_only);
    if (*dec) return cmd_decode(o, false);
    if (*ev) return cmd_decode(o, true);
    if (*sw) return cmd_sweep(o);
    if (*lm) return cmd_lm(o);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error: " << msg << '\n';
    return 1;
  }
  return 1;
}

#pragma once

#include "cctc/acoustic_model.hpp"
#include "cctc/corpus.hpp"
#include "cctc/decoder.hpp"
#include "cctc/metrics.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace cctc {

/// Objective used in the second phase. `cctc` computes context labels and
/// losses (with zero weights this is the matched baseline); `ctc` skips the
/// context path entirely.
enum class Phase2Objective { cctc, ctc };

struct TrainConfig {
  int ctc_epochs = 60;
  int cctc_epochs = 20;
  int batch_size = 16;
  double lr = 2e-3;
  double lr_decay = 0.98;  // per epoch
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Per-order context weights; `context_weights(K)` ties alpha = beta.
  double alpha = 0.15;
  double beta = 0.15;
  Phase2Objective phase2 = Phase2Objective::cctc;
  std::uint64_t seed = 1;
  /// Evaluate greedy dev metrics every n epochs (0: only at phase ends).
  int eval_every = 0;

  void validate() const;
  double learning_rate(int epoch) const;
  CctcConfig context_weights(int context_size) const;
};

struct EpochRecord {
  int epoch = 0;  // 0-based, counted across both phases
  int phase = 1;
  double lr = 0;
  double ctc_loss = 0;                 // mean per utterance
  std::vector<double> context_losses;  // mean per utterance, unweighted, one per head
  int skipped = 0;                     // utterances whose target is unreachable
  std::optional<double> dev_wer;
  std::optional<double> dev_cer;
  std::optional<double> dev_mixed_rate;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int phase1_epochs = 0;
  int phase2_epochs = 0;

  /// One JSON object per epoch.
  std::string to_jsonl() const;
  void save(const std::string& path) const;
};

/// Raised when a loss turns NaN; carries the parameters at the failing step.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, ModelState<float> snapshot)
      : Error(what), snapshot_(std::move(snapshot)) {}
  const ModelState<float>& snapshot() const { return snapshot_; }

 private:
  ModelState<float> snapshot_;
};

/// Per-step view of the labels fed to the context heads.
struct LabelEvent {
  int epoch = 0;
  int step = 0;
  const Utterance* utterance = nullptr;
  const ContextTargets* targets = nullptr;
};

struct TrainResult {
  ModelState<float> state;
  TrainReport report;
};

/// Error counts and mixed-script counts of one group of utterances.
struct SubsetMetrics {
  ErrorCounts words;
  ErrorCounts chars;
  MixedScriptCount mixed;
  int utterances = 0;

  double wer() const { return words.rate().value_or(0.0); }
  double cer() const { return chars.rate().value_or(0.0); }
  SubsetMetrics& operator+=(const SubsetMetrics& other);
};

struct EvalResult {
  SubsetMetrics total;
  SubsetMetrics monolingual;
  SubsetMetrics code_switched;
  std::vector<Transcript> hypotheses;  // in input order
  std::vector<double> scores;          // combined score (0 for greedy)

  std::string to_text(const std::string& split) const;
};

/// Two-phase training: CTC only for `ctc_epochs`, then the phase-2
/// objective for `cctc_epochs`, with context labels regenerated from the
/// current model's argmax path at every step. Adam moments are reset at the
/// start of each phase; the learning rate decays per epoch across phases.
class Trainer {
 public:
  Trainer(ModelConfig model_config, TrainConfig config, const Alphabet& alphabet, const Dataset& train,
          const Dataset* dev = nullptr);

  /// Starts from `state` with `epochs_done` epochs already completed.
  void resume(ModelState<float> state, int epochs_done);

  void run_phase1();
  void run_phase2();
  TrainResult run();

  const ModelState<float>& state() const { return state_; }
  const TrainReport& report() const { return report_; }
  int epochs_done() const { return epochs_done_; }
  void set_label_observer(std::function<void(const LabelEvent&)> observer) { observer_ = std::move(observer); }

 private:
  struct Adam {
    ModelState<float> m;
    ModelState<float> v;
    long step = 0;
  };

  void run_epoch(int phase);
  void apply_update(const ModelState<float>& grad, double lr);

  ModelConfig model_config_;
  TrainConfig config_;
  const Alphabet& alphabet_;
  const Dataset& train_;
  const Dataset* dev_;
  ModelState<float> state_;
  Adam adam_;
  TrainReport report_;
  int epochs_done_ = 0;
  std::vector<std::vector<std::size_t>> batches_;
  std::function<void(const LabelEvent&)> observer_;
};

TrainResult train(const ModelConfig& model_config, const TrainConfig& config, const Alphabet& alphabet,
                  const Dataset& train, const Dataset* dev = nullptr);

/// Decodes every utterance and scores it against its reference.
EvalResult evaluate(const ModelState<float>& state, const ModelConfig& config, const Dataset& data,
                    const Alphabet& alphabet, const DecodeConfig& decode);

}  // namespace cctc

#include "cctc/trainer.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace cctc {

void TrainConfig::validate() const {
  if (ctc_epochs < 0 || cctc_epochs < 0) throw Error("epoch counts must be non-negative");
  if (batch_size < 1) throw Error("batch size must be positive");
  if (!(lr > 0) || !(lr_decay > 0)) throw Error("learning rate and decay must be positive");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1) || !(adam_eps > 0)) {
    throw Error("invalid adam hyperparameters");
  }
  if (!(alpha >= 0) || !(beta >= 0)) throw Error("context weights must be non-negative");
}

double TrainConfig::learning_rate(int epoch) const { return lr * std::pow(lr_decay, epoch); }

CctcConfig TrainConfig::context_weights(int context_size) const {
  return {context_size, std::vector<double>(context_size, alpha), std::vector<double>(context_size, beta)};
}

std::string TrainReport::to_jsonl() const {
  std::ostringstream out;
  for (const auto& e : epochs) {
    nlohmann::json j;
    j["epoch"] = e.epoch;
    j["phase"] = e.phase;
    j["lr"] = e.lr;
    j["ctc_loss"] = e.ctc_loss;
    j["context_losses"] = e.context_losses;
    j["skipped"] = e.skipped;
    if (e.dev_wer) j["dev_wer"] = *e.dev_wer;
    if (e.dev_cer) j["dev_cer"] = *e.dev_cer;
    if (e.dev_mixed_rate) j["dev_mixed_rate"] = *e.dev_mixed_rate;
    out << j.dump() << '\n';
  }
  return out.str();
}

void TrainReport::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << to_jsonl();
}

SubsetMetrics& SubsetMetrics::operator+=(const SubsetMetrics& other) {
  words += other.words;
  chars += other.chars;
  mixed += other.mixed;
  utterances += other.utterances;
  return *this;
}

std::string EvalResult::to_text(const std::string& split) const {
  std::ostringstream out;
  auto row = [&](const char* name, const SubsetMetrics& m) {
    out << "split=" << split << " subset=" << name << " utterances=" << m.utterances << " wer=" << m.wer()
        << " cer=" << m.cer() << " word_errors=" << m.words.errors() << " ref_words=" << m.words.reference_length
        << " char_errors=" << m.chars.errors() << " ref_chars=" << m.chars.reference_length
        << " mixed_words=" << m.mixed.mixed_words << " hyp_words=" << m.mixed.total_words
        << " mixed_rate=" << m.mixed.rate() << '\n';
  };
  row("all", total);
  row("mono", monolingual);
  row("cs", code_switched);
  return out.str();
}

Trainer::Trainer(ModelConfig model_config, TrainConfig config, const Alphabet& alphabet, const Dataset& train,
                 const Dataset* dev)
    : model_config_(std::move(model_config)), config_(config), alphabet_(alphabet), train_(train), dev_(dev) {
  config_.validate();
  model_config_.validate();
  if (train_.empty()) throw Error("empty training set");
  if (model_config_.alphabet_size != alphabet_.size()) throw Error("model and alphabet sizes differ");
  state_ = init_model<float>(model_config_, config_.seed);

  // Length-sorted buckets; the bucket order is shuffled every epoch.
  std::vector<std::size_t> order(train_.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [this](std::size_t a, std::size_t b) {
    const auto ta = train_[a].features.rows(), tb = train_[b].features.rows();
    return ta < tb || (ta == tb && train_[a].id < train_[b].id);
  });
  for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(config_.batch_size)) {
    const auto end = std::min(order.size(), i + static_cast<std::size_t>(config_.batch_size));
    batches_.emplace_back(order.begin() + static_cast<long>(i), order.begin() + static_cast<long>(end));
  }
}

void Trainer::resume(ModelState<float> state, int epochs_done) {
  state_ = std::move(state);
  epochs_done_ = epochs_done;
}

void Trainer::apply_update(const ModelState<float>& grad, double lr) {
  ++adam_.step;
  const double b1 = config_.adam_beta1, b2 = config_.adam_beta2;
  const auto c1 = static_cast<float>(1.0 / (1.0 - std::pow(b1, adam_.step)));
  const auto c2 = static_cast<float>(1.0 / (1.0 - std::pow(b2, adam_.step)));
  const auto eps = static_cast<float>(config_.adam_eps);
  const auto step = static_cast<float>(lr);
  auto params = state_.parameters();
  auto m = adam_.m.parameters();
  auto v = adam_.v.parameters();
  const auto g = grad.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i]->array() = static_cast<float>(b1) * m[i]->array() + static_cast<float>(1 - b1) * g[i]->array();
    v[i]->array() = static_cast<float>(b2) * v[i]->array() + static_cast<float>(1 - b2) * g[i]->array().square();
    params[i]->array() -= step * (m[i]->array() * c1) / ((v[i]->array() * c2).sqrt() + eps);
  }
  ++state_.version;
}

void Trainer::run_epoch(int phase) {
  const int epoch = epochs_done_;
  const double lr = config_.learning_rate(epoch);
  const bool use_context = phase == 2 && config_.phase2 == Phase2Objective::cctc && model_config_.context_size > 0;
  const CctcConfig weights = config_.context_weights(std::max(model_config_.context_size, 1));

  std::vector<std::size_t> batch_order(batches_.size());
  std::iota(batch_order.begin(), batch_order.end(), 0);
  std::mt19937_64 rng(config_.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(epoch));
  std::shuffle(batch_order.begin(), batch_order.end(), rng);

  EpochRecord record;
  record.epoch = epoch;
  record.phase = phase;
  record.lr = lr;
  record.context_losses.assign(use_context ? model_config_.head_count() : 0, 0.0);
  long counted = 0;
  int step = 0;
  for (std::size_t b : batch_order) {
    ModelState<float> grad = state_.zeros_like();
    int used = 0;
    for (std::size_t idx : batches_[b]) {
      const Utterance& utt = train_[idx];
      auto fwd = forward(state_, model_config_, utt.features);
      if (fwd.lattice.hasNaN()) {
        throw TrainingDiverged("NaN in model output at epoch " + std::to_string(epoch) + " step " +
                                   std::to_string(step) + " utterance " + utt.id,
                               state_);
      }
      ModelState<float> g;
      double loss = 0;
      if (use_context) {
        auto res = cctc_loss(fwd.lattice, fwd.heads, utt.transcript, alphabet_.blank(), weights);
        if (observer_) observer_({epoch, step, &utt, &res.targets});
        if (res.ctc.unreachable) {
          ++record.skipped;
          continue;
        }
        loss = res.loss;
        record.ctc_loss += res.ctc.loss;
        for (std::size_t c = 0; c < res.context_losses.size(); ++c) record.context_losses[c] += res.context_losses[c];
        g = backward(state_, model_config_, fwd, res.ctc.grad, res.head_grads);
      } else {
        auto res = ctc_forward(fwd.lattice, utt.transcript, alphabet_.blank());
        if (res.unreachable) {
          ++record.skipped;
          continue;
        }
        loss = res.loss;
        record.ctc_loss += res.loss;
        g = backward(state_, model_config_, fwd, res.grad, {});
      }
      if (std::isnan(loss)) {
        throw TrainingDiverged("NaN loss at epoch " + std::to_string(epoch) + " step " + std::to_string(step) +
                                   " utterance " + utt.id,
                               state_);
      }
      auto acc = grad.parameters();
      const auto gp = g.parameters();
      for (std::size_t i = 0; i < acc.size(); ++i) *acc[i] += *gp[i];
      ++used;
    }
    if (used > 0) {
      const float scale = 1.0f / static_cast<float>(used);
      for (auto* p : grad.parameters()) *p *= scale;
      apply_update(grad, lr);
      counted += used;
    }
    ++step;
  }
  if (counted > 0) {
    record.ctc_loss /= static_cast<double>(counted);
    for (auto& c : record.context_losses) c /= static_cast<double>(counted);
  }
  ++epochs_done_;

  const int phase_end = phase == 1 ? config_.ctc_epochs : config_.ctc_epochs + config_.cctc_epochs;
  const bool eval_now = (config_.eval_every > 0 && epochs_done_ % config_.eval_every == 0) || epochs_done_ == phase_end;
  if (dev_ && !dev_->empty() && eval_now) {
    DecodeConfig greedy;
    auto result = evaluate(state_, model_config_, *dev_, alphabet_, greedy);
    record.dev_wer = result.total.wer();
    record.dev_cer = result.total.cer();
    record.dev_mixed_rate = result.total.mixed.rate();
  }
  report_.epochs.push_back(std::move(record));
}

void Trainer::run_phase1() {
  adam_ = {state_.zeros_like(), state_.zeros_like(), 0};
  while (epochs_done_ < config_.ctc_epochs) run_epoch(1);
  report_.phase1_epochs = config_.ctc_epochs;
}

void Trainer::run_phase2() {
  adam_ = {state_.zeros_like(), state_.zeros_like(), 0};
  epochs_done_ = std::max(epochs_done_, config_.ctc_epochs);
  while (epochs_done_ < config_.ctc_epochs + config_.cctc_epochs) run_epoch(2);
  report_.phase2_epochs = config_.cctc_epochs;
}

TrainResult Trainer::run() {
  if (epochs_done_ < config_.ctc_epochs) run_phase1();
  run_phase2();
  return {state_, report_};
}

TrainResult train(const ModelConfig& model_config, const TrainConfig& config, const Alphabet& alphabet,
                  const Dataset& train, const Dataset* dev) {
  Trainer trainer(model_config, config, alphabet, train, dev);
  return trainer.run();
}

EvalResult evaluate(const ModelState<float>& state, const ModelConfig& config, const Dataset& data,
                    const Alphabet& alphabet, const DecodeConfig& decode) {
  decode.validate();
  const auto [infer_config, infer_state] = strip_context_heads(config, state);
  std::optional<PrefixBeamSearch> search;
  if (decode.mode != DecodeMode::greedy) search.emplace(alphabet, decode);

  EvalResult result;
  for (const auto& utt : data) {
    auto fwd = forward(infer_state, infer_config, utt.features);
    Transcript hyp;
    double score = 0;
    if (search) {
      auto hyps = search->search(fwd.lattice.cast<double>());
      if (!hyps.empty()) {
        hyp = hyps.front().transcript;
        score = hyps.front().combined;
      }
    } else {
      hyp = greedy_decode(fwd.lattice, alphabet.blank());
    }
    SubsetMetrics m;
    m.utterances = 1;
    const auto ref_words = split_words(utt.transcript, alphabet);
    const auto hyp_words = split_words(hyp, alphabet);
    m.words = wer(ref_words, hyp_words);
    m.chars = cer(utt.transcript, hyp);
    m.mixed = mixed_script_words(std::span<const Transcript>(&hyp, 1), alphabet);
    result.total += m;
    (utt.code_switched ? result.code_switched : result.monolingual) += m;
    result.hypotheses.push_back(std::move(hyp));
    result.scores.push_back(score);
  }
  return result;
}

}  // namespace cctc

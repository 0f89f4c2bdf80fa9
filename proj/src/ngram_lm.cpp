#include "cctc/ngram_lm.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace cctc {

namespace {

double safe_log(double x) { return x > 0 ? std::log(x) : neg_inf<double>(); }

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::string smoothing_name(SmoothingConfig::Kind kind) {
  return kind == SmoothingConfig::Kind::add_k ? "add_k" : "stupid_backoff";
}

}  // namespace

double LanguageModel::score(std::span<const std::string> tokens) const {
  std::vector<std::string> history;
  double total = 0;
  for (const auto& tok : tokens) {
    total += log_prob(history, tok);
    history.push_back(tok);
  }
  return total + log_prob(history, kSentenceEnd);
}

NgramModel NgramModel::train(std::span<const std::vector<std::string>> sentences, int order,
                             const SmoothingConfig& smoothing) {
  if (order < 1) throw Error("n-gram order must be >= 1");
  if (sentences.empty()) throw Error("empty corpus");
  if (smoothing.k < 0) throw Error("add-k pseudo-count must be non-negative");

  NgramModel model;
  model.order_ = order;
  model.smoothing_ = smoothing;
  model.tables_.resize(order);

  // counts[m-1][ngram] for n-grams of length m over <s> w1 .. wN </s>.
  std::vector<std::map<Key, double>> counts(order);
  for (const auto& sentence : sentences) {
    Key padded{kSentenceStart};
    for (const auto& w : sentence) {
      if (w == kSentenceStart || w == kSentenceEnd) throw Error("sentence contains a boundary token");
      padded.push_back(w);
      model.vocabulary_.insert(w);
    }
    padded.push_back(kSentenceEnd);
    for (std::size_t end = 1; end < padded.size(); ++end) {
      for (int m = 1; m <= order && static_cast<int>(end) + 1 >= m; ++m) {
        Key gram(padded.begin() + static_cast<long>(end) + 1 - m, padded.begin() + static_cast<long>(end) + 1);
        counts[m - 1][gram] += 1;
      }
    }
  }
  model.vocabulary_.insert(kSentenceEnd);
  model.vocabulary_.insert(kUnknown);
  const double V = static_cast<double>(model.vocabulary_.size());
  const double k = smoothing.k;
  const bool stupid = smoothing.kind == SmoothingConfig::Kind::stupid_backoff;

  // Unigrams: every predictable word is stored; <s> carries only a backoff.
  double total = 0;
  for (const auto& [gram, c] : counts[0]) total += c;
  for (const auto& w : model.vocabulary_) {
    auto it = counts[0].find({w});
    const double c = it == counts[0].end() ? 0.0 : it->second;
    model.tables_[0][{w}] = {safe_log((c + k) / (total + k * V)), 0.0};
  }
  model.tables_[0][{kSentenceStart}] = {neg_inf<double>(), 0.0};

  for (int m = 2; m <= order; ++m) {
    // Group m-grams by their context.
    std::map<Key, std::vector<std::pair<std::string, double>>> by_context;
    for (const auto& [gram, c] : counts[m - 1]) {
      by_context[Key(gram.begin(), gram.end() - 1)].emplace_back(gram.back(), c);
    }
    for (const auto& [context, followers] : by_context) {
      double context_count = 0;
      for (const auto& [w, c] : followers) context_count += c;
      const Key shorter(context.begin() + 1, context.end());
      double lower_seen = 0;
      for (const auto& [w, c] : followers) {
        Key gram = context;
        gram.push_back(w);
        const double p = stupid ? c / context_count : (c + k) / (context_count + k * V);
        model.tables_[m - 1][gram] = {safe_log(p), 0.0};
        lower_seen += std::exp(model.log_prob_in_context(shorter, w));
      }
      double log_backoff = 0;
      if (stupid) {
        log_backoff = std::log(smoothing.backoff_factor);
      } else {
        const double leftover = k * (V - static_cast<double>(followers.size())) / (context_count + k * V);
        const double room = 1.0 - lower_seen;
        if (leftover <= 0) {
          log_backoff = neg_inf<double>();
        } else if (room > 1e-12) {
          log_backoff = std::log(leftover / room);
        }
      }
      model.tables_[m - 2].at(context).log_backoff = log_backoff;
    }
  }
  return model;
}

double NgramModel::log_prob(std::span<const std::string> history, const std::string& word) const {
  // Context: <s> + history, truncated to the last order-1 tokens.
  Key context{kSentenceStart};
  context.insert(context.end(), history.begin(), history.end());
  if (static_cast<int>(context.size()) > order_ - 1) {
    context.erase(context.begin(), context.end() - (order_ - 1));
  }
  return log_prob_in_context(std::move(context), word);
}

double NgramModel::log_prob_in_context(Key context, const std::string& word) const {
  const std::string& w = vocabulary_.count(word) ? word : kUnknown;
  double backoff = 0;
  while (true) {
    Key gram = context;
    gram.push_back(w);
    const auto& table = tables_[gram.size() - 1];
    auto it = table.find(gram);
    if (it != table.end()) return backoff + it->second.log_prob;
    if (context.empty()) return neg_inf<double>();
    auto ctx = tables_[context.size() - 1].find(context);
    if (ctx != tables_[context.size() - 1].end()) {
      if (ctx->second.log_backoff == neg_inf<double>()) return neg_inf<double>();
      backoff += ctx->second.log_backoff;
    }
    context.erase(context.begin());
  }
}

void NgramModel::write(std::ostream& out) const {
  out << "#ngram-lm 1\n";
  out << "order\t" << order_ << '\n';
  out << "smoothing\t" << smoothing_name(smoothing_.kind) << '\t' << std::setprecision(17) << smoothing_.k << '\t'
      << smoothing_.backoff_factor << '\n';
  for (int m = 1; m <= order_; ++m) out << "ngrams\t" << m << '\t' << tables_[m - 1].size() << '\n';
  out << "\\data\n";
  for (int m = 1; m <= order_; ++m) {
    for (const auto& [gram, entry] : tables_[m - 1]) {
      out << std::setprecision(17) << entry.log_prob << '\t' << join(gram) << '\t' << entry.log_backoff << '\n';
    }
  }
}

NgramModel NgramModel::read(std::istream& in) {
  NgramModel model;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& what) {
    throw Error("malformed lm file line " + std::to_string(line_no) + ": " + what);
  };
  auto next = [&]() {
    if (!std::getline(in, line)) fail("unexpected end of file");
    ++line_no;
    return line;
  };
  if (next() != "#ngram-lm 1") fail("bad magic");
  {
    std::istringstream f(next());
    std::string key;
    if (!(f >> key >> model.order_) || key != "order" || model.order_ < 1) fail("order");
  }
  {
    std::istringstream f(next());
    std::string key, kind;
    if (!(f >> key >> kind >> model.smoothing_.k >> model.smoothing_.backoff_factor) || key != "smoothing") {
      fail("smoothing");
    }
    if (kind == "add_k") {
      model.smoothing_.kind = SmoothingConfig::Kind::add_k;
    } else if (kind == "stupid_backoff") {
      model.smoothing_.kind = SmoothingConfig::Kind::stupid_backoff;
    } else {
      fail("smoothing kind");
    }
  }
  std::vector<std::size_t> expected(model.order_);
  for (int m = 1; m <= model.order_; ++m) {
    std::istringstream f(next());
    std::string key;
    int n = 0;
    if (!(f >> key >> n >> expected[m - 1]) || key != "ngrams" || n != m) fail("ngram counts");
  }
  if (next() != "\\data") fail("missing \\data");
  model.tables_.resize(model.order_);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = line.rfind('\t');
    if (t1 == std::string::npos || t1 == t2) fail("expected logp<TAB>tokens<TAB>backoff");
    Entry entry;
    try {
      entry.log_prob = std::stod(line.substr(0, t1));
      entry.log_backoff = std::stod(line.substr(t2 + 1));
    } catch (const std::exception&) {
      fail("bad number");
    }
    Key gram = split_tokens(line.substr(t1 + 1, t2 - t1 - 1));
    if (gram.empty() || static_cast<int>(gram.size()) > model.order_) fail("bad n-gram length");
    if (gram.size() == 1 && gram[0] != kSentenceStart) model.vocabulary_.insert(gram[0]);
    model.tables_[gram.size() - 1][gram] = entry;
  }
  for (int m = 1; m <= model.order_; ++m) {
    if (model.tables_[m - 1].size() != expected[m - 1]) fail("n-gram count mismatch");
  }
  return model;
}

void NgramModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write(out);
}

NgramModel NgramModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  return read(in);
}

bool NgramModel::operator==(const NgramModel& other) const {
  if (order_ != other.order_ || vocabulary_ != other.vocabulary_ || tables_.size() != other.tables_.size()) {
    return false;
  }
  for (std::size_t m = 0; m < tables_.size(); ++m) {
    if (tables_[m].size() != other.tables_[m].size()) return false;
    for (const auto& [gram, e] : tables_[m]) {
      auto it = other.tables_[m].find(gram);
      if (it == other.tables_[m].end()) return false;
      if (e.log_prob != it->second.log_prob || e.log_backoff != it->second.log_backoff) return false;
    }
  }
  return true;
}

InterpolatedLm::InterpolatedLm(std::vector<std::shared_ptr<const LanguageModel>> components,
                               std::vector<double> weights)
    : components_(std::move(components)), weights_(std::move(weights)) {
  if (components_.empty() || components_.size() != weights_.size()) {
    throw Error("interpolation needs one weight per component");
  }
  double sum = 0;
  for (double w : weights_) {
    if (!(w >= 0)) throw Error("interpolation weights must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error("interpolation weights must sum to 1");
}

int InterpolatedLm::order() const {
  int order = 1;
  for (const auto& c : components_) order = std::max(order, c->order());
  return order;
}

double InterpolatedLm::log_prob(std::span<const std::string> history, const std::string& word) const {
  double total = neg_inf<double>();
  for (std::size_t i = 0; i < components_.size(); ++i) {
    if (weights_[i] == 0) continue;
    total = log_add(total, std::log(weights_[i]) + components_[i]->log_prob(history, word));
  }
  return total;
}

}  // namespace cctc

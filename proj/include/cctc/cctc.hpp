#pragma once

#include "cctc/common.hpp"
#include "cctc/ctc_loss.hpp"
#include "cctc/path_algebra.hpp"

#include <span>
#include <vector>

namespace cctc {

/// Column layout shared by every T x 2K context matrix: columns 0..K-1 hold
/// orders -K..-1 and columns K..2K-1 hold orders +1..+K.
inline int context_column(int order, int context_size) {
  return order < 0 ? order + context_size : context_size + order - 1;
}

inline int context_order(int column, int context_size) {
  return column < context_size ? column - context_size : column - context_size + 1;
}

/// Merged-path positions of the context characters of every frame.
/// `index(t, c)` is a 0-based position into `h`, or -1 where `valid` is false.
struct ContextIndices {
  IndexMatrix index;
  MaskMatrix valid;
};

/// Walks outward from p[t] on each side: one step if the neighbour is a
/// character, two if it is a blank (h never holds two adjacent blanks). Each
/// higher order restarts from the previous order's position. Positions that
/// fall off either end of h are masked, together with every higher order.
inline ContextIndices context_indices(const MergedPath& merged, TokenId blank, int context_size) {
  if (context_size < 1) throw Error("context size must be >= 1");
  const int T = static_cast<int>(merged.p.size());
  const int L = static_cast<int>(merged.h.size());
  ContextIndices out{IndexMatrix::Constant(T, 2 * context_size, -1),
                     MaskMatrix::Constant(T, 2 * context_size, false)};
  for (int t = 0; t < T; ++t) {
    for (int d : {-1, 1}) {
      int prev = merged.p[t];
      for (int k = 1; k <= context_size; ++k) {
        int next = prev + d;
        if (next < 0 || next >= L) break;
        if (merged.h[next] == blank) {
          next += d;
          if (next < 0 || next >= L) break;
        }
        const int col = context_column(d * k, context_size);
        out.index(t, col) = next;
        out.valid(t, col) = true;
        prev = next;
      }
    }
  }
  return out;
}

/// Context labels for the heads. `targets(t, c)` is a column index into a
/// context head (a character of A, never the blank); -1 where masked.
struct ContextTargets {
  IndexMatrix targets;
  MaskMatrix valid;

  int frames() const { return static_cast<int>(targets.rows()); }
  int context_size() const { return static_cast<int>(targets.cols()) / 2; }
};

/// Labels for every frame of `path` derived through H and G. The blank must be
/// token 0 so that token id k maps to head column k - 1.
inline ContextTargets context_targets(std::span<const TokenId> path, TokenId blank, int context_size) {
  const int K2 = 2 * context_size;
  if (path.empty()) return {IndexMatrix(0, K2), MaskMatrix(0, K2)};
  const MergedPath merged = merge_duplicates(path);
  const ContextIndices idx = context_indices(merged, blank, context_size);
  ContextTargets out{IndexMatrix::Constant(idx.index.rows(), K2, -1), idx.valid};
  for (Eigen::Index t = 0; t < idx.index.rows(); ++t) {
    for (int c = 0; c < K2; ++c) {
      if (!idx.valid(t, c)) continue;
      const TokenId tok = merged.h[idx.index(t, c)];
      out.targets(t, c) = tok < blank ? tok : tok - 1;
    }
  }
  return out;
}

/// Context size K and the per-order weights: alpha[k-1] weighs order -k and
/// beta[k-1] weighs order +k.
struct CctcConfig {
  int context_size = 1;
  std::vector<double> alpha{0.15};
  std::vector<double> beta{0.15};

  static CctcConfig tied(int context_size, double weight) {
    return {context_size, std::vector<double>(context_size, weight), std::vector<double>(context_size, weight)};
  }

  void validate() const {
    if (context_size < 1) throw Error("context size must be >= 1");
    if (static_cast<int>(alpha.size()) != context_size || static_cast<int>(beta.size()) != context_size) {
      throw Error("context weights must have one entry per order");
    }
    for (double w : alpha) {
      if (!(w >= 0)) throw Error("context weights must be non-negative");
    }
    for (double w : beta) {
      if (!(w >= 0)) throw Error("context weights must be non-negative");
    }
  }

  double weight(int column) const {
    const int order = context_order(column, context_size);
    return order < 0 ? alpha[-order - 1] : beta[order - 1];
  }
};

/// One T x |A| log-distribution per context head, in column order.
template <typename Scalar>
using ContextHeadOutput = std::vector<Lattice<Scalar>>;

template <typename Scalar>
struct ContextLoss {
  std::vector<Scalar> losses;        // unweighted, one per head
  std::vector<Lattice<Scalar>> grads;  // unweighted, softmax-consistent
};

/// Cross-entropy of each head against its labels, summed over valid frames.
template <typename Scalar>
ContextLoss<Scalar> context_ce_loss(const ContextHeadOutput<Scalar>& heads, const ContextTargets& targets) {
  const int K2 = static_cast<int>(targets.targets.cols());
  if (static_cast<int>(heads.size()) != K2) throw Error("context head count mismatch");
  ContextLoss<Scalar> out;
  out.losses.assign(K2, Scalar(0));
  for (int c = 0; c < K2; ++c) {
    const auto& logp = heads[c];
    if (logp.rows() != targets.targets.rows()) throw Error("context head frame count mismatch");
    Lattice<Scalar> grad = Lattice<Scalar>::Zero(logp.rows(), logp.cols());
    for (Eigen::Index t = 0; t < logp.rows(); ++t) {
      if (!targets.valid(t, c)) continue;
      const int y = targets.targets(t, c);
      if (y < 0 || y >= logp.cols()) throw Error("context target out of range");
      out.losses[c] -= logp(t, y);
      grad.row(t) = logp.row(t).array().exp();
      grad(t, y) -= Scalar(1);
    }
    out.grads.push_back(std::move(grad));
  }
  return out;
}

template <typename Scalar>
struct CctcResult {
  Scalar loss = 0;                     // CTC term plus weighted context terms
  CtcResult<Scalar> ctc;
  std::vector<Scalar> context_losses;  // unweighted, one per head
  std::vector<Lattice<Scalar>> head_grads;  // weighted
  Path path;                           // argmax path the labels came from
  ContextTargets targets;
};

/// Frame-wise argmax path of a lattice, ties to the lowest token id.
template <typename Derived>
Path best_path(const Eigen::MatrixBase<Derived>& logp) {
  Path path(logp.rows());
  for (Eigen::Index t = 0; t < logp.rows(); ++t) path[t] = static_cast<TokenId>(argmax(logp.row(t)));
  return path;
}

/// CTC on the middle head plus weighted context cross-entropies, with labels
/// taken from the middle head's own argmax path. The labels are constants:
/// the lattice gradient is the CTC gradient alone.
template <typename Scalar>
CctcResult<Scalar> cctc_loss(const Lattice<Scalar>& lattice, const ContextHeadOutput<Scalar>& heads,
                             std::span<const TokenId> target, TokenId blank, const CctcConfig& config) {
  config.validate();
  CctcResult<Scalar> out;
  out.ctc = ctc_forward(lattice, target, blank);
  out.path = best_path(lattice);
  out.targets = context_targets(out.path, blank, config.context_size);
  ContextLoss<Scalar> ce = context_ce_loss(heads, out.targets);
  out.loss = out.ctc.loss;
  for (std::size_t c = 0; c < ce.losses.size(); ++c) {
    const auto w = static_cast<Scalar>(config.weight(static_cast<int>(c)));
    out.loss += w * ce.losses[c];
    out.head_grads.push_back(w * ce.grads[c]);
  }
  out.context_losses = std::move(ce.losses);
  return out;
}

}  // namespace cctc

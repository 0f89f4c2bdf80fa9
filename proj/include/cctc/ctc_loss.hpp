#pragma once

#include "cctc/common.hpp"
#include "cctc/path_algebra.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace cctc {

/// Loss and gradient of CTC for one utterance.
///
/// `grad` is the derivative of `loss` with respect to the lattice entries
/// under row renormalisation, i.e. exp(logp) - occupancy. It equals the
/// gradient with respect to the logits feeding a log-softmax, so its rows
/// sum to zero whenever the loss is finite.
template <typename Scalar>
struct CtcResult {
  Scalar loss = 0;
  Lattice<Scalar> grad;
  bool unreachable = false;
};

/// Smallest frame count that can emit `target`: one frame per character plus
/// one separating blank per pair of equal adjacent characters.
inline int min_frames(std::span<const TokenId> target) {
  int n = static_cast<int>(target.size());
  for (std::size_t i = 1; i < target.size(); ++i) {
    if (target[i] == target[i - 1]) ++n;
  }
  return n;
}

/// Throws Error("invalid lattice") if any entry is NaN or +inf. Entries equal
/// to -inf (zero probability) are allowed.
template <typename Derived>
void check_lattice(const Eigen::MatrixBase<Derived>& logp) {
  for (Eigen::Index t = 0; t < logp.rows(); ++t) {
    for (Eigen::Index k = 0; k < logp.cols(); ++k) {
      const auto v = logp(t, k);
      if (std::isnan(v) || v == std::numeric_limits<typename Derived::Scalar>::infinity()) {
        throw Error("invalid lattice");
      }
    }
  }
}

inline void check_target(std::span<const TokenId> target, Eigen::Index vocab, TokenId blank) {
  for (TokenId c : target) {
    if (c < 0 || c >= vocab || c == blank) throw Error("invalid target token");
  }
}

/// -log P(target | lattice), summing over every path that collapses to the
/// target, with its gradient. Forward and backward recursions run in log
/// space over the blank-interleaved target.
template <typename Derived>
CtcResult<typename Derived::Scalar> ctc_forward(const Eigen::MatrixBase<Derived>& logp,
                                                std::span<const TokenId> target, TokenId blank) {
  using Scalar = typename Derived::Scalar;
  check_lattice(logp);
  check_target(target, logp.cols(), blank);

  const int T = static_cast<int>(logp.rows());
  const int V = static_cast<int>(logp.cols());
  CtcResult<Scalar> result;
  result.grad = Lattice<Scalar>::Zero(T, V);

  const int U = static_cast<int>(target.size());
  if (T == 0 || T < min_frames(target)) {
    result.loss = std::numeric_limits<Scalar>::infinity();
    result.unreachable = true;
    return result;
  }

  const int S = 2 * U + 1;
  std::vector<TokenId> ext(S, blank);
  for (int u = 0; u < U; ++u) ext[2 * u + 1] = target[u];
  // skip[s]: the s-2 -> s transition is allowed (distinct labels around a blank).
  std::vector<char> skip(S, 0);
  for (int s = 3; s < S; s += 2) skip[s] = ext[s] != ext[s - 2];

  const Scalar ninf = neg_inf<Scalar>();
  Lattice<Scalar> alpha = Lattice<Scalar>::Constant(T, S, ninf);
  Lattice<Scalar> beta = Lattice<Scalar>::Constant(T, S, ninf);

  alpha(0, 0) = logp(0, ext[0]);
  if (S > 1) alpha(0, 1) = logp(0, ext[1]);
  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      Scalar acc = alpha(t - 1, s);
      if (s >= 1) acc = log_add(acc, alpha(t - 1, s - 1));
      if (s >= 2 && skip[s]) acc = log_add(acc, alpha(t - 1, s - 2));
      alpha(t, s) = acc == ninf ? ninf : acc + logp(t, ext[s]);
    }
  }

  beta(T - 1, S - 1) = logp(T - 1, ext[S - 1]);
  if (S > 1) beta(T - 1, S - 2) = logp(T - 1, ext[S - 2]);
  for (int t = T - 2; t >= 0; --t) {
    for (int s = 0; s < S; ++s) {
      Scalar acc = beta(t + 1, s);
      if (s + 1 < S) acc = log_add(acc, beta(t + 1, s + 1));
      if (s + 2 < S && skip[s + 2]) acc = log_add(acc, beta(t + 1, s + 2));
      beta(t, s) = acc == ninf ? ninf : acc + logp(t, ext[s]);
    }
  }

  Scalar log_likelihood = alpha(T - 1, S - 1);
  if (S > 1) log_likelihood = log_add(log_likelihood, alpha(T - 1, S - 2));
  if (log_likelihood == ninf) {
    result.loss = std::numeric_limits<Scalar>::infinity();
    result.unreachable = true;
    return result;
  }
  result.loss = -log_likelihood;

  // Occupancy of token k at frame t: sum over s with ext[s] == k of
  // alpha*beta / (P * p(t,k)); alpha and beta both include the emission.
  Lattice<Scalar> log_occ = Lattice<Scalar>::Constant(T, V, ninf);
  for (int t = 0; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      const Scalar ab = alpha(t, s) + beta(t, s);
      if (alpha(t, s) == ninf || beta(t, s) == ninf) continue;
      log_occ(t, ext[s]) = log_add(log_occ(t, ext[s]), ab);
    }
  }
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < V; ++k) {
      const Scalar lp = logp(t, k);
      const Scalar prob = lp == ninf ? Scalar(0) : std::exp(lp);
      Scalar occ = 0;
      if (log_occ(t, k) != ninf) occ = std::exp(log_occ(t, k) - lp - log_likelihood);
      result.grad(t, k) = prob - occ;
    }
  }
  return result;
}

/// Literal path-enumeration oracle for -log P(target | lattice). Refuses
/// instances with more than 10^7 paths (Error("oracle limit")).
template <typename Derived>
typename Derived::Scalar ctc_brute_force(const Eigen::MatrixBase<Derived>& logp, std::span<const TokenId> target,
                                         TokenId blank) {
  using Scalar = typename Derived::Scalar;
  const int T = static_cast<int>(logp.rows());
  const int V = static_cast<int>(logp.cols());
  double count = std::pow(static_cast<double>(V), T);
  if (count > 1e7) throw Error("oracle limit");
  const Transcript want(target.begin(), target.end());

  Scalar total = neg_inf<Scalar>();
  Path path(T, 0);
  const long long n = static_cast<long long>(count);
  for (long long code = 0; code < n; ++code) {
    long long rest = code;
    Scalar score = 0;
    for (int t = T - 1; t >= 0; --t) {
      path[t] = static_cast<TokenId>(rest % V);
      rest /= V;
      score += logp(t, path[t]);
    }
    if (collapse(path, blank) == want) total = log_add(total, score);
  }
  return -total;
}

}  // namespace cctc

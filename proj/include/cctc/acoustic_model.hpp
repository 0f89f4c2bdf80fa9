#pragma once

#include "cctc/cctc.hpp"
#include "cctc/common.hpp"
#include "cctc/path_algebra.hpp"

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace cctc {

struct ConvSpec {
  int channels = 64;
  int kernel = 5;
  int stride = 1;
  int dilation = 1;

  bool operator==(const ConvSpec&) const = default;
};

enum class Activation { relu, tanh };

std::string to_string(Activation act);
Activation parse_activation(const std::string& name);

/// Shape of the fully convolutional network. `alphabet_size` is |A|; the
/// middle head emits |A| + 1 classes (blank first) and each of the 2K
/// context heads emits |A|. K = 0 gives a plain CTC model.
struct ModelConfig {
  int input_dim = 16;
  std::vector<ConvSpec> conv_layers;
  Activation activation = Activation::relu;
  int context_size = 1;
  int alphabet_size = 0;

  /// Five 64-channel kernel-5 layers, stride 2 on the first.
  static ModelConfig desk_scale(int input_dim, int alphabet_size, int context_size);

  void validate() const;
  int total_stride() const;
  /// Input frames seen by one output frame.
  int receptive_field() const;
  /// Shortest accepted input: one full stride of frames.
  int min_input_frames() const { return total_stride(); }
  int output_frames(int input_frames) const;
  int head_count() const { return 2 * context_size; }

  /// "channels:kernel:stride:dilation" per layer, comma separated.
  std::string conv_string() const;
  static std::vector<ConvSpec> parse_conv_string(const std::string& text);

  bool operator==(const ModelConfig&) const = default;
};

template <typename Scalar>
struct Affine {
  Matrix<Scalar> weight;  // out x in
  Matrix<Scalar> bias;    // out x 1
};

/// Parameters of the network. The same type carries gradients and optimizer
/// moments. `version` changes on every update so stale caches are detected.
template <typename Scalar>
struct ModelState {
  std::vector<Affine<Scalar>> conv;  // conv weights are out x (kernel * in)
  Affine<Scalar> middle;
  std::vector<Affine<Scalar>> context;
  std::uint64_t version = 0;

  /// Parameters in checkpoint order: conv layers, middle head, context heads.
  std::vector<Matrix<Scalar>*> parameters() {
    std::vector<Matrix<Scalar>*> out;
    for (auto& l : conv) out.insert(out.end(), {&l.weight, &l.bias});
    out.insert(out.end(), {&middle.weight, &middle.bias});
    for (auto& l : context) out.insert(out.end(), {&l.weight, &l.bias});
    return out;
  }
  std::vector<const Matrix<Scalar>*> parameters() const {
    std::vector<const Matrix<Scalar>*> out;
    for (auto* p : const_cast<ModelState*>(this)->parameters()) out.push_back(p);
    return out;
  }
  std::vector<std::string> parameter_names() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < conv.size(); ++i) {
      out.push_back("conv" + std::to_string(i) + ".weight");
      out.push_back("conv" + std::to_string(i) + ".bias");
    }
    out.push_back("middle.weight");
    out.push_back("middle.bias");
    for (std::size_t i = 0; i < context.size(); ++i) {
      out.push_back("context" + std::to_string(i) + ".weight");
      out.push_back("context" + std::to_string(i) + ".bias");
    }
    return out;
  }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : parameters()) n += static_cast<std::size_t>(p->size());
    return n;
  }

  /// Zero-filled state with the same shapes.
  ModelState zeros_like() const {
    ModelState out = *this;
    for (auto* p : out.parameters()) p->setZero();
    out.version = 0;
    return out;
  }

  template <typename Other>
  ModelState<Other> cast() const {
    ModelState<Other> out;
    auto conv_cast = [](const Affine<Scalar>& a) {
      return Affine<Other>{a.weight.template cast<Other>(), a.bias.template cast<Other>()};
    };
    for (const auto& l : conv) out.conv.push_back(conv_cast(l));
    out.middle = conv_cast(middle);
    for (const auto& l : context) out.context.push_back(conv_cast(l));
    out.version = version;
    return out;
  }
};

/// Fan-in scaled uniform weights, zero biases.
template <typename Scalar>
ModelState<Scalar> init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  auto affine = [&rng](int out, int in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Affine<Scalar> a{Matrix<Scalar>(out, in), Matrix<Scalar>::Zero(out, 1)};
    for (Eigen::Index j = 0; j < a.weight.cols(); ++j) {
      for (Eigen::Index i = 0; i < a.weight.rows(); ++i) a.weight(i, j) = static_cast<Scalar>(dist(rng));
    }
    return a;
  };
  ModelState<Scalar> state;
  int in = config.input_dim;
  for (const auto& layer : config.conv_layers) {
    state.conv.push_back(affine(layer.channels, layer.kernel * in));
    in = layer.channels;
  }
  state.middle = affine(config.alphabet_size + 1, in);
  for (int h = 0; h < config.head_count(); ++h) state.context.push_back(affine(config.alphabet_size, in));
  return state;
}

/// Intermediate values kept by forward() for backward(). Activations are
/// channels x frames.
template <typename Scalar>
struct ForwardCache {
  std::uint64_t version = 0;
  int input_frames = 0;
  std::vector<Matrix<Scalar>> patches;      // per layer, (kernel * in) x T_out
  std::vector<Matrix<Scalar>> activations;  // per layer output, channels x T_out
};

template <typename Scalar>
struct ForwardResult {
  Lattice<Scalar> lattice;          // T x (|A| + 1)
  ContextHeadOutput<Scalar> heads;  // 2K of T x |A|
  ForwardCache<Scalar> cache;
};

namespace detail {

template <typename Scalar>
Matrix<Scalar> im2col(const Matrix<Scalar>& input, const ConvSpec& spec) {
  const int in_ch = static_cast<int>(input.rows());
  const int T_in = static_cast<int>(input.cols());
  const int T_out = (T_in + spec.stride - 1) / spec.stride;
  const int pad = spec.dilation * (spec.kernel - 1) / 2;
  Matrix<Scalar> patches = Matrix<Scalar>::Zero(static_cast<Eigen::Index>(spec.kernel) * in_ch, T_out);
  for (int j = 0; j < T_out; ++j) {
    for (int i = 0; i < spec.kernel; ++i) {
      const int src = j * spec.stride - pad + i * spec.dilation;
      if (src < 0 || src >= T_in) continue;
      patches.col(j).segment(static_cast<Eigen::Index>(i) * in_ch, in_ch) = input.col(src);
    }
  }
  return patches;
}

template <typename Scalar>
Matrix<Scalar> col2im(const Matrix<Scalar>& grad_patches, const ConvSpec& spec, int in_ch, int T_in) {
  const int pad = spec.dilation * (spec.kernel - 1) / 2;
  Matrix<Scalar> grad = Matrix<Scalar>::Zero(in_ch, T_in);
  for (Eigen::Index j = 0; j < grad_patches.cols(); ++j) {
    for (int i = 0; i < spec.kernel; ++i) {
      const int src = static_cast<int>(j) * spec.stride - pad + i * spec.dilation;
      if (src < 0 || src >= T_in) continue;
      grad.col(src) += grad_patches.col(j).segment(static_cast<Eigen::Index>(i) * in_ch, in_ch);
    }
  }
  return grad;
}

template <typename Scalar>
Lattice<Scalar> head_forward(const Affine<Scalar>& head, const Matrix<Scalar>& trunk) {
  Matrix<Scalar> logits = head.weight * trunk;
  logits.colwise() += head.bias.col(0);
  return log_softmax_rows(logits.transpose());
}

// Backward through log-softmax and the affine map; accumulates into grad_trunk.
template <typename Scalar>
void head_backward(const Affine<Scalar>& head, const Matrix<Scalar>& trunk, const Lattice<Scalar>& logp,
                   const Lattice<Scalar>& grad_logp, Affine<Scalar>& grad_head, Matrix<Scalar>& grad_trunk) {
  Matrix<Scalar> dz = grad_logp - (logp.array().exp().colwise() * grad_logp.rowwise().sum().array()).matrix();
  Matrix<Scalar> dzt = dz.transpose();  // out x T
  grad_head.weight.noalias() += dzt * trunk.transpose();
  grad_head.bias.col(0) += dzt.rowwise().sum();
  grad_trunk.noalias() += head.weight.transpose() * dzt;
}

}  // namespace detail

/// Runs the shared trunk and every head on a T0 x input_dim feature matrix.
template <typename Scalar, typename Derived>
ForwardResult<Scalar> forward(const ModelState<Scalar>& state, const ModelConfig& config,
                              const Eigen::MatrixBase<Derived>& features) {
  if (features.cols() != config.input_dim) throw Error("feature dimension mismatch");
  if (features.rows() < config.min_input_frames()) throw Error("input shorter than receptive field");
  if (state.conv.size() != config.conv_layers.size() ||
      static_cast<int>(state.context.size()) != config.head_count()) {
    throw Error("model state does not match config");
  }
  ForwardResult<Scalar> out;
  out.cache.version = state.version;
  out.cache.input_frames = static_cast<int>(features.rows());

  Matrix<Scalar> x = features.transpose().template cast<Scalar>();
  for (std::size_t l = 0; l < config.conv_layers.size(); ++l) {
    const auto& spec = config.conv_layers[l];
    Matrix<Scalar> patches = detail::im2col(x, spec);
    Matrix<Scalar> z = state.conv[l].weight * patches;
    z.colwise() += state.conv[l].bias.col(0);
    if (config.activation == Activation::relu) {
      x = z.cwiseMax(Scalar(0));
    } else {
      x = z.array().tanh().matrix();
    }
    out.cache.patches.push_back(std::move(patches));
    out.cache.activations.push_back(x);
  }
  out.lattice = detail::head_forward(state.middle, x);
  for (const auto& head : state.context) out.heads.push_back(detail::head_forward(head, x));
  return out;
}

/// Parameter gradients for upstream gradients on the lattice and on each
/// context head (w.r.t. their log-probabilities). An empty `grad_heads` means
/// the context heads receive no gradient.
template <typename Scalar>
ModelState<Scalar> backward(const ModelState<Scalar>& state, const ModelConfig& config,
                            const ForwardResult<Scalar>& fwd, const Lattice<Scalar>& grad_lattice,
                            const std::vector<Lattice<Scalar>>& grad_heads) {
  const auto& cache = fwd.cache;
  if (cache.version != state.version || cache.activations.size() != state.conv.size()) {
    throw Error("stale cache");
  }
  if (grad_lattice.rows() != fwd.lattice.rows() || grad_lattice.cols() != fwd.lattice.cols()) {
    throw Error("lattice gradient shape mismatch");
  }
  if (!grad_heads.empty() && grad_heads.size() != state.context.size()) {
    throw Error("context gradient count mismatch");
  }
  ModelState<Scalar> grads = state.zeros_like();
  const Matrix<Scalar>& trunk = cache.activations.back();
  Matrix<Scalar> dx = Matrix<Scalar>::Zero(trunk.rows(), trunk.cols());
  detail::head_backward(state.middle, trunk, fwd.lattice, grad_lattice, grads.middle, dx);
  for (std::size_t h = 0; h < grad_heads.size(); ++h) {
    detail::head_backward(state.context[h], trunk, fwd.heads[h], grad_heads[h], grads.context[h], dx);
  }

  for (std::size_t l = state.conv.size(); l-- > 0;) {
    const Matrix<Scalar>& act = cache.activations[l];
    Matrix<Scalar> dz;
    if (config.activation == Activation::relu) {
      dz = ((act.array() > Scalar(0)).template cast<Scalar>() * dx.array()).matrix();
    } else {
      dz = dx.array() * (Scalar(1) - act.array().square());
    }
    grads.conv[l].weight.noalias() += dz * cache.patches[l].transpose();
    grads.conv[l].bias.col(0) += dz.rowwise().sum();
    if (l == 0) break;
    Matrix<Scalar> dpatches = state.conv[l].weight.transpose() * dz;
    dx = detail::col2im(dpatches, config.conv_layers[l], static_cast<int>(cache.activations[l - 1].rows()),
                        static_cast<int>(cache.activations[l - 1].cols()));
  }
  return grads;
}

/// Drops the context heads for inference. The middle head is untouched, so
/// lattices are bit-identical before and after.
template <typename Scalar>
std::pair<ModelConfig, ModelState<Scalar>> strip_context_heads(const ModelConfig& config,
                                                               const ModelState<Scalar>& state) {
  ModelConfig stripped_config = config;
  stripped_config.context_size = 0;
  ModelState<Scalar> stripped = state;
  stripped.context.clear();
  return {stripped_config, stripped};
}

/// Model plus the alphabet it was trained on and free-form metadata.
struct Checkpoint {
  ModelConfig config;
  Alphabet alphabet;
  ModelState<float> state;
  std::map<std::string, std::string> metadata;
};

/// Text header (format version, config, alphabet, tensor directory) followed
/// by little-endian float32 payloads in directory order.
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);
std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(const std::string& bytes);

/// FNV-1a over the serialized checkpoint.
std::uint64_t checkpoint_hash(const Checkpoint& checkpoint);

}  // namespace cctc

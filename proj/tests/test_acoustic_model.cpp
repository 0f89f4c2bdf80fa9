#include "cctc/acoustic_model.hpp"
#include "cctc/corpus.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

namespace cctc {
namespace {

ModelConfig small_config(Activation act = Activation::tanh, int K = 1) {
  ModelConfig c;
  c.input_dim = 3;
  c.conv_layers = {{4, 3, 2, 1}, {5, 3, 1, 2}};
  c.activation = act;
  c.context_size = K;
  c.alphabet_size = 4;
  return c;
}

Matrix<double> random_features(std::mt19937_64& rng, int T, int dim) {
  std::normal_distribution<double> normal;
  Matrix<double> x(T, dim);
  for (int t = 0; t < T; ++t) {
    for (int d = 0; d < dim; ++d) x(t, d) = normal(rng);
  }
  return x;
}

// Scalar loss: a fixed random linear functional of every head's log-probabilities.
struct Probe {
  Lattice<double> lattice;
  std::vector<Lattice<double>> heads;

  static Probe random(std::mt19937_64& rng, const ForwardResult<double>& fwd) {
    std::normal_distribution<double> normal;
    auto like = [&](const Lattice<double>& m) {
      Lattice<double> g(m.rows(), m.cols());
      for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = normal(rng);
      return g;
    };
    Probe p{like(fwd.lattice), {}};
    for (const auto& h : fwd.heads) p.heads.push_back(like(h));
    return p;
  }

  double value(const ForwardResult<double>& fwd) const {
    double v = lattice.cwiseProduct(fwd.lattice).sum();
    for (std::size_t h = 0; h < heads.size(); ++h) v += heads[h].cwiseProduct(fwd.heads[h]).sum();
    return v;
  }
};

TEST(ModelConfig, ShapeArithmetic) {
  const auto c = small_config();
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.total_stride(), 2);
  EXPECT_EQ(c.min_input_frames(), 2);
  EXPECT_EQ(c.head_count(), 2);
  EXPECT_EQ(ModelConfig::parse_conv_string(c.conv_string()), c.conv_layers);
  auto even = c;
  even.conv_layers[0].kernel = 4;
  EXPECT_THROW(even.validate(), Error);
  EXPECT_THROW(ModelConfig::parse_conv_string("4:3"), Error);
  const auto desk = ModelConfig::desk_scale(16, 29, 1);
  EXPECT_EQ(desk.conv_layers.size(), 5u);
  EXPECT_EQ(desk.total_stride(), 2);
}

TEST(AcousticModel, OutputFramesAreCeilOfInputOverStride) {
  std::mt19937_64 rng(1);
  for (int s1 : {1, 2, 3}) {
    for (int s2 : {1, 2}) {
      auto c = small_config();
      c.conv_layers[0].stride = s1;
      c.conv_layers[1].stride = s2;
      const auto state = init_model<double>(c, 3);
      for (int T0 = c.min_input_frames(); T0 < 20; ++T0) {
        const auto fwd = forward(state, c, random_features(rng, T0, c.input_dim));
        const int after_first = (T0 + s1 - 1) / s1;
        const int expected = (after_first + s2 - 1) / s2;
        ASSERT_EQ(fwd.lattice.rows(), expected);
        ASSERT_EQ(c.output_frames(T0), expected);
        for (const auto& h : fwd.heads) ASSERT_EQ(h.rows(), expected);
      }
    }
  }
}

TEST(AcousticModel, ZeroWeightsGiveUniformDistributions) {
  const auto c = small_config();
  auto state = init_model<double>(c, 5);
  for (auto* p : state.parameters()) p->setZero();
  std::mt19937_64 rng(7);
  const auto fwd = forward(state, c, random_features(rng, 9, c.input_dim));
  EXPECT_TRUE(fwd.lattice.isApproxToConstant(-std::log(5.0), 1e-12));
  for (const auto& h : fwd.heads) EXPECT_TRUE(h.isApproxToConstant(-std::log(4.0), 1e-12));
}

TEST(AcousticModel, SingleLayerMatchesHandConvolution) {
  ModelConfig c;
  c.input_dim = 2;
  c.conv_layers = {{3, 5, 1, 2}};
  c.activation = Activation::tanh;
  c.context_size = 0;
  c.alphabet_size = 2;
  const auto state = init_model<double>(c, 11);
  std::mt19937_64 rng(13);
  const auto x = random_features(rng, 12, 2);
  const auto fwd = forward(state, c, x);
  const auto& act = fwd.cache.activations[0];
  const auto& W = state.conv[0].weight;  // 3 x (5 * 2), tap-major
  for (int t = 0; t < 12; ++t) {
    for (int o = 0; o < 3; ++o) {
      double z = state.conv[0].bias(o, 0);
      for (int i = 0; i < 5; ++i) {
        const int src = t - 4 + 2 * i;  // same padding with dilation 2
        if (src < 0 || src >= 12) continue;
        for (int d = 0; d < 2; ++d) z += W(o, i * 2 + d) * x(src, d);
      }
      ASSERT_NEAR(act(o, t), std::tanh(z), 1e-12);
    }
  }
}

TEST(AcousticModel, OutputsAreNormalized) {
  const auto c = small_config(Activation::relu, 2);
  const auto state = init_model<double>(c, 17);
  std::mt19937_64 rng(19);
  const auto fwd = forward(state, c, random_features(rng, 15, c.input_dim));
  EXPECT_EQ(fwd.heads.size(), 4u);
  for (Eigen::Index t = 0; t < fwd.lattice.rows(); ++t) {
    EXPECT_NEAR(log_sum_exp(fwd.lattice.row(t)), 0.0, 1e-12);
    for (const auto& h : fwd.heads) EXPECT_NEAR(log_sum_exp(h.row(t)), 0.0, 1e-12);
  }
}

TEST(AcousticModel, InitIsDeterministicInSeed) {
  const auto c = small_config();
  const auto a = init_model<float>(c, 23);
  const auto b = init_model<float>(c, 23);
  const auto d = init_model<float>(c, 24);
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    EXPECT_EQ(*a.parameters()[i], *b.parameters()[i]);
  }
  EXPECT_NE(a.conv[0].weight, d.conv[0].weight);
  EXPECT_TRUE(a.middle.bias.isZero());
}

class ModelGradient : public ::testing::TestWithParam<Activation> {};

TEST_P(ModelGradient, DoubleBackwardMatchesFiniteDifferences) {
  const auto c = small_config(GetParam(), 1);
  std::mt19937_64 rng(29);
  const double eps = 1e-6;
  for (int trial = 0; trial < 3; ++trial) {
    const auto state = init_model<double>(c, 100 + trial);
    const auto x = random_features(rng, 11, c.input_dim);
    const auto fwd = forward(state, c, x);
    const auto probe = Probe::random(rng, fwd);
    const auto grads = backward(state, c, fwd, probe.lattice, probe.heads);

    auto params = grads.parameters();
    const auto names = state.parameter_names();
    for (std::size_t i = 0; i < params.size(); ++i) {
      Matrix<double> fd(params[i]->rows(), params[i]->cols());
      for (Eigen::Index j = 0; j < fd.size(); ++j) {
        auto up = state, down = state;
        up.parameters()[i]->data()[j] += eps;
        down.parameters()[i]->data()[j] -= eps;
        fd.data()[j] = (probe.value(forward(up, c, x)) - probe.value(forward(down, c, x))) / (2 * eps);
      }
      const double err = (fd - *params[i]).norm() / std::max(fd.norm(), 1e-6);
      ASSERT_LE(err, 1e-5) << names[i];
    }
  }
}

TEST_P(ModelGradient, FloatBackwardAgreesWithDoubleReference) {
  const auto c = small_config(GetParam(), 1);
  std::mt19937_64 rng(31);
  const auto state_d = init_model<double>(c, 37);
  const auto state_f = state_d.cast<float>();
  const auto x = random_features(rng, 20, c.input_dim);
  const auto fwd_d = forward(state_f.cast<double>(), c, x);
  const auto probe = Probe::random(rng, fwd_d);
  const auto ref = backward(state_f.cast<double>(), c, fwd_d, probe.lattice, probe.heads);

  const auto fwd_f = forward(state_f, c, x.cast<float>());
  std::vector<Lattice<float>> heads_f;
  for (const auto& h : probe.heads) heads_f.push_back(h.cast<float>());
  const auto got = backward(state_f, c, fwd_f, Lattice<float>(probe.lattice.cast<float>()), heads_f);

  const auto names = state_d.parameter_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    const Matrix<double> g = got.parameters()[i]->cast<double>();
    const Matrix<double>& r = *ref.parameters()[i];
    EXPECT_LE((g - r).norm() / std::max(r.norm(), 1e-6), 1e-3) << names[i];
  }
}

INSTANTIATE_TEST_SUITE_P(Activations, ModelGradient, ::testing::Values(Activation::relu, Activation::tanh),
                         [](const auto& info) { return to_string(info.param); });

TEST(AcousticModel, NoHeadGradientLeavesContextHeadsAtZero) {
  const auto c = small_config();
  const auto state = init_model<double>(c, 41);
  std::mt19937_64 rng(43);
  const auto fwd = forward(state, c, random_features(rng, 10, c.input_dim));
  const auto probe = Probe::random(rng, fwd);
  const auto grads = backward(state, c, fwd, probe.lattice, {});
  for (const auto& h : grads.context) {
    EXPECT_TRUE(h.weight.isZero());
    EXPECT_TRUE(h.bias.isZero());
  }
  EXPECT_FALSE(grads.middle.weight.isZero());
}

TEST(AcousticModel, ContextHeadsShapeTheSharedTrunk) {
  const auto c = small_config();
  const auto state = init_model<double>(c, 47);
  std::mt19937_64 rng(53);
  const auto fwd = forward(state, c, random_features(rng, 10, c.input_dim));
  const auto probe = Probe::random(rng, fwd);
  const auto with = backward(state, c, fwd, probe.lattice, probe.heads);
  const auto without = backward(state, c, fwd, probe.lattice, {});
  EXPECT_EQ(with.middle.weight, without.middle.weight);
  EXPECT_GT((with.conv[0].weight - without.conv[0].weight).norm(), 1e-8);
}

TEST(AcousticModel, StripKeepsTheLatticeBitIdentical) {
  const auto c = small_config(Activation::relu, 2);
  const auto state = init_model<float>(c, 59);
  std::mt19937_64 rng(61);
  const Matrix<float> x = random_features(rng, 14, c.input_dim).cast<float>();
  const auto [sc, ss] = strip_context_heads(c, state);
  EXPECT_EQ(sc.context_size, 0);
  EXPECT_TRUE(ss.context.empty());
  EXPECT_EQ(forward(state, c, x).lattice, forward(ss, sc, x).lattice);
  const std::size_t per_head = static_cast<std::size_t>(c.alphabet_size) * (c.conv_layers.back().channels + 1);
  EXPECT_EQ(state.parameter_count() - ss.parameter_count(), 4 * per_head);
}

TEST(AcousticModel, StaleCacheIsRejected) {
  const auto c = small_config();
  auto state = init_model<double>(c, 67);
  std::mt19937_64 rng(71);
  const auto fwd = forward(state, c, random_features(rng, 8, c.input_dim));
  ++state.version;
  try {
    backward(state, c, fwd, fwd.lattice, {});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "stale cache");
  }
}

TEST(AcousticModel, RejectsBadInput) {
  const auto c = small_config();
  const auto state = init_model<double>(c, 73);
  std::mt19937_64 rng(79);
  EXPECT_THROW(forward(state, c, random_features(rng, 1, c.input_dim)), Error);
  EXPECT_THROW(forward(state, c, random_features(rng, 8, c.input_dim + 1)), Error);
  EXPECT_NO_THROW(forward(state, c, random_features(rng, c.min_input_frames(), c.input_dim)));
}

Checkpoint sample_checkpoint() {
  SyntheticSpec spec;
  const auto alphabet = synthetic_alphabet(spec);
  auto c = small_config(Activation::relu, 1);
  c.alphabet_size = alphabet.size();
  return {c, alphabet, init_model<float>(c, 83), {{"mode", "cctc"}, {"epochs", "3"}}};
}

TEST(Checkpoint, RoundTripIsExact) {
  const auto ckpt = sample_checkpoint();
  const auto bytes = serialize_checkpoint(ckpt);
  const auto back = deserialize_checkpoint(bytes);
  EXPECT_EQ(back.config, ckpt.config);
  EXPECT_EQ(back.alphabet, ckpt.alphabet);
  EXPECT_EQ(back.metadata, ckpt.metadata);
  for (std::size_t i = 0; i < ckpt.state.parameters().size(); ++i) {
    EXPECT_EQ(*back.state.parameters()[i], *ckpt.state.parameters()[i]);
  }
  EXPECT_EQ(serialize_checkpoint(back), bytes);
  EXPECT_EQ(checkpoint_hash(back), checkpoint_hash(ckpt));
}

TEST(Checkpoint, FileRoundTrip) {
  const auto ckpt = sample_checkpoint();
  const auto path = ::testing::TempDir() + "model.ckpt";
  save_checkpoint(path, ckpt);
  EXPECT_EQ(checkpoint_hash(load_checkpoint(path)), checkpoint_hash(ckpt));
  EXPECT_THROW(load_checkpoint(path + ".missing"), Error);
}

TEST(Checkpoint, CorruptionIsDetected) {
  const auto bytes = serialize_checkpoint(sample_checkpoint());
  EXPECT_THROW(deserialize_checkpoint("not a checkpoint\n"), Error);
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), Error);
  EXPECT_THROW(deserialize_checkpoint(bytes + "x"), Error);
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, 30)), Error);
}

TEST(Checkpoint, HashSeesParameterChanges) {
  auto ckpt = sample_checkpoint();
  const auto h = checkpoint_hash(ckpt);
  ckpt.state.middle.bias(0, 0) += 1e-3f;
  EXPECT_NE(checkpoint_hash(ckpt), h);
}

}  // namespace
}  // namespace cctc

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <type_traits>

#include "corticarve/losses.hpp"
#include "corticarve/nnet.hpp"
#include "oracles.hpp"

using namespace corticarve;
namespace L = corticarve::layers;

namespace {

Tensor<double> random_tensor(int c, Dims d, Rng& rng) {
  Tensor<double> t(c, d);
  for (auto& v : t.data) v = rng.normal(0, 1);
  return t;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

UNetConfig small_config(Head head, int levels = 2, Dims dims = {8, 8, 8}) {
  UNetConfig c;
  c.levels = levels;
  c.filters.clear();
  for (int l = 0; l < levels; ++l) c.filters.push_back(2 << l);
  c.head = head;
  c.input_dims = dims;
  return c;
}

/// A scalar objective on the network output and its output gradient.
template <class T>
double objective(const UNet<T>& net, const Tensor<T>& x, const std::vector<double>& r, std::type_identity_t<Tensor<T>>* grad) {
  const Tensor<T> y = net.forward(x);
  if (net.config().head == Head::dice) {
    std::vector<std::uint8_t> target(y.voxels());
    for (std::size_t i = 0; i < target.size(); ++i) target[i] = r[i] > 0.0;
    const DiceLossResult l = dice_loss(std::vector<double>(y.data.begin(), y.data.end()), target);
    if (grad) {
      *grad = Tensor<T>(y.channels, y.dims);
      for (std::size_t i = 0; i < l.gradient.size(); ++i) grad->data[i] = static_cast<T>(l.gradient[i]);
    }
    return l.value;
  }
  std::vector<double> t(y.voxels()), w(y.voxels(), 1.0);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = 3.0 * r[i];
  const LossResult l = sdt_loss(std::vector<double>(y.data.begin(), y.data.end()), t, w);
  if (grad) {
    *grad = Tensor<T>(y.channels, y.dims);
    for (std::size_t i = 0; i < l.gradient.size(); ++i) grad->data[i] = static_cast<T>(l.gradient[i]);
  }
  return l.value;
}

/// Gives biases non-zero values so their gradients are exercised.
template <class T>
void jitter_biases(UNet<T>& net, Rng& rng) {
  auto p = net.mutable_parameters();
  for (const auto& layer : net.layers()) {
    for (int o = 0; o < layer.out_channels; ++o) p[layer.bias_offset + o] = static_cast<T>(rng.normal(0, 0.1));
  }
}

}  // namespace

TEST(Layers, ConvGradients) {
  Rng rng(1);
  Tensor<double> x = random_tensor(2, {4, 3, 5}, rng);
  std::vector<double> w(27 * 3 * 2), b(3);
  for (auto& v : w) v = rng.normal(0, 0.5);
  for (auto& v : b) v = rng.normal(0, 0.5);
  const auto r = random_tensor(3, x.dims, rng).data;
  const auto f = [&] { return dot(L::conv3d_forward<double>(x, w, b, 3).data, r); };

  std::vector<double> gw(w.size(), 0.0), gb(b.size(), 0.0);
  Tensor<double> go(3, x.dims);
  go.data = r;
  const Tensor<double> gx = L::conv3d_backward<double>(x, w, go, gw, gb);

  EXPECT_LT(oracle::max_rel_error(gx.data, oracle::numeric_gradient(x.data, f, 1e-5)), 1e-6);
  EXPECT_LT(oracle::max_rel_error(gw, oracle::numeric_gradient(w, f, 1e-5)), 1e-6);
  EXPECT_LT(oracle::max_rel_error(gb, oracle::numeric_gradient(b, f, 1e-5)), 1e-6);
}

TEST(Layers, ConvMatchesDirectSum) {
  Rng rng(2);
  const Tensor<double> x = random_tensor(2, {3, 4, 2}, rng);
  std::vector<double> w(27 * 2 * 2), b{0.5, -0.25};
  for (auto& v : w) v = rng.normal(0, 1);
  const Tensor<double> y = L::conv3d_forward<double>(x, w, b, 2);
  const auto& d = x.dims;
  for (int o = 0; o < 2; ++o) {
    for (int z = 0; z < d[2]; ++z) {
      for (int yy = 0; yy < d[1]; ++yy) {
        for (int xx = 0; xx < d[0]; ++xx) {
          double s = b[o];
          for (int kz = 0; kz < 3; ++kz)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int px = xx + kx - 1, py = yy + ky - 1, pz = z + kz - 1;
                if (px < 0 || py < 0 || pz < 0 || px >= d[0] || py >= d[1] || pz >= d[2]) continue;
                for (int i = 0; i < 2; ++i) {
                  const double wv = w[(((kz * 3 + ky) * 3 + kx) * 2 + o) * 2 + i];
                  s += wv * x.channel(i)[px + d[0] * (py + d[1] * pz)];
                }
              }
          EXPECT_NEAR(y.channel(o)[xx + d[0] * (yy + d[1] * z)], s, 1e-12);
        }
      }
    }
  }
}

TEST(Layers, LeakyReluGradients) {
  Rng rng(3);
  Tensor<double> x = random_tensor(2, {3, 3, 3}, rng);
  for (auto& v : x.data) v += v > 0 ? 0.05 : -0.05;
  const auto r = random_tensor(2, x.dims, rng).data;
  const auto f = [&] { return dot(L::leaky_relu_forward(x, 0.2).data, r); };
  Tensor<double> go(2, x.dims);
  go.data = r;
  const Tensor<double> gx = L::leaky_relu_backward(x, go, 0.2);
  EXPECT_LT(oracle::max_rel_error(gx.data, oracle::numeric_gradient(x.data, f, 1e-6)), 1e-6);
}

TEST(Layers, LeakyReluNegativeSlopeIsExact) {
  Tensor<float> pre(1, {2, 1, 1});
  pre.data = {-3.0f, 2.0f};
  Tensor<float> g(1, {2, 1, 1});
  g.data = {1.0f, 1.0f};
  const auto back = L::leaky_relu_backward(pre, g, 0.2f);
  EXPECT_EQ(back.data[0], 0.2f);
  EXPECT_EQ(back.data[1], 1.0f);
  EXPECT_EQ(L::leaky_relu_forward(pre, 0.2f).data[0], -3.0f * 0.2f);
}

TEST(Layers, MaxPoolGradients) {
  Rng rng(4);
  Tensor<double> x = random_tensor(2, {4, 6, 2}, rng);
  const auto r = random_tensor(2, {2, 3, 1}, rng).data;
  std::vector<std::uint32_t> argmax;
  const auto f = [&] {
    std::vector<std::uint32_t> a;
    return dot(L::maxpool2_forward(x, a).data, r);
  };
  L::maxpool2_forward(x, argmax);
  Tensor<double> go(2, {2, 3, 1});
  go.data = r;
  const Tensor<double> gx = L::maxpool2_backward(go, argmax, x.dims);
  EXPECT_LT(oracle::max_rel_error(gx.data, oracle::numeric_gradient(x.data, f, 1e-7)), 1e-6);
}

TEST(Layers, MaxPoolPicksMaximum) {
  Tensor<double> x(1, {2, 2, 2});
  x.data = {1, 5, 3, 2, 0, 4, -1, 2};
  std::vector<std::uint32_t> a;
  const auto y = L::maxpool2_forward(x, a);
  EXPECT_EQ(y.data, std::vector<double>{5});
  EXPECT_EQ(a, std::vector<std::uint32_t>{1});
}

TEST(Layers, UpsampleGradients) {
  Rng rng(5);
  Tensor<double> x = random_tensor(2, {2, 3, 2}, rng);
  const auto r = random_tensor(2, {4, 6, 4}, rng).data;
  const auto f = [&] { return dot(L::upsample2_forward(x).data, r); };
  Tensor<double> go(2, {4, 6, 4});
  go.data = r;
  const auto gx = L::upsample2_backward(go);
  EXPECT_LT(oracle::max_rel_error(gx.data, oracle::numeric_gradient(x.data, f, 1e-6)), 1e-6);
}

TEST(Layers, ConcatGradients) {
  Rng rng(6);
  Tensor<double> a = random_tensor(2, {3, 2, 2}, rng);
  Tensor<double> b = random_tensor(3, {3, 2, 2}, rng);
  const auto r = random_tensor(5, a.dims, rng).data;
  const auto f = [&] { return dot(L::concat(a, b).data, r); };
  Tensor<double> go(5, a.dims);
  go.data = r;
  const auto [ga, gb] = L::concat_backward(go, 2);
  EXPECT_LT(oracle::max_rel_error(ga.data, oracle::numeric_gradient(a.data, f, 1e-6)), 1e-6);
  EXPECT_LT(oracle::max_rel_error(gb.data, oracle::numeric_gradient(b.data, f, 1e-6)), 1e-6);
}

TEST(Layers, SoftmaxGradients) {
  Rng rng(7);
  Tensor<double> x = random_tensor(2, {3, 3, 2}, rng);
  const auto r = random_tensor(2, x.dims, rng).data;
  const auto f = [&] { return dot(L::softmax_forward(x).data, r); };
  Tensor<double> go(2, x.dims);
  go.data = r;
  const auto gx = L::softmax_backward(L::softmax_forward(x), go);
  EXPECT_LT(oracle::max_rel_error(gx.data, oracle::numeric_gradient(x.data, f, 1e-6)), 1e-6);
}

TEST(UNet, ZeroWeightsGiveZeroOutput) {
  UNet<float> net(small_config(Head::sdt, 3, {8, 8, 8}), 1);
  for (auto& p : net.mutable_parameters()) p = 0.0f;
  Tensor<float> x(1, {8, 8, 8}, 0.7f);
  for (float v : net.forward(x).data) EXPECT_EQ(v, 0.0f);
}

TEST(UNet, DiceHeadSumsToOne) {
  UNet<float> net(small_config(Head::dice, 3, {8, 8, 8}), 2);
  Rng rng(3);
  Tensor<float> x(1, {8, 8, 8});
  for (auto& v : x.data) v = static_cast<float>(rng.uniform(0, 1));
  const Tensor<float> y = net.forward(x);
  ASSERT_EQ(y.channels, 2);
  for (std::size_t i = 0; i < y.voxels(); ++i) EXPECT_NEAR(y.channel(0)[i] + y.channel(1)[i], 1.0f, 1e-6f);
}

TEST(UNet, OutputDimsMatchInputForAllDepths) {
  Rng rng(4);
  for (int levels = 2; levels <= 5; ++levels) {
    const int m = 1 << (levels - 1);
    const Dims d{m * static_cast<int>(rng.integer(1, 2)), m * static_cast<int>(rng.integer(1, 2)),
                 m * static_cast<int>(rng.integer(1, 2))};
    UNetConfig c = small_config(Head::sdt, levels, d);
    c.filters.assign(levels, 2);
    UNet<float> net(c, 5);
    const auto y = net.forward(Tensor<float>(1, d, 0.5f));
    EXPECT_EQ(y.dims, d);
    EXPECT_EQ(y.channels, 1);
  }
}

TEST(UNet, RejectsInvalidConfigAndDims) {
  UNetConfig c = small_config(Head::sdt, 3, {8, 8, 6});
  EXPECT_THROW(UNet<float>(c, 0), Error);
  c = small_config(Head::sdt, 2);
  c.filters.push_back(3);
  EXPECT_THROW(UNet<float>(c, 0), Error);
  UNet<float> net(small_config(Head::sdt), 0);
  EXPECT_THROW(net.forward(Tensor<float>(1, {4, 4, 4})), Error);
}

TEST(UNet, ZeroUpstreamGradientGivesZeroGradients) {
  UNet<double> net(small_config(Head::sdt), 6);
  UNet<double>::Cache cache;
  const auto y = net.forward(Tensor<double>(1, {8, 8, 8}, 0.3), &cache);
  for (double g : net.backward(cache, Tensor<double>(1, y.dims))) EXPECT_EQ(g, 0.0);
}

TEST(UNet, StaleCacheIsRejected) {
  UNet<float> net(small_config(Head::sdt), 7);
  UNet<float>::Cache cache;
  const auto y = net.forward(Tensor<float>(1, {8, 8, 8}, 0.3f), &cache);
  net.mutable_parameters()[0] += 1.0f;
  try {
    net.backward(cache, Tensor<float>(1, y.dims));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::stale_cache);
  }
}

class EndToEndGradient : public ::testing::TestWithParam<Head> {};

TEST_P(EndToEndGradient, DoublePrecisionMatchesFiniteDifferences) {
  Rng rng(8);
  UNet<double> net(small_config(GetParam()), 9);
  jitter_biases(net, rng);
  Tensor<double> x(1, {8, 8, 8});
  for (auto& v : x.data) v = rng.uniform(0, 1);
  const auto r = random_tensor(1, x.dims, rng).data;

  UNet<double>::Cache cache;
  net.forward(x, &cache);
  Tensor<double> g;
  objective(net, x, r, &g);
  const auto analytic = net.backward(cache, g);

  std::vector<double> params(net.parameters().begin(), net.parameters().end());
  const auto f = [&] {
    std::copy(params.begin(), params.end(), net.mutable_parameters().begin());
    return objective(net, x, r, nullptr);
  };
  double scale = 0.0;
  for (double v : analytic) scale = std::max(scale, std::abs(v));
  // Differences below 2e-8 of the largest component are at the roundoff level
  // of the finite differences and are not scored.
  const oracle::GradientCheck c = oracle::check_gradient(analytic, params, f, 3e-5, 2e-8 * scale);
  EXPECT_LT(c.max_rel_error, 1e-6) << c.kinks << " kinks";
  // Coordinates whose stencil crosses an activation switch are skipped here;
  // the single-precision test below and the per-layer tests still score them.
  EXPECT_LE(c.kinks, params.size() / 10);
}

TEST_P(EndToEndGradient, SinglePrecisionMatchesReference) {
  Rng rng(10);
  UNet<float> net(small_config(GetParam()), 11);
  jitter_biases(net, rng);
  Tensor<float> x(1, {8, 8, 8});
  for (auto& v : x.data) v = static_cast<float>(rng.uniform(0, 1));
  const auto r = random_tensor(1, x.dims, rng).data;

  UNet<float>::Cache cache;
  net.forward(x, &cache);
  Tensor<float> g;
  objective(net, x, r, &g);
  const auto analytic_f = net.backward(cache, g);
  const std::vector<double> analytic(analytic_f.begin(), analytic_f.end());

  // Finite differences of the same weights evaluated in double precision.
  UNet<double> ref(net.config(), 0);
  std::vector<double> params(net.parameters().begin(), net.parameters().end());
  Tensor<double> xd(1, x.dims);
  std::copy(x.data.begin(), x.data.end(), xd.data.begin());
  const auto f = [&] {
    std::copy(params.begin(), params.end(), ref.mutable_parameters().begin());
    return objective(ref, xd, r, nullptr);
  };
  double scale = 0.0;
  for (double v : analytic) scale = std::max(scale, std::abs(v));
  const oracle::GradientCheck c = oracle::check_gradient(analytic, params, f, 3e-5, 1e-6 * scale);
  EXPECT_LT(c.max_rel_error, 1e-4) << c.kinks << " kinks";
  EXPECT_LE(c.kinks, params.size() / 100);
}

INSTANTIATE_TEST_SUITE_P(Heads, EndToEndGradient, ::testing::Values(Head::sdt, Head::dice),
                         [](const auto& info) { return to_string(info.param); });

TEST(UNet, ForwardIsDeterministic) {
  UNet<float> a(small_config(Head::sdt, 3, {16, 16, 16}), 12);
  UNet<float> b(small_config(Head::sdt, 3, {16, 16, 16}), 12);
  Tensor<float> x(1, {16, 16, 16});
  for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] = static_cast<float>(std::sin(0.01 * i));
  EXPECT_EQ(a.forward(x).data, b.forward(x).data);
  EXPECT_EQ(a.forward(x).data, a.forward(x).data);
}

TEST(UNet, GoldenForwardHash) {
  UNetConfig c;
  c.levels = 3;
  c.filters = {4, 8, 16};
  c.input_dims = {16, 16, 16};
  UNet<float> net(c, 2024);
  Tensor<float> x(1, c.input_dims);
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    x.data[i] = static_cast<float>(0.5 + 0.5 * std::sin(0.05 * static_cast<double>(i)));
  }
  const Tensor<float> y = net.forward(x);
  std::uint64_t h = 1469598103934665603ull;
  for (float v : y.data) {
    const auto q = static_cast<std::int64_t>(std::llround(static_cast<double>(v) * 1e4));
    for (int b = 0; b < 8; ++b) {
      h ^= static_cast<std::uint64_t>((q >> (8 * b)) & 0xFF);
      h *= 1099511628211ull;
    }
  }
  // Outputs are quantized to 1e-4 before hashing so that harmless rounding
  // differences between compilers do not trip the check.
  EXPECT_EQ(h, 988283060084912403ull);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  UNetConfig c;
  c.levels = 1;
  c.filters = {1};
  c.input_dims = {2, 2, 2};
  UNet<double> net(c, 1);
  const std::vector<double> before(net.parameters().begin(), net.parameters().end());
  const std::vector<double> grads(before.size(), 1.0);
  adam_step<double>(net, grads, 1e-3);
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_NEAR(net.parameters()[i] - before[i], -1e-3 / (1.0 + 1e-8), 1e-15);
  }
  EXPECT_EQ(net.adam_steps(), 1);
}

TEST(Adam, ZeroGradientsKeepParametersAndDecayMoments) {
  UNetConfig c;
  c.levels = 1;
  c.filters = {1};
  c.input_dims = {2, 2, 2};
  UNet<double> net(c, 2);
  std::vector<double> grads(net.parameter_count(), 1.0);
  adam_step<double>(net, grads, 1e-3);
  const std::vector<double> p(net.parameters().begin(), net.parameters().end());
  const double m = net.adam_m()[0];
  std::fill(grads.begin(), grads.end(), 0.0);
  adam_step<double>(net, grads, 1e-3);
  // The bias-corrected first moment is still non-zero, so parameters keep
  // moving; only the raw moments decay.
  EXPECT_DOUBLE_EQ(net.adam_m()[0], 0.9 * m);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_LT(net.parameters()[i], p[i]);

  UNet<double> fresh(c, 2);
  const std::vector<double> q(fresh.parameters().begin(), fresh.parameters().end());
  adam_step<double>(fresh, grads, 1e-3);
  for (std::size_t i = 0; i < q.size(); ++i) EXPECT_EQ(fresh.parameters()[i], q[i]);
}

TEST(Adam, NonFiniteGradientLeavesModelUntouched) {
  UNetConfig c;
  c.levels = 1;
  c.filters = {1};
  c.input_dims = {2, 2, 2};
  UNet<float> net(c, 3);
  const std::vector<float> before(net.parameters().begin(), net.parameters().end());
  std::vector<float> grads(before.size(), 0.5f);
  grads[3] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(adam_step<float>(net, grads, 1e-3), Error);
  EXPECT_TRUE(std::equal(before.begin(), before.end(), net.parameters().begin()));
  EXPECT_EQ(net.adam_steps(), 0);
}

TEST(Plateau, DecreasingLossNeverHalves) {
  TrainState s;
  for (int i = 0; i < 50; ++i) s = update_lr_on_plateau(s, 100.0 - i, 4, 1);
  EXPECT_EQ(s.lr, 1e-4);
}

TEST(Plateau, ConstantLossHalvesEveryPatienceSteps) {
  TrainState s;
  s = update_lr_on_plateau(s, 1.0, 4, 0);  // baseline evaluation before training
  std::vector<double> lrs;
  for (int step = 1; step <= 8; ++step) {
    s = update_lr_on_plateau(s, 1.0, 4, 1);
    lrs.push_back(s.lr);
  }
  EXPECT_EQ(lrs, (std::vector<double>{1e-4, 1e-4, 1e-4, 5e-5, 5e-5, 5e-5, 5e-5, 2.5e-5}));
}

TEST(Plateau, DefaultPatience) {
  TrainState s;
  s = update_lr_on_plateau(s, 1.0);
  for (int i = 0; i < 19999; ++i) s = update_lr_on_plateau(s, 1.0);
  EXPECT_EQ(s.lr, 1e-4);
  s = update_lr_on_plateau(s, 1.0);
  EXPECT_EQ(s.lr, 5e-5);
}

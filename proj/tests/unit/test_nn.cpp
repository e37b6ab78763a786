#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "absopf/errors.hpp"
#include "absopf/nn.hpp"
#include "oracles/finite_diff.hpp"
#include "oracles/mlp_reference.hpp"

using namespace absopf;
using namespace absopf::nn;

namespace {

Mlp random_net(std::size_t in, std::size_t out, std::size_t width, std::size_t hidden, double dropout,
               std::uint64_t seed) {
  CounterRng rng(seed);
  return make_mlp({in, out, width, hidden}, dropout, rng);
}

VectorXd random_vec(long n, CounterRng& rng) {
  VectorXd v(n);
  for (long i = 0; i < n; ++i) v(i) = rng.uniform();
  return v;
}

}  // namespace

TEST(Forward, ZeroParametersGiveHalf) {
  Mlp net = random_net(3, 4, 5, 3, 0.0, 1);
  for (auto& l : net.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  const auto y = forward(net, VectorXd::Constant(3, 0.7));
  for (long i = 0; i < y.size(); ++i) EXPECT_EQ(y(i), 0.5);
}

TEST(Forward, MatchesStraightLineReference) {
  CounterRng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Mlp net = random_net(5, 4, 7, 3 + trial % 3, 0.0, 10 + trial);
    const auto plain = oracle::copy_layers(net);
    const VectorXd x = random_vec(5, rng);
    const auto ref = oracle::forward(plain, std::vector<double>(x.data(), x.data() + x.size()));
    const VectorXd y = forward(net, x);
    for (long i = 0; i < y.size(); ++i) EXPECT_NEAR(y(i), ref[static_cast<std::size_t>(i)], 1e-12);
  }
}

TEST(Forward, MaskedPassMatchesReferenceWithKeepFactors) {
  const Mlp net = random_net(4, 3, 6, 3, 0.3, 3);
  CounterRng rng(4);
  const DropoutMask mask = sample_mask(net, rng);
  std::vector<std::vector<double>> keep;
  for (const auto& h : mask.hidden) keep.emplace_back(h.data(), h.data() + h.size());
  const VectorXd x = random_vec(4, rng);
  const auto ref = oracle::forward(oracle::copy_layers(net), std::vector<double>(x.data(), x.data() + 4), &keep);
  const VectorXd y = forward(net, x, &mask);
  for (long i = 0; i < 3; ++i) EXPECT_NEAR(y(i), ref[static_cast<std::size_t>(i)], 1e-12);
  for (const auto& h : mask.hidden)
    for (long i = 0; i < h.size(); ++i) EXPECT_TRUE(h(i) == 0.0 || std::fabs(h(i) - 1.0 / 0.7) < 1e-15);
}

TEST(Forward, ZeroDropoutMaskIsIdentity) {
  const Mlp net = random_net(4, 3, 6, 3, 0.0, 5);
  CounterRng rng(6);
  const DropoutMask mask = sample_mask(net, rng);
  const VectorXd x = random_vec(4, rng);
  EXPECT_EQ(forward(net, x, &mask), forward(net, x));
}

TEST(Forward, DimensionMismatchThrows) {
  const Mlp net = random_net(4, 3, 6, 3, 0.0, 5);
  EXPECT_THROW(forward(net, VectorXd::Zero(5)), DimensionError);
}

TEST(Forward, BatchMatchesColumns) {
  const Mlp net = random_net(4, 3, 6, 4, 0.0, 7);
  CounterRng rng(8);
  MatrixXd X(4, 9);
  for (long j = 0; j < 9; ++j) X.col(j) = random_vec(4, rng);
  const MatrixXd Y = forward_batch(net, X);
  for (long j = 0; j < 9; ++j) EXPECT_LE((Y.col(j) - forward(net, X.col(j))).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(L1Loss, Examples) {
  VectorXd a(2), b(2);
  a << 1.0, 2.0;
  EXPECT_EQ(l1_loss(a, a), 0.0);
  b << 0.0, 3.0;
  EXPECT_EQ(l1_loss(a, b), 1.0);
  CounterRng rng(9);
  const VectorXd u = random_vec(7, rng), v = random_vec(7, rng);
  EXPECT_NEAR(l1_loss(u, v),
              oracle::l1(std::vector<double>(u.data(), u.data() + 7), std::vector<double>(v.data(), v.data() + 7)),
              1e-15);
}

TEST(Backward, FiniteDifferencesOnSmallNet) {
  Mlp net = random_net(4, 4, 8, 2, 0.0, 11);
  CounterRng rng(12);
  VectorXd x = random_vec(4, rng);
  const VectorXd y = random_vec(4, rng);
  const Gradients g = backward(net, x, y);
  const VectorXd yhat = forward(net, x);
  ASSERT_GT((yhat - y).cwiseAbs().minCoeff(), 1e-8);
  auto loss = [&] { return l1_loss(forward(net, x), y); };
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto& W = net.layers[l].weight;
    for (long r = 0; r < W.rows(); ++r)
      for (long c = 0; c < W.cols(); ++c) {
        const double fd = oracle::central_difference(W(r, c), [&](double v) { W(r, c) = v; }, loss);
        EXPECT_LE(oracle::relative_error(g.weight[l](r, c), fd), 1e-5);
      }
    auto& b = net.layers[l].bias;
    for (long r = 0; r < b.size(); ++r) {
      const double fd = oracle::central_difference(b(r), [&](double v) { b(r) = v; }, loss);
      EXPECT_LE(oracle::relative_error(g.bias[l](r), fd), 1e-5);
    }
  }
  for (long i = 0; i < x.size(); ++i) {
    const double fd = oracle::central_difference(x(i), [&](double v) { x(i) = v; }, loss);
    EXPECT_LE(oracle::relative_error(g.input(i), fd), 1e-5);
  }
}

TEST(Backward, ZeroWeightsGiveZeroInputGradient) {
  Mlp net = random_net(3, 2, 4, 3, 0.0, 13);
  for (auto& l : net.layers) l.weight.setZero();
  const auto g = backward(net, VectorXd::Constant(3, 0.4), VectorXd::Constant(2, 0.9));
  EXPECT_EQ(g.input.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Backward, BatchGradientIsMeanOfSampleGradients) {
  const Mlp net = random_net(3, 2, 5, 3, 0.0, 14);
  CounterRng rng(15);
  MatrixXd X(3, 6), Y(2, 6);
  for (long j = 0; j < 6; ++j) {
    X.col(j) = random_vec(3, rng);
    Y.col(j) = random_vec(2, rng);
  }
  const Gradients gb = batch_backward(net, X, Y);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    MatrixXd acc = MatrixXd::Zero(gb.weight[l].rows(), gb.weight[l].cols());
    for (long j = 0; j < 6; ++j) acc += backward(net, X.col(j), Y.col(j)).weight[l];
    EXPECT_LE((acc / 6.0 - gb.weight[l]).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Backward, SubgradientAtZeroResidualIsZero) {
  const Mlp net = random_net(3, 2, 4, 3, 0.0, 16);
  const VectorXd x = VectorXd::Constant(3, 0.3);
  const VectorXd y = forward(net, x);
  const auto g = backward(net, x, y);
  EXPECT_EQ(g.input.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(g.loss, 0.0);
}

TEST(Adamw, ZeroGradientZeroDecayLeavesNetUnchanged) {
  Mlp net = random_net(3, 2, 4, 3, 0.0, 17);
  const Mlp before = net;
  AdamwConfig cfg;
  cfg.weight_decay = 0.0;
  AdamwState st(net, cfg);
  Gradients g;
  for (const auto& l : net.layers) {
    g.weight.push_back(MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(VectorXd::Zero(l.bias.size()));
  }
  for (int i = 0; i < 3; ++i) adamw_step(net, g, st, 1e-2);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    EXPECT_EQ(net.layers[l].weight, before.layers[l].weight);
    EXPECT_EQ(net.layers[l].bias, before.layers[l].bias);
  }
}

TEST(Adamw, OneStepMatchesHandCalculation) {
  Mlp net = random_net(1, 1, 1, 2, 0.0, 18);
  for (auto& l : net.layers) {
    l.weight.setConstant(0.5);
    l.bias.setConstant(-0.2);
  }
  AdamwConfig cfg;  // 0.9, 0.999, 1e-8, 1e-4
  AdamwState st(net, cfg);
  Gradients g;
  for (const auto& l : net.layers) {
    g.weight.push_back(MatrixXd::Constant(l.weight.rows(), l.weight.cols(), 0.3));
    g.bias.push_back(VectorXd::Constant(l.bias.size(), -0.1));
  }
  const double lr = 1e-2;
  adamw_step(net, g, st, lr);
  // Bias-corrected first step moves each parameter by lr * sign(g) up to eps.
  const double w = 0.5 * (1 - lr * 1e-4) - lr * 0.3 / (0.3 + 1e-8);
  const double b = -0.2 + lr * 0.1 / (0.1 + 1e-8);
  for (const auto& l : net.layers) {
    EXPECT_NEAR(l.weight(0, 0), w, 1e-15);
    EXPECT_NEAR(l.bias(0), b, 1e-15);
  }
}

TEST(Adamw, DecayShrinksWeightsOnly) {
  Mlp net = random_net(3, 2, 4, 3, 0.0, 19);
  const Mlp before = net;
  AdamwConfig cfg;
  cfg.weight_decay = 0.1;
  AdamwState st(net, cfg);
  Gradients g;
  for (const auto& l : net.layers) {
    g.weight.push_back(MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(VectorXd::Zero(l.bias.size()));
  }
  adamw_step(net, g, st, 0.01);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    EXPECT_LE((net.layers[l].weight - before.layers[l].weight * (1 - 0.01 * 0.1)).cwiseAbs().maxCoeff(), 1e-16);
    EXPECT_EQ(net.layers[l].bias, before.layers[l].bias);
  }
}

TEST(McPasses, ZeroDropoutPassesIdentical) {
  const Mlp net = random_net(4, 3, 6, 3, 0.0, 20);
  CounterRng rng(21);
  const auto passes = mc_passes(net, VectorXd::Constant(4, 0.5), 25, rng);
  ASSERT_EQ(passes.size(), 25u);
  for (const auto& p : passes) EXPECT_EQ(p, passes.front());
}

TEST(McPasses, FixedSeedReproducible) {
  const Mlp net = random_net(4, 3, 6, 3, 0.2, 22);
  CounterRng r1(23), r2(23);
  const auto a = mc_passes(net, VectorXd::Constant(4, 0.5), 10, r1);
  const auto b = mc_passes(net, VectorXd::Constant(4, 0.5), 10, r2);
  EXPECT_EQ(a, b);
  bool differs = false;
  for (const auto& p : a) differs |= p != a.front();
  EXPECT_TRUE(differs);
}

TEST(Scaler, RoundTrip) {
  const std::vector<std::vector<double>> rows = {{1.0, -2.0, 5.0}, {2.0, 3.0, 5.0}, {1.5, 0.0, 5.0}};
  const FeatureScaler s = FeatureScaler::fit(rows);
  for (const auto& r : rows) {
    const VectorXd back = s.unscale(s.scale(r));
    for (std::size_t j = 0; j < r.size(); ++j) EXPECT_NEAR(back(static_cast<long>(j)), r[j], 1e-12);
    const VectorXd sc = s.scale(r);
    EXPECT_GE(sc.minCoeff(), 0.0);
    EXPECT_LE(sc.maxCoeff(), 1.0);
  }
}

TEST(Checkpoint, JsonRoundTripIsExact) {
  Mlp net = random_net(4, 3, 6, 3, 0.15, 24);
  net.x_scale = FeatureScaler::fit(std::vector<std::vector<double>>{{0, 1, 2, 3}, {1, 2, 3, 5}});
  const auto path = std::filesystem::temp_directory_path() / "absopf_ckpt_test.json";
  save_mlp(net, path);
  const Mlp back = load_mlp(path);
  std::filesystem::remove(path);
  ASSERT_EQ(back.layers.size(), net.layers.size());
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    EXPECT_EQ(back.layers[l].weight, net.layers[l].weight);
    EXPECT_EQ(back.layers[l].bias, net.layers[l].bias);
  }
  EXPECT_EQ(back.dropout_rate, net.dropout_rate);
  EXPECT_EQ(back.x_scale.lo, net.x_scale.lo);
  EXPECT_EQ(back.x_scale.hi, net.x_scale.hi);
}

TEST(Checkpoint, RejectsWrongFormat) {
  EXPECT_THROW(mlp_from_json(R"({"format": "other", "version": 1})"), Error);
  EXPECT_THROW(mlp_from_json("not json"), Error);
}

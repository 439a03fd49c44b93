#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "sgseg/pairnet.hpp"
#include "test_util.hpp"

using namespace sgseg;
using sgseg::testing::line_table;
using sgseg::testing::make_table;

namespace {

FeatureMatrix random_features(std::size_t rows, std::size_t cols, Rng& rng) {
  FeatureMatrix f(rows, cols, 0);
  for (std::size_t r = 0; r < rows; ++r)
    for (double& v : f.row(r)) v = static_cast<double>(rng.index(6));
  return f;
}

}  // namespace

TEST(InitNetwork, DeterministicPerSeed) {
  const PairNet a = init_network(7, 5, 3, 42), b = init_network(7, 5, 3, 42), c = init_network(7, 5, 3, 43);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == c);
  EXPECT_EQ(a.scale(), -1.0);
  EXPECT_EQ(a.bias(), 0.0);
  EXPECT_EQ(a.parameter_count(), 5u * 7 + 5 + 3 * 5 + 3 + 2);
  for (double w : a.w1().reshaped()) EXPECT_LE(std::abs(w), 1.0 / std::sqrt(7.0));
  for (double w : a.w2().reshaped()) EXPECT_LE(std::abs(w), 1.0 / std::sqrt(5.0));
}

TEST(InitNetwork, MinimalDimensionsEvaluate) {
  const PairNet net = init_network(1, 1, 1, 0);
  const double x[1] = {3.0}, y[1] = {0.0};
  const double p = pair_posterior(net, x, y);
  EXPECT_GT(p, 0.0);
  EXPECT_LT(p, 1.0);
}

TEST(Encode, ZeroNetworkGivesZero) {
  PairNet net(4, 3, 2);
  const double x[4] = {1, 2, 3, 4};
  EXPECT_EQ(encode(net, x), PairNet::Vector::Zero(2));
}

TEST(Encode, IdentityLayersPassNonNegativeInput) {
  PairNet net(3, 3, 3);
  net.w1().setIdentity();
  net.w2().setIdentity();
  const double x[3] = {0.0, 2.5, 7.0};
  const auto z = encode(net, x);
  for (int r = 0; r < 3; ++r) EXPECT_EQ(z[r], x[r]);
}

TEST(Encode, MatchesReferenceForwardPass) {
  Rng rng(1);
  for (int rep = 0; rep < 20; ++rep) {
    const PairNet net = init_network(9, 11, 4, rep);
    std::vector<double> x(9);
    for (double& v : x) v = rng.uniform(-3, 5);
    const auto z = encode(net, x);
    const auto ref = oracle::forward(net, x);
    for (std::size_t r = 0; r < ref.size(); ++r) EXPECT_NEAR(z[static_cast<Eigen::Index>(r)], ref[r], 1e-12);
  }
  const PairNet net = init_network(3, 2, 2, 0);
  const double bad[2] = {0, 0};
  EXPECT_SGSEG_ERROR(encode(net, bad), ErrorCode::DimensionMismatch);
}

TEST(EncodeAll, ColumnsMatchSingleEncodes) {
  Rng rng(2);
  const FeatureMatrix f = random_features(13, 6, rng);
  const PairNet net = init_network(6, 8, 3, 5);
  const auto z = encode_all(net, f);
  ASSERT_EQ(z.cols(), 13);
  for (std::size_t i = 0; i < 13; ++i) EXPECT_TRUE(z.col(static_cast<Eigen::Index>(i)).isApprox(encode(net, f.row(i)), 1e-14));
}

TEST(PairPosterior, Examples) {
  PairNet net = init_network(4, 5, 3, 9);
  net.bias() = 0.7;
  const double a[4] = {1, 0, 2, 0}, b[4] = {0, 3, 0, 1};
  const double sig_b = 1.0 / (1.0 + std::exp(-0.7));
  EXPECT_NEAR(pair_posterior(net, a, a), sig_b, 1e-15);
  EXPECT_EQ(pair_posterior(net, a, b), pair_posterior(net, b, a));
  EXPECT_NEAR(pair_posterior(net, a, b), oracle::posterior(net, a, b), 1e-14);
  net.scale() = 0.0;
  EXPECT_NEAR(pair_posterior(net, a, b), sig_b, 1e-15);
  const double short_x[3] = {0, 0, 0};
  EXPECT_SGSEG_ERROR(pair_posterior(net, a, short_x), ErrorCode::DimensionMismatch);
}

TEST(BceLoss, Examples) {
  EXPECT_NEAR(bce_loss(0.5, 0), std::log(2.0), 1e-15);
  EXPECT_NEAR(bce_loss(0.5, 1), std::log(2.0), 1e-15);
  EXPECT_NEAR(bce_loss(0.9, 0), -std::log(0.1), 1e-12);
  EXPECT_NEAR(bce_loss(0.9, 0), 2.302585, 1e-6);
  EXPECT_LT(bce_loss(1.0 - 1e-10, 1), 1e-9);
  EXPECT_TRUE(std::isfinite(bce_loss(0.0, 1)));
  EXPECT_TRUE(std::isfinite(bce_loss(1.0, 0)));
}

TEST(Gradient, MatchesCentralDifferences) {
  Rng rng(3);
  double worst = 0.0;
  for (int probe = 0; probe < 30; ++probe) {
    const PairNet net = init_network(5, 6, 3, 100 + probe);
    const FeatureMatrix f = random_features(8, 5, rng);
    std::vector<LabeledPair> batch;
    for (int k = 0; k < 4; ++k) {
      const auto i = static_cast<MoleculeId>(rng.index(8));
      auto j = static_cast<MoleculeId>(rng.index(7));
      if (j >= i) ++j;
      batch.push_back({i, j, static_cast<int>(rng.index(2))});
    }
    std::vector<double> g;
    const double loss = batch_loss_and_gradient(net, f, batch, g);
    EXPECT_NEAR(loss, oracle::mean_loss(net, f, batch), 1e-12);
    const auto fd = oracle::numeric_gradient(net, f, batch, 1e-5);
    for (std::size_t k = 0; k < g.size(); ++k) worst = std::max(worst, oracle::relative_error(g[k], fd[k], 1e-6));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Gradient, ZeroWhenLogitClampIsActive) {
  PairNet net = init_network(3, 4, 2, 1);
  net.bias() = 50.0;  // logit clamped at +30 for any pair
  FeatureMatrix f(2, 3, 0);
  f.row(0)[0] = 1.0;
  f.row(1)[2] = 2.0;
  const LabeledPair pair{0, 1, 0};
  std::vector<double> g;
  batch_loss_and_gradient(net, f, std::span(&pair, 1), g);
  for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(Gradient, IdenticalFeaturesGiveFiniteGradient) {
  const PairNet net = init_network(3, 4, 2, 1);
  FeatureMatrix f(2, 3, 0);
  f.row(0)[1] = f.row(1)[1] = 2.0;
  const LabeledPair pair{0, 1, 1};
  std::vector<double> g;
  batch_loss_and_gradient(net, f, std::span(&pair, 1), g);
  for (double v : g) EXPECT_TRUE(std::isfinite(v));
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  std::vector<double> p{1.0, -2.0, 3.5}, zero(3, 0.0);
  Adam adam(3, 1e-2);
  for (int s = 0; s < 10; ++s) adam.step(p, zero);
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0, 3.5}));
  EXPECT_EQ(adam.steps(), 10u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<double> p{0.0, 0.0}, g{3.0, -0.5};
  Adam adam(2, 0.01);
  adam.step(p, g);
  // Bias-corrected first step is lr * g / (|g| + eps) per component.
  EXPECT_NEAR(p[0], -0.01, 1e-9);
  EXPECT_NEAR(p[1], 0.01, 1e-9);
}

TEST(Adam, MinimisesQuadratic) {
  std::vector<double> p{5.0, -3.0}, g(2);
  Adam adam(2, 0.1);
  for (int s = 0; s < 2000; ++s) {
    g[0] = 2.0 * (p[0] - 1.0);
    g[1] = 2.0 * (p[1] + 2.0);
    adam.step(p, g);
  }
  EXPECT_NEAR(p[0], 1.0, 1e-3);
  EXPECT_NEAR(p[1], -2.0, 1e-3);
}

TEST(PairSampler, TwoCloseMoleculesHaveNoNegatives) {
  const MoleculeTable t = line_table({0.0, 4.0});
  SpatialIndex index(t);
  PairSampler sampler(t, index, 8.0);
  Rng rng(0);
  const auto first = sampler.sample(1, rng);
  ASSERT_EQ(first.size(), 1u);
  EXPECT_EQ(first[0].label, 1);
  Rng rng2(0);
  PairSampler again(t, index, 8.0);
  EXPECT_SGSEG_ERROR(again.sample(2, rng2), ErrorCode::NoEligiblePairs);
}

TEST(PairSampler, TwoClustersRespectDistanceRules) {
  Rng rng(4);
  std::vector<std::vector<double>> pts;
  std::vector<std::string> genes;
  const double r = 8.0;
  for (int c = 0; c < 2; ++c) {
    for (int m = 0; m < 40; ++m) {
      // Spread < R/2 per axis keeps every intra-cluster pair closer than R.
      pts.push_back({c * 3.0 * r + rng.uniform(0, 0.35 * r), rng.uniform(0, 0.35 * r)});
      genes.push_back(c ? "B" : "A");
    }
  }
  const MoleculeTable t = make_table(pts, genes);
  SpatialIndex index(t);
  TrainConfig cfg;
  cfg.r_cell = r;
  cfg.pairs_per_epoch = 2000;
  Rng s1(7), s2(7);
  const auto pairs = sample_training_pairs(t, index, cfg, s1);
  ASSERT_EQ(pairs.size(), 2000u);
  std::size_t positives = 0;
  for (const auto& p : pairs) {
    const double d = distance(t.position(p.i), t.position(p.j));
    EXPECT_NE(p.i, p.j);
    if (p.label == 1) {
      ++positives;
      EXPECT_LT(d, r);
      EXPECT_EQ(p.i / 40, p.j / 40);
    } else {
      EXPECT_GT(d, 2 * r);
      EXPECT_LE(d, 6 * r);
      EXPECT_NE(p.i / 40, p.j / 40);
    }
  }
  EXPECT_EQ(positives, 1000u);
  EXPECT_EQ(pairs, sample_training_pairs(t, index, cfg, s2));
}

TEST(PairSampler, PartnersAreUniformOverEligibleSet) {
  // Anchor 0 has exactly three eligible positive partners.
  const MoleculeTable t = line_table({0.0, 1.0, 2.0, 3.0, 50.0});
  SpatialIndex index(t);
  PairSampler sampler(t, index, 3.5, 100.0);
  Rng rng(5);
  std::vector<std::size_t> hits(5, 0);
  std::size_t anchored = 0;
  const auto pairs = sampler.sample(40000, rng);
  for (const auto& p : pairs) {
    if (p.label == 1 && p.i == 0) {
      ++hits[p.j];
      ++anchored;
    }
  }
  EXPECT_EQ(hits[4], 0u);
  for (int j = 1; j <= 3; ++j) EXPECT_NEAR(static_cast<double>(hits[j]) / anchored, 1.0 / 3.0, 0.03);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.patience = 300;
  EXPECT_SGSEG_ERROR(c.validate(), ErrorCode::InvalidArgument);
  c = {};
  c.batch_size = 0;
  EXPECT_SGSEG_ERROR(c.validate(), ErrorCode::InvalidArgument);
  c = {};
  c.r_cell = 0.0;
  EXPECT_SGSEG_ERROR(c.validate(), ErrorCode::InvalidArgument);
}

namespace {

// Two populations with disjoint gene sets, cells 4R apart on a line.
struct Separable {
  MoleculeTable table;
  SpatialIndex index;
  FeatureMatrix features;
};

Separable separable_data(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> pts;
  std::vector<std::string> genes;
  const double r = 8.0;
  for (int c = 0; c < 8; ++c) {
    for (int m = 0; m < 60; ++m) {
      pts.push_back({c * 4.0 * r + 0.5 * r * rng.normal(), 0.5 * r * rng.normal()});
      const int base = (c % 2) * 4;
      genes.push_back("g" + std::to_string(base + static_cast<int>(rng.index(4))));
    }
  }
  MoleculeTable t = make_table(pts, genes);
  SpatialIndex index(t);
  FeatureMatrix f = compositional_features(t, index, {.k = 20});
  return {std::move(t), std::move(index), std::move(f)};
}

}  // namespace

TEST(Train, LearnsSeparablePopulations) {
  const Separable d = separable_data(1);
  TrainConfig cfg;
  cfg.seed = 3;
  const PairNet net = init_network(d.table.panel().size(), 32, 8, 4);
  const TrainResult r = train(net, d.table, d.index, d.features, cfg);
  ASSERT_FALSE(r.loss_history.empty());
  EXPECT_LE(r.loss_history.size(), cfg.max_epochs);
  EXPECT_LT(r.loss_history.back(), 0.3);
  EXPECT_EQ(*std::min_element(r.loss_history.begin(), r.loss_history.end()), r.loss_history[r.best_epoch]);

  // The returned snapshot is the one that produced the best epoch: rerunning
  // with max_epochs = best_epoch + 1 and no early stop ends on the same net.
  TrainConfig cut = cfg;
  cut.max_epochs = r.best_epoch + 1;
  cut.patience = std::min<std::size_t>(cfg.patience, r.best_epoch);
  cut.early_stopping = false;
  const TrainResult again = train(net, d.table, d.index, d.features, cut);
  EXPECT_TRUE(again.net == r.net);
}

TEST(Train, DeterministicAndStopsExactlyAfterPatience) {
  const Separable d = separable_data(2);
  TrainConfig cfg;
  cfg.seed = 11;
  cfg.max_epochs = 120;
  cfg.patience = 3;
  cfg.min_improvement = 0.05;  // large, so that stagnation happens quickly
  const PairNet net = init_network(d.table.panel().size(), 8, 4, 1);
  const TrainResult a = train(net, d.table, d.index, d.features, cfg);
  const TrainResult b = train(net, d.table, d.index, d.features, cfg);
  EXPECT_EQ(a.loss_history, b.loss_history);
  ASSERT_TRUE(a.stopped_early);

  // Replay the stopping rule on the recorded history.
  double best = INFINITY;
  std::size_t stale = 0, stop = a.loss_history.size();
  for (std::size_t e = 0; e < a.loss_history.size(); ++e) {
    if (a.loss_history[e] < best - cfg.min_improvement) {
      best = a.loss_history[e];
      stale = 0;
    } else if (++stale > cfg.patience) {
      stop = e + 1;
      break;
    }
  }
  EXPECT_EQ(stop, a.loss_history.size());
  EXPECT_EQ(stale, cfg.patience + 1);

  cfg.early_stopping = false;
  const TrainResult full = train(net, d.table, d.index, d.features, cfg);
  EXPECT_EQ(full.loss_history.size(), cfg.max_epochs);
}

TEST(SaveLoad, RoundTripsParameters) {
  const PairNet net = init_network(3, 4, 2, 77);
  const GenePanel panel({"A", "B", "C"});
  const auto path = std::filesystem::temp_directory_path() / "sgseg_test_net.bin";
  save_network(path, net, panel, TrainConfig{});
  EXPECT_TRUE(load_network(path, &panel) == net);
  const GenePanel other({"A", "B", "D"});
  EXPECT_SGSEG_ERROR(load_network(path, &other), ErrorCode::DimensionMismatch);
  std::filesystem::remove(path);
}

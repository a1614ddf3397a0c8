#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "fixture.hpp"
#include "headprobe/probe.hpp"

using namespace headprobe;
using namespace headprobe::testing;

namespace {

// Two Gaussian blobs separated along the first axis by a wide margin.
void separable(SeededRng& rng, int n, Eigen::MatrixXd& x, Eigen::VectorXd& y) {
  x.resize(n, 4);
  y.resize(n);
  for (int i = 0; i < n; ++i) {
    y(i) = i % 2;
    for (int j = 0; j < 4; ++j) x(i, j) = 0.3 * rng.normal();
    x(i, 0) += y(i) > 0.5 ? 3.0 : -3.0;
  }
}

double objective(const SafetyProbe& p, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double l2) {
  double loss = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double s = x.row(i).dot(p.w) + p.b;
    loss += y(i) > 0.5 ? safe_class_loss(s) : safe_class_loss(-s);
  }
  return loss / static_cast<double>(x.rows()) + 0.5 * l2 * p.w.squaredNorm();
}

}  // namespace

TEST(FitLogistic, SeparableDataIsFitPerfectly) {
  SeededRng rng(1);
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  separable(rng, 80, x, y);
  const auto p = fit_logistic(x, y, {});
  EXPECT_DOUBLE_EQ(accuracy(p, x, y), 1.0);
  EXPECT_GT(p.w(0), 0.0);
}

TEST(FitLogistic, ObjectiveNeverIncreases) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SeededRng rng(seed);
    Eigen::MatrixXd x(60, 5);
    Eigen::VectorXd y(60);
    for (int i = 0; i < 60; ++i) {
      for (int j = 0; j < 5; ++j) x(i, j) = rng.normal();
      y(i) = rng.below(2);
    }
    ProbeHyper hyper;
    hyper.max_iters = 300;
    const auto p = fit_logistic(x, y, hyper);
    const auto& h = p.meta.loss_history;
    ASSERT_GE(h.size(), 2u);
    for (std::size_t i = 1; i < h.size(); ++i) EXPECT_LE(h[i], h[i - 1] + 1e-15) << seed << " step " << i;
    EXPECT_LE(p.meta.final_loss, h.front());
    EXPECT_NEAR(p.meta.final_loss, objective(p, x, y, hyper.l2), 1e-12);
  }
}

TEST(FitLogistic, ZeroFeaturesLearnBaseRate) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(40, 3);
  Eigen::VectorXd y(40);
  for (int i = 0; i < 40; ++i) y(i) = i < 30 ? 1.0 : 0.0;
  ProbeHyper hyper;
  hyper.max_iters = 20000;
  hyper.tolerance = 1e-10;
  const auto p = fit_logistic(x, y, hyper);
  EXPECT_TRUE(p.w.isZero(0.0));
  EXPECT_NEAR(p.b, std::log(30.0 / 10.0), 1e-6);
}

TEST(FitLogistic, SingleClassIsDegenerate) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(10, 2);
  Eigen::VectorXd y = Eigen::VectorXd::Ones(10);
  EXPECT_THROW(fit_logistic(x, y, {}), DegenerateData);
}

TEST(Classify, Examples) {
  SafetyProbe p;
  p.w = Eigen::Vector2d::Zero();
  Eigen::Vector2d e(123.0, -9.0);
  EXPECT_DOUBLE_EQ(classify(p, e).prob_safe, 0.5);
  EXPECT_EQ(classify(p, e).label, 1);

  p.w = Eigen::Vector2d(3, 4);
  const auto out = classify(p, Eigen::Vector2d(1, 1));
  EXPECT_DOUBLE_EQ(out.logit, 7.0);
  EXPECT_NEAR(out.prob_safe, 0.99909, 1e-5);
  EXPECT_EQ(out.label, 1);
}

TEST(Classify, LabelFlipsAtZeroLogit) {
  SafetyProbe p;
  p.w = Eigen::Vector2d(1, 0);
  EXPECT_EQ(classify(p, Eigen::Vector2d(0, 0)).label, 1);
  EXPECT_EQ(classify(p, Eigen::Vector2d(-1e-12, 0)).label, 0);
  EXPECT_EQ(classify(p, Eigen::Vector2d(1e-12, 0)).label, 1);
}

TEST(Classify, LogitIsAffineAlongDirections) {
  SeededRng rng(4);
  for (int rep = 0; rep < 200; ++rep) {
    SafetyProbe p;
    p.w = random_vector(rng, 6);
    p.b = rng.normal();
    const Eigen::VectorXd e = random_vector(rng, 6), v = random_vector(rng, 6);
    const double eps = rng.uniform(0, 5);
    const double lhs = classify(p, (e + eps * v).eval()).logit;
    const double rhs = classify(p, e).logit + eps * p.w.dot(v);
    EXPECT_NEAR(lhs, rhs, 1e-12 * (1.0 + std::abs(rhs)));
  }
}

TEST(SplitDataset, DisjointStratifiedAndSeeded) {
  const auto& f = default_fixture();
  const auto a = split_dataset(f.data, 0.3, 5);
  const auto b = split_dataset(f.data, 0.3, 5);
  const auto c = split_dataset(f.data, 0.3, 6);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.eval, b.eval);
  EXPECT_NE(a.eval, c.eval);
  std::set<std::size_t> all(a.train.begin(), a.train.end());
  for (auto i : a.eval) EXPECT_TRUE(all.insert(i).second) << "index in both halves: " << i;
  EXPECT_EQ(all.size(), f.data.size());
  int eval_benign = 0;
  for (auto i : a.eval) eval_benign += f.data.samples[i].label;
  EXPECT_EQ(a.eval.size(), 60u);
  EXPECT_EQ(eval_benign, 30);
}

TEST(TrainProbe, DeterministicAndAccurate) {
  const auto& f = default_fixture();
  const auto again = train_probe(f.model, f.data, f.config.probe);
  EXPECT_EQ(again.w, f.probe.w);
  EXPECT_EQ(again.b, f.probe.b);
  EXPECT_EQ(f.probe.dim(), 32 * 8);
  EXPECT_TRUE(f.probe.w.allFinite());
  EXPECT_DOUBLE_EQ(accuracy_under_intervention(f.model, f.probe, f.data, std::nullopt), 1.0);
}

TEST(TrainProbe, NoInterventionGivesAccOrig) {
  const auto& f = default_fixture();
  EXPECT_EQ(accuracy_under_intervention(f.model, f.probe, f.data, std::nullopt), *f.air.acc_orig);
}

TEST(TrainProbe, DeadHeadAblationChangesNothing) {
  auto c = default_run_config();
  c.model.dead = {{0, 5}, {2, 2}};
  const auto f = build_fixture(c);
  const double base = accuracy_under_intervention(f.model, f.probe, f.data, std::nullopt);
  for (const auto& id : c.model.dead) {
    EXPECT_EQ(accuracy_under_intervention(f.model, f.probe, f.data, HeadIntervention::ablate(id)), base);
  }
}

TEST(TrainProbe, AblatingPlantedHeadDropsAccuracy) {
  // Pilot over seeds 1-5 measured drops of 0.23-0.30 on the held-out split.
  auto c = default_run_config();
  c.model.planted = {{{2, 3}, 10, 50}, {{3, 7}, 11, 50}};
  const auto f = build_fixture(c);
  const double base = accuracy_under_intervention(f.model, f.probe, f.data, std::nullopt);
  const double cut = accuracy_under_intervention(f.model, f.probe, f.data, HeadIntervention::ablate({2, 3}));
  EXPECT_GT(base - cut, 0.15);
}

TEST(ProbeFile, JsonRoundTrip) {
  const auto& f = default_fixture();
  const auto text = probe_to_json(f.probe);
  const auto back = probe_from_json(text);
  EXPECT_EQ(back.w, f.probe.w);
  EXPECT_EQ(back.b, f.probe.b);
  EXPECT_EQ(back.meta.iterations, f.probe.meta.iterations);
  EXPECT_EQ(back.meta.split_seed, f.probe.meta.split_seed);
  const auto j = Json::parse(text);
  for (const char* key : {"w", "b", "dim", "meta"}) EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_THROW(probe_from_json("{\"w\": [1, 2], \"b\": 0, \"dim\": 3, \"meta\": {}}"), IoError);
}

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "fixture.hpp"
#include "headprobe/attribution.hpp"

using namespace headprobe;
using namespace headprobe::testing;

namespace {

// Global top-floor(alpha * N) by (score desc, index asc), recomputed from scratch.
std::set<int> brute_selection(const Eigen::VectorXd& scores, double alpha) {
  std::vector<int> idx(static_cast<std::size_t>(scores.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return scores(a) > scores(b); });
  const auto k = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(scores.size()) + 1e-9));
  return {idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k)};
}

HeadScoreTable table_from(const HeadLayout& layout, Eigen::VectorXd scores) {
  HeadScoreTable t;
  t.layout = layout;
  t.scores = std::move(scores);
  return t;
}

}  // namespace

TEST(AlphaGrid, DefaultsHaveSixteenRatios) {
  const auto g = AlphaGrid::defaults();
  ASSERT_EQ(g.size(), 16u);
  EXPECT_DOUBLE_EQ(g.ratios.front(), 0.25);
  EXPECT_DOUBLE_EQ(g.ratios.back(), 1.0);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_NEAR(g.ratios[i] - g.ratios[i - 1], 0.05, 1e-12);
  EXPECT_NO_THROW(g.validate());
  EXPECT_THROW((AlphaGrid{{0.5, 0.5}}).validate(), InvalidArgument);
  EXPECT_THROW((AlphaGrid{{0.0, 0.5}}).validate(), InvalidArgument);
  EXPECT_THROW((AlphaGrid{{0.5, 1.1}}).validate(), InvalidArgument);
}

TEST(AirScores, CoverEveryHeadOnce) {
  const auto& f = default_fixture();
  EXPECT_EQ(f.air.method, ScoreMethod::air);
  EXPECT_EQ(f.air.scores.size(), f.model.layout().total_heads());
  ASSERT_TRUE(f.air.acc_orig.has_value());
  for (const auto& id : f.model.layout().all_heads()) {
    const double acc = accuracy_under_intervention(f.model, f.probe, f.data, HeadIntervention::ablate(id));
    EXPECT_DOUBLE_EQ(f.air.score(id), *f.air.acc_orig - acc) << to_string(id);
  }
}

TEST(AirScores, PlantedHeadsOutrankAllOthers) {
  const auto& f = default_fixture();
  double min_planted = 1e9, max_other = -1e9;
  for (const auto& id : f.model.layout().all_heads()) {
    const double s = f.air.score(id);
    if (is_planted(f.config.model, id)) {
      min_planted = std::min(min_planted, s);
    } else {
      max_other = std::max(max_other, s);
    }
  }
  EXPECT_GT(min_planted, max_other);
}

TEST(AirScores, DeadHeadScoresZero) {
  auto c = default_run_config();
  c.model.dead = {{1, 1}, {3, 3}};
  const auto f = build_fixture(c);
  for (const auto& id : c.model.dead) EXPECT_EQ(f.air.score(id), 0.0);
}

TEST(AirScores, NullModelStaysInNoiseBand) {
  // Without planted heads both classes share one distribution. Pilot over seeds 1-20
  // measured max |delta| = 0.15 on the 60-sample eval split.
  auto c = seeded(default_run_config(), 7);
  c.model.planted.clear();
  const auto f = build_fixture(c);
  EXPECT_LE(f.air.scores.cwiseAbs().maxCoeff(), 0.2);
  EXPECT_GE(*f.air.acc_orig, 0.3);
  EXPECT_LE(*f.air.acc_orig, 0.7);
}

TEST(AirScores, RepeatedRunsIdentical) {
  const auto& f = default_fixture();
  const auto again = air_scores(f.model, f.probe, f.data);
  EXPECT_EQ(again.scores, f.air.scores);
  EXPECT_EQ(again.acc_orig, f.air.acc_orig);
}

TEST(AprScores, PlantedHeadHighDeadHeadAtChance) {
  auto c = default_run_config();
  c.model.planted = {{{3, 7}, 11, 50}};
  c.model.dead = {{0, 5}};
  const auto f = build_fixture(c);
  const auto apr = apr_scores(f.model, f.data, c.probe);
  EXPECT_EQ(apr.method, ScoreMethod::apr);
  EXPECT_FALSE(apr.acc_orig.has_value());
  EXPECT_GE(apr.score({3, 7}), 0.9);
  EXPECT_GE(apr.score({0, 5}), 0.4);
  EXPECT_LE(apr.score({0, 5}), 0.6);
  EXPECT_GE(apr.scores.minCoeff(), 0.0);
  EXPECT_LE(apr.scores.maxCoeff(), 1.0);
}

TEST(SelectionFrequency, MatchesBruteForce) {
  const auto& f = default_fixture();
  const auto grid = AlphaGrid::defaults();
  const auto freq = selection_frequency(f.air, grid);
  std::vector<int> counts(static_cast<std::size_t>(f.air.scores.size()), 0);
  for (double a : grid.ratios) {
    for (int i : brute_selection(f.air.scores, a)) ++counts[static_cast<std::size_t>(i)];
  }
  for (std::size_t i = 0; i < counts.size(); ++i) {
    EXPECT_EQ(freq.frequency(static_cast<Eigen::Index>(i)), counts[i] / 16.0) << i;
  }
  const auto top = ranked_heads(f.air, 1).front();
  EXPECT_EQ(freq.frequency(f.air.layout.index(top)), 1.0);
}

TEST(SelectionFrequency, SetsNestAcrossGrid) {
  SeededRng rng(12);
  const HeadLayout layout({8, 8, 8, 8}, 8);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd s(32);
    for (auto& x : s) x = static_cast<double>(rng.below(5));
    const auto grid = AlphaGrid::defaults();
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
      const auto a = brute_selection(s, grid.ratios[i]);
      const auto b = brute_selection(s, grid.ratios[i + 1]);
      EXPECT_TRUE(std::includes(b.begin(), b.end(), a.begin(), a.end()));
    }
    const auto freq = selection_frequency(table_from(layout, s), grid);
    for (Eigen::Index i = 0; i < freq.frequency.size(); ++i) {
      const double scaled = freq.frequency(i) * 16.0;
      EXPECT_EQ(scaled, std::round(scaled));
    }
  }
}

TEST(CriticalHeadSet, MatchesSortOracle) {
  SeededRng rng(2);
  const HeadLayout layout({4, 6, 5}, 2);
  Eigen::VectorXd s(15);
  for (auto& x : s) x = static_cast<double>(rng.below(4));
  const auto freq = selection_frequency(table_from(layout, s), AlphaGrid::defaults());
  auto heads = layout.all_heads();
  std::stable_sort(heads.begin(), heads.end(), [&](const HeadId& a, const HeadId& b) {
    return freq.frequency(layout.index(a)) > freq.frequency(layout.index(b));
  });
  for (std::size_t k = 0; k <= heads.size(); ++k) {
    const auto crit = critical_head_set(freq, k);
    EXPECT_EQ(crit.k, k);
    EXPECT_EQ(crit.heads, std::vector<HeadId>(heads.begin(), heads.begin() + static_cast<std::ptrdiff_t>(k)));
  }
  EXPECT_TRUE(critical_head_set(freq, 0).heads.empty());
  EXPECT_EQ(critical_head_set(freq, 15).heads.size(), 15u);
  EXPECT_THROW(critical_head_set(freq, 16), InvalidArgument);
}

TEST(ScoreFiles, CsvAndJsonShapes) {
  const auto& f = default_fixture();
  const auto csv = scores_to_csv(f.air);
  EXPECT_EQ(csv.rfind("layer,head,score\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 33);
  const auto freq_csv = frequency_to_csv(selection_frequency(f.air, AlphaGrid::defaults()));
  EXPECT_EQ(freq_csv.rfind("layer,head,f\n", 0), 0u);
  EXPECT_EQ(std::count(freq_csv.begin(), freq_csv.end(), '\n'), 33);
  const auto back = score_table_from_json(to_json(f.air), f.air.layout);
  EXPECT_EQ(back.scores, f.air.scores);
  EXPECT_EQ(back.acc_orig, f.air.acc_orig);
  EXPECT_EQ(back.method, f.air.method);
}

TEST(ScoreMethod, ParsesNames) {
  EXPECT_EQ(score_method_from_string("air"), ScoreMethod::air);
  EXPECT_EQ(score_method_from_string("apr"), ScoreMethod::apr);
  EXPECT_THROW(score_method_from_string("AIR!"), InvalidArgument);
}

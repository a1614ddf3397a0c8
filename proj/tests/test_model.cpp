#include <gtest/gtest.h>

#include <algorithm>

#include "fixture.hpp"
#include "headprobe/corpus.hpp"
#include "headprobe/hash.hpp"
#include "headprobe/model_io.hpp"
#include "headprobe/transformer.hpp"

using namespace headprobe;
using namespace headprobe::testing;

namespace {

ModelConfig planted_config(std::uint64_t seed = 1) {
  auto c = ModelConfig::uniform(4, 8, 8, 64, 16, seed);
  c.planted = {{{2, 3}, 10, 50}, {{3, 7}, 11, 50}};
  return c;
}

const std::vector<int> kTriggered{3, 17, 10, 22, 40, 5};
const std::vector<int> kPlain{3, 17, 21, 22, 40, 5};

}  // namespace

TEST(HeadLayout, SlicesPartitionFeatureSpace) {
  const HeadLayout layout({3, 1, 4}, 5);
  EXPECT_EQ(layout.total_heads(), 8);
  EXPECT_EQ(layout.feature_dim(), 40);
  Eigen::Index next = 0;
  for (int i = 0; i < layout.total_heads(); ++i) {
    const HeadId id = layout.head_at(i);
    EXPECT_EQ(layout.index(id), i);
    EXPECT_EQ(layout.offset(id), next);
    next += layout.d_head();
  }
  EXPECT_EQ(next, layout.feature_dim());
  const auto heads = layout.all_heads();
  EXPECT_TRUE(std::is_sorted(heads.begin(), heads.end()));
  EXPECT_THROW(layout.index({1, 1}), InvalidArgument);
  EXPECT_THROW(layout.index({3, 0}), InvalidArgument);
}

TEST(ModelConfig, RejectsInvalidPlantedHeads) {
  auto c = planted_config();
  c.planted.push_back({{4, 0}, 12, 50});
  EXPECT_THROW(c.validate(), InvalidArgument);
  EXPECT_THROW(build_planted_model<double>(c), InvalidArgument);

  c = planted_config();
  c.planted.push_back({{2, 3}, 12, 50});
  EXPECT_THROW(c.validate(), InvalidArgument);

  c = planted_config();
  c.planted[0].refusal_token = c.planted[0].trigger_token;
  EXPECT_THROW(c.validate(), InvalidArgument);

  c = planted_config();
  c.dead = {{2, 3}};
  EXPECT_THROW(c.validate(), InvalidArgument);

  c = planted_config();
  c.heads_per_layer = {};
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(ToyTransformer, ShapesMatchConfig) {
  const Model m = build_planted_model<double>(planted_config());
  EXPECT_NO_THROW(m.check_shapes());
  const auto& c = m.config;
  EXPECT_EQ(m.token_embedding.rows(), c.vocab_size);
  EXPECT_EQ(m.token_embedding.cols(), c.d_model);
  EXPECT_EQ(m.position_embedding.rows(), c.max_seq_len);
  ASSERT_EQ(static_cast<int>(m.blocks.size()), c.num_layers());
  for (const auto& b : m.blocks) {
    EXPECT_EQ(b.wq.rows(), 8 * c.d_head);
    EXPECT_EQ(b.wq.cols(), c.d_model);
    EXPECT_EQ(b.wo.rows(), c.d_model);
    EXPECT_EQ(b.wo.cols(), 8 * c.d_head);
  }
  EXPECT_EQ(m.unembedding.rows(), c.vocab_size);
}

TEST(ToyTransformer, DeterministicWeightsAreBitwiseIdentical) {
  const auto a = serialize_model(build_planted_model<double>(planted_config(5)));
  const auto b = serialize_model(build_planted_model<double>(planted_config(5)));
  const auto c = serialize_model(build_planted_model<double>(planted_config(6)));
  EXPECT_EQ(sha256_hex(a), sha256_hex(b));
  EXPECT_NE(sha256_hex(a), sha256_hex(c));
}

TEST(ToyTransformer, ContainerRoundTripIsExact) {
  const Model m = build_planted_model<double>(planted_config());
  const Model back = deserialize_model(serialize_model(m));
  EXPECT_EQ(back.config, m.config);
  EXPECT_EQ(serialize_model(back), serialize_model(m));
  const auto t1 = forward(m, std::span<const int>(kTriggered));
  const auto t2 = forward(back, std::span<const int>(kTriggered));
  EXPECT_EQ(t1.logits, t2.logits);
  EXPECT_EQ(t1.head_outputs, t2.head_outputs);
}

TEST(ToyTransformer, ContainerRejectsCorruption) {
  auto bytes = serialize_model(build_planted_model<double>(planted_config()));
  EXPECT_THROW(deserialize_model(bytes.substr(0, bytes.size() - 4)), IoError);
  EXPECT_THROW(deserialize_model("not a model"), IoError);
}

TEST(Forward, EmptyInterventionListIsIdentity) {
  const Model m = build_planted_model<double>(planted_config());
  const std::vector<HeadIntervention> none;
  const auto a = forward(m, std::span<const int>(kTriggered));
  const auto b = forward(m, std::span<const int>(kTriggered), none);
  EXPECT_EQ(a.head_outputs, b.head_outputs);
  EXPECT_EQ(a.final_hidden, b.final_hidden);
  EXPECT_EQ(a.logits, b.logits);
  EXPECT_EQ(static_cast<Eigen::Index>(a.head_outputs.rows()), m.layout().total_heads());
}

TEST(Forward, AblationZeroesOnlyThatHeadAtItsLayer) {
  const Model m = build_planted_model<double>(planted_config());
  const auto layout = m.layout();
  const auto base = forward(m, std::span<const int>(kTriggered));
  const HeadId target{1, 2};
  const std::vector<HeadIntervention> iv{HeadIntervention::ablate(target)};
  const auto t = forward(m, std::span<const int>(kTriggered), iv);
  const Eigen::VectorXd e0 = extract_features(base), e1 = extract_features(t);
  EXPECT_TRUE(layout.slice(e1, target).isZero(0.0));
  for (const auto& id : layout.all_heads()) {
    if (id.layer < target.layer || (id.layer == target.layer && id != target)) {
      EXPECT_EQ(layout.slice(e1, id), layout.slice(e0, id)) << to_string(id);
    }
  }
  // Downstream layers see the change.
  EXPECT_NE(layout.slice(e1, HeadId{3, 7}), layout.slice(e0, HeadId{3, 7}));
}

TEST(Forward, InjectionAtLastLayerShiftsSliceByDelta) {
  const Model m = build_planted_model<double>(planted_config());
  const auto layout = m.layout();
  const HeadId target{3, 5};
  Eigen::VectorXd delta(8);
  delta << 0.5, -1, 2, 0, 0.25, 3, -0.75, 1;
  const std::vector<HeadIntervention> iv{HeadIntervention::inject(target, delta)};
  const Eigen::VectorXd e0 = extract_features(forward(m, std::span<const int>(kPlain)));
  const Eigen::VectorXd e1 = extract_features(forward(m, std::span<const int>(kPlain), iv));
  EXPECT_EQ(layout.slice(e1, target), layout.slice(e0, target) + delta);
  for (const auto& id : layout.all_heads()) {
    if (id != target) EXPECT_EQ(layout.slice(e1, id), layout.slice(e0, id));
  }
}

TEST(Forward, RejectsBadInputs) {
  const Model m = build_planted_model<double>(planted_config());
  const std::vector<int> empty, oov{1, 64}, too_long(17, 1);
  EXPECT_THROW(forward(m, std::span<const int>(empty)), InvalidArgument);
  EXPECT_THROW(forward(m, std::span<const int>(oov)), InvalidArgument);
  EXPECT_THROW(forward(m, std::span<const int>(too_long)), InvalidArgument);
  const std::vector<HeadIntervention> bad_head{HeadIntervention::ablate({4, 0})};
  EXPECT_THROW(forward(m, std::span<const int>(kPlain), bad_head), InvalidArgument);
  const std::vector<HeadIntervention> bad_delta{HeadIntervention::inject({0, 0}, Eigen::VectorXd::Ones(3))};
  EXPECT_THROW(forward(m, std::span<const int>(kPlain), bad_delta), InvalidArgument);
  const std::vector<HeadIntervention> clash{HeadIntervention::ablate({0, 0}),
                                            HeadIntervention::inject({0, 0}, Eigen::VectorXd::Ones(8))};
  EXPECT_THROW(forward(m, std::span<const int>(kPlain), clash), InvalidArgument);
}

TEST(Forward, AttentionRowsAreDistributions) {
  const Model m = build_planted_model<double>(planted_config());
  const auto t = forward(m, std::span<const int>(kTriggered), {}, ForwardOptions{true});
  ASSERT_EQ(static_cast<int>(t.attention.size()), m.layout().total_heads());
  for (const auto& a : t.attention) {
    ASSERT_EQ(a.rows(), static_cast<Eigen::Index>(kTriggered.size()));
    EXPECT_GE(a.minCoeff(), 0.0);
    for (Eigen::Index q = 0; q < a.rows(); ++q) {
      EXPECT_NEAR(a.row(q).sum(), 1.0, 1e-6);
      for (Eigen::Index k = q + 1; k < a.cols(); ++k) EXPECT_EQ(a(q, k), 0.0);
    }
  }
}

TEST(Forward, DeterministicTrace) {
  const Model m = build_planted_model<double>(planted_config());
  const std::vector<HeadIntervention> iv{HeadIntervention::ablate({0, 1})};
  const auto a = forward(m, std::span<const int>(kTriggered), iv);
  const auto b = forward(m, std::span<const int>(kTriggered), iv);
  EXPECT_EQ(a.logits, b.logits);
  EXPECT_EQ(a.head_outputs, b.head_outputs);
}

TEST(PlantedModel, AblatingPlantedHeadsLowersRefusalLogit) {
  const Model m = build_planted_model<double>(planted_config());
  const int refusal = 50;
  const auto base = forward(m, std::span<const int>(kTriggered));
  EXPECT_EQ(base.greedy_token(), refusal);
  std::vector<HeadIntervention> iv;
  for (const auto& p : m.config.planted) iv.push_back(HeadIntervention::ablate(p.head));
  const auto cut = forward(m, std::span<const int>(kTriggered), iv);
  EXPECT_LT(cut.logits(refusal), base.logits(refusal));
  EXPECT_NE(cut.greedy_token(), refusal);
  EXPECT_NE(forward(m, std::span<const int>(kPlain)).greedy_token(), refusal);
}

TEST(PlantedModel, FloatInstantiationTracksDouble) {
  const auto cfg = planted_config();
  const auto md = build_planted_model<double>(cfg);
  const auto mf = build_planted_model<float>(cfg);
  const auto td = forward(md, std::span<const int>(kTriggered));
  const auto tf = forward(mf, std::span<const int>(kTriggered));
  EXPECT_LT((td.logits - tf.logits.cast<double>()).cwiseAbs().maxCoeff(), 1e-4);
  EXPECT_EQ(td.greedy_token(), tf.greedy_token());
}

TEST(Corpus, BalancedCountsAndTriggerPlacement) {
  const auto cfg = planted_config();
  SeededRng rng(2);
  const auto data = generate_corpus(cfg, {100, 100, 6, 12}, rng);
  EXPECT_EQ(data.size(), 200u);
  EXPECT_EQ(data.count_label(1), 100u);
  EXPECT_EQ(data.count_label(0), 100u);
  const auto triggers = cfg.trigger_tokens();
  for (const auto& s : data.samples) {
    EXPECT_GE(s.tokens.size(), 6u);
    EXPECT_LE(s.tokens.size(), 12u);
    const auto n = std::count_if(s.tokens.begin(), s.tokens.end(), [&](int t) {
      return std::find(triggers.begin(), triggers.end(), t) != triggers.end();
    });
    if (s.label == 1) {
      EXPECT_EQ(n, 0);
    } else {
      EXPECT_GE(n, 1);
    }
    EXPECT_EQ(std::count(s.tokens.begin(), s.tokens.end(), 50), 0);
  }
}

TEST(Corpus, SeedDeterminesCorpus) {
  const auto cfg = planted_config();
  SeededRng a(4), b(4), c(5);
  const auto da = generate_corpus(cfg, {}, a);
  EXPECT_EQ(da, generate_corpus(cfg, {}, b));
  EXPECT_NE(da, generate_corpus(cfg, {}, c));
}

TEST(Corpus, JsonLinesRoundTrip) {
  const auto cfg = planted_config();
  SeededRng rng(8);
  const auto data = generate_corpus(cfg, {5, 7, 3, 9}, rng);
  const auto path = scratch_dir("corpus") / "corpus.jsonl";
  save_corpus(path, data);
  EXPECT_EQ(load_corpus(path), data);
  const auto text = corpus_to_jsonl(data);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 12);
}

TEST(Corpus, RejectsBadSpec) {
  const auto cfg = planted_config();
  SeededRng rng(1);
  EXPECT_THROW(generate_corpus(cfg, {0, 0, 6, 12}, rng), InvalidArgument);
  EXPECT_THROW(generate_corpus(cfg, {-1, 5, 6, 12}, rng), InvalidArgument);
  EXPECT_THROW(generate_corpus(cfg, {5, 5, 6, 17}, rng), InvalidArgument);
}

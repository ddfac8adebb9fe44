#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "cqa/error.hpp"
#include "cqa/model.hpp"
#include "cqa/synthetic.hpp"

using namespace cqa;

namespace {

Triple triple(std::string q_new, std::string q_rel, std::string c_rel, std::int64_t rank = 1) {
  Triple t;
  t.id = "t";
  t.group = "g";
  t.q_new_body = std::move(q_new);
  t.q_rel_body = std::move(q_rel);
  t.c_rel = std::move(c_rel);
  t.google_rank = rank;
  return t;
}

ModelConfig small_config(std::size_t vocab) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.word_dim = 8;
  c.feat_dim = 3;
  c.feature_maps = 6;
  return c;
}

struct Fixture {
  std::vector<Triple> corpus = synthetic_corpus({});
  Vocabulary vocab = corpus_vocabulary(corpus);
  std::vector<Example> examples = compute_features(corpus, vocab);
};

template <typename T>
std::unique_ptr<Scorer<T>> initialized(const ModelSpec& spec, std::uint64_t seed) {
  auto m = make_model<T>(spec);
  std::mt19937_64 rng(seed);
  m->initialize(rng);
  return m;
}

}  // namespace

TEST(RankBin, Examples) {
  EXPECT_EQ(rank_bin(1), 0u);
  EXPECT_EQ(rank_bin(2), 1u);
  EXPECT_EQ(rank_bin(4), 1u);
  EXPECT_EQ(rank_bin(5), 2u);
  EXPECT_EQ(rank_bin(9), 2u);
  EXPECT_EQ(rank_bin(10), 3u);
  EXPECT_EQ(rank_bin(24), 3u);
  EXPECT_EQ(rank_bin(25), 4u);
  EXPECT_EQ(rank_bin(10000), 4u);
  EXPECT_THROW(rank_bin(0), DataError);
  EXPECT_THROW(rank_bin(-3), DataError);
}

TEST(RankBin, TotalAndMonotone) {
  std::size_t prev = 0;
  std::set<std::size_t> seen;
  for (std::int64_t r = 1; r <= 10000; ++r) {
    const auto b = rank_bin(r);
    ASSERT_LT(b, kRankBins);
    ASSERT_GE(b, prev);
    prev = b;
    seen.insert(b);
  }
  EXPECT_EQ(seen.size(), kRankBins);
}

TEST(Features, OverlapExamples) {
  const auto t = triple("visa", "visa fee", "fee");
  const auto vocab = corpus_vocabulary(std::vector<Triple>{t});
  const auto ex = compute_triple_features(t, vocab);
  EXPECT_EQ(ex.q_new.overlaps, (std::vector<std::uint8_t>{1}));
  EXPECT_EQ(ex.q_rel.overlaps, (std::vector<std::uint8_t>{1, 1}));
  EXPECT_EQ(ex.c_rel.overlaps, (std::vector<std::uint8_t>{1}));

  const auto disjoint = compute_triple_features(triple("a b", "c d", "e f"), vocab);
  for (const auto* text : {&disjoint.q_new, &disjoint.q_rel, &disjoint.c_rel})
    for (auto o : text->overlaps) EXPECT_EQ(o, 0);

  const auto same = compute_triple_features(triple("x y z", "x y z", "x y z", 7), vocab);
  for (const auto* text : {&same.q_new, &same.q_rel, &same.c_rel})
    for (auto o : text->overlaps) EXPECT_EQ(o, 1);
  EXPECT_EQ(same.rank_bin, 2u);
}

TEST(Features, EmptyTextBecomesPad) {
  Vocabulary vocab;
  const auto ex = compute_triple_features(triple("", "question", "?"), vocab);
  EXPECT_EQ(ex.q_new.ids, (std::vector<std::int32_t>{Vocabulary::kPad}));
  EXPECT_EQ(ex.q_new.overlaps, (std::vector<std::uint8_t>{0}));
}

TEST(Encoder, OutputLengthIsFeatureMaps) {
  auto cfg = small_config(20);
  SentenceEncoder<double> enc(cfg);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (auto* p : {&enc.words, &enc.feats, &enc.filters, &enc.bias})
    for (auto& v : p->value.values()) v = u(rng);
  for (std::size_t n = 1; n <= 100; ++n) {
    std::vector<std::int32_t> ids(n);
    std::vector<std::uint8_t> ov(n);
    for (std::size_t j = 0; j < n; ++j) {
      ids[j] = static_cast<std::int32_t>(rng() % 20);
      ov[j] = rng() % 2;
    }
    ASSERT_EQ(enc.encode(ids, ov).size(), cfg.feature_maps);
  }
}

TEST(Encoder, ZeroFiltersGiveZeroVector) {
  SentenceEncoder<double> enc(small_config(5));
  enc.words.value.fill(0.3);
  enc.feats.value.fill(-0.2);
  const std::vector<std::int32_t> ids = {1, 2, 3};
  const std::vector<std::uint8_t> ov = {0, 1, 0};
  for (double v : enc.encode(ids, ov)) EXPECT_EQ(v, 0.0);
}

TEST(MtlModel, QuestionEncoderIsSharedStorage) {
  Fixture f;
  auto cfg = small_config(f.vocab.size());
  MtlModel<double> model(cfg);
  std::mt19937_64 rng(3);
  model.initialize(rng);

  EXPECT_EQ(&model.encoder_for_q_new(), &model.encoder_for_q_rel());
  EXPECT_NE(&model.encoder_for_q_new(), &model.encoder_for_c_rel());
  EXPECT_EQ(&model.encoder_for_q_new().filters.value, &model.encoder_for_q_rel().filters.value);

  // No parameter tensor is listed twice, and there is exactly one question encoder.
  std::set<const void*> storage;
  std::size_t q_words = 0;
  for (const auto& p : model.parameters()) {
    EXPECT_TRUE(storage.insert(p.param).second) << p.name;
    if (p.name == "q_enc.words") ++q_words;
  }
  EXPECT_EQ(q_words, 1u);

  const auto& ex = f.examples[0];
  const auto before = model.encoder_for_q_rel().encode(ex.q_rel.ids, ex.q_rel.overlaps);
  model.encoder_for_q_new().filters.value[0] += 0.5;
  model.encoder_for_q_new().bias.value[0] += 0.5;
  const auto after = model.encoder_for_q_rel().encode(ex.q_rel.ids, ex.q_rel.overlaps);
  EXPECT_NE(before, after);
}

TEST(MtlModel, ScoresInUnitIntervalAndDeterministic) {
  Fixture f;
  auto m = initialized<float>({ModelKind::mtl, std::nullopt, small_config(f.vocab.size())}, 4);
  for (const auto& ex : f.examples) {
    const auto a = m->score(ex);
    const auto b = m->score(ex);
    EXPECT_EQ(a, b);
    for (float p : a) {
      EXPECT_GT(p, 0.0f);
      EXPECT_LT(p, 1.0f);
    }
  }
}

TEST(MtlModel, ZeroedRankTableIgnoresRank) {
  Fixture f;
  MtlModel<double> model(small_config(f.vocab.size()));
  std::mt19937_64 rng(5);
  model.initialize(rng);
  model.rank_table.value.fill(0.0);
  auto a = f.examples[0];
  auto b = a;
  a.google_rank = 1;
  a.rank_bin = rank_bin(1);
  b.google_rank = 40;
  b.rank_bin = rank_bin(40);
  EXPECT_EQ(model.score(a), model.score(b));

  // A non-zero row for the far bin makes the rank visible again.
  model.rank_table.value.fill(0.0);
  model.rank_table.value.row(4)[0] = 1.0;
  EXPECT_NE(model.score(a), model.score(b));
}

TEST(MtlModel, SameSeedSameParameters) {
  Fixture f;
  const ModelSpec spec{ModelKind::mtl, std::nullopt, small_config(f.vocab.size())};
  auto a = initialized<float>(spec, 9);
  auto b = initialized<float>(spec, 9);
  auto c = initialized<float>(spec, 10);
  const auto va = a->values(), vb = b->values(), vc = c->values();
  ASSERT_EQ(va.size(), vb.size());
  bool differs = false;
  for (std::size_t i = 0; i < va.size(); ++i) {
    EXPECT_EQ(*va[i].second, *vb[i].second) << va[i].first;
    differs |= !(*va[i].second == *vc[i].second);
  }
  EXPECT_TRUE(differs);
  for (const auto& [name, t] : va)
    if (name.ends_with(".b") || name.ends_with(".bias"))
      for (float v : t->values()) EXPECT_EQ(v, 0.0f) << name;
}

TEST(MtlModel, InferenceDropoutIsIdentity) {
  Fixture f;
  MtlModel<double> model(small_config(f.vocab.size()));
  std::mt19937_64 rng(6);
  model.initialize(rng);
  auto off = Dropout<double>::inference();
  const auto s1 = model.forward(f.examples[1], off)->scores;
  EXPECT_EQ(s1, model.score(f.examples[1]));
  std::mt19937_64 drng(1);
  auto on = Dropout<double>::training(drng, 0.4, 0.7);
  const auto s2 = model.forward(f.examples[1], on)->scores;
  EXPECT_FALSE(on.history().empty());
  auto replay = Dropout<double>::replay(on.history());
  EXPECT_EQ(model.forward(f.examples[1], replay)->scores, s2);
}

TEST(PairModel, TaskAIgnoresRank) {
  Fixture f;
  auto m = initialized<double>({ModelKind::pair, Task::A, small_config(f.vocab.size())}, 7);
  auto a = f.examples[2];
  auto b = a;
  b.google_rank = 30;
  b.rank_bin = rank_bin(30);
  a.rank_bin = rank_bin(1);
  EXPECT_EQ(m->score(a)[0], m->score(b)[0]);
  EXPECT_TRUE(std::isnan(m->score(a)[1]));
  EXPECT_TRUE(std::isnan(m->score(a)[2]));
}

TEST(PairModel, RankTableOnlyForBAndC) {
  Fixture f;
  for (auto task : kAllTasks) {
    PairModel<double> m(small_config(f.vocab.size()), task);
    EXPECT_EQ(m.rank_table.has_value(), task != Task::A);
    EXPECT_EQ(m.comment_encoder.has_value(), task != Task::B);
    EXPECT_EQ(m.joint_dim(), 2 * 6 + (task == Task::A ? 0u : 3u));
  }
}

TEST(PairModel, IdenticalQuestionsWellDefined) {
  Fixture f;
  auto m = initialized<double>({ModelKind::pair, Task::B, small_config(f.vocab.size())}, 8);
  auto ex = f.examples[0];
  ex.q_rel = ex.q_new;
  const double s = m->score(ex)[1];
  EXPECT_GT(s, 0.0);
  EXPECT_LT(s, 1.0);
}

TEST(PairModel, ZeroedRankTableIgnoresRank) {
  Fixture f;
  for (auto task : {Task::B, Task::C}) {
    PairModel<double> m(small_config(f.vocab.size()), task);
    std::mt19937_64 rng(9);
    m.initialize(rng);
    m.rank_table->value.fill(0.0);
    auto a = f.examples[0];
    auto b = a;
    b.rank_bin = 4;
    a.rank_bin = 0;
    EXPECT_EQ(m.score(a)[index(task)], m.score(b)[index(task)]);
  }
}

TEST(WordVectors, LoadsKnownTokensAndChecksDims) {
  Fixture f;
  MtlModel<double> model(small_config(f.vocab.size()));
  const auto path = std::filesystem::temp_directory_path() / "cqa_vectors.txt";
  const std::string tok = f.vocab.token(2);
  {
    std::ofstream out(path);
    out << "2 8\n" << tok << " 1 2 3 4 5 6 7 8\nnot_in_vocab 1 1 1 1 1 1 1 1\n";
  }
  EXPECT_EQ(load_word_vectors(path, f.vocab, model), 1u);
  EXPECT_EQ(model.question_encoder.words.value.at(2, 7), 8.0);
  EXPECT_EQ(model.comment_encoder.words.value.at(2, 0), 1.0);
  {
    std::ofstream out(path);
    out << tok << " 1 2 3\n";
  }
  EXPECT_THROW(load_word_vectors(path, f.vocab, model), DimensionError);
  std::filesystem::remove(path);
}

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "cqa/checkpoint.hpp"
#include "cqa/error.hpp"
#include "cqa/synthetic.hpp"
#include "cqa/training.hpp"

using namespace cqa;

namespace {

ModelConfig config_for(const Vocabulary& v, std::size_t maps = 6) {
  ModelConfig c;
  c.vocab_size = v.size();
  c.word_dim = 8;
  c.feat_dim = 3;
  c.feature_maps = maps;
  return c;
}

struct SmallCorpus {
  std::vector<Triple> corpus = synthetic_corpus({});
  Vocabulary vocab = corpus_vocabulary(corpus);
  std::vector<Example> examples = compute_features(corpus, vocab);
};

}  // namespace

TEST(Checkpoint, SaveRestoreSaveIsByteIdentical) {
  SmallCorpus s;
  for (const ModelSpec spec : {ModelSpec{ModelKind::mtl, std::nullopt, config_for(s.vocab)},
                               ModelSpec{ModelKind::pair, Task::A, config_for(s.vocab)},
                               ModelSpec{ModelKind::pair, Task::B, config_for(s.vocab)},
                               ModelSpec{ModelKind::pair, Task::C, config_for(s.vocab)}}) {
    auto model = make_model<float>(spec);
    std::mt19937_64 rng(1);
    model->initialize(rng);
    const auto bytes = snapshot(*model, s.vocab);
    const auto ck = parse_checkpoint(bytes);
    EXPECT_EQ(ck.spec, spec);
    EXPECT_EQ(ck.vocabulary, s.vocab.tokens());
    auto back = restore<float>(ck);
    EXPECT_EQ(snapshot(*back, ck.vocab()), bytes);
    for (const auto& ex : s.examples) {
      const auto a = model->score(ex), b = back->score(ex);
      for (int t = 0; t < 3; ++t)
        if (!std::isnan(a[t])) EXPECT_EQ(a[t], b[t]);
    }
  }
}

TEST(Checkpoint, RestoredModelReproducesDevLoss) {
  SmallCorpus s;
  auto model = make_model<float>({ModelKind::mtl, std::nullopt, config_for(s.vocab)});
  std::mt19937_64 rng(2);
  model->initialize(rng);
  const auto before = evaluate_dev(*model, s.examples, TaskSet::all());
  const auto back = restore<float>(parse_checkpoint(snapshot(*model, s.vocab)));
  const auto after = evaluate_dev(*back, s.examples, TaskSet::all());
  EXPECT_EQ(before.loss_dev, after.loss_dev);
  EXPECT_EQ(before.task_loss_dev, after.task_loss_dev);
}

TEST(Checkpoint, FileRoundTrip) {
  SmallCorpus s;
  auto model = make_model<double>({ModelKind::pair, Task::C, config_for(s.vocab)});
  std::mt19937_64 rng(3);
  model->initialize(rng);
  const auto bytes = snapshot(*model, s.vocab);
  const auto path = std::filesystem::temp_directory_path() / "cqa_test.ckpt";
  write_checkpoint(path, bytes);
  auto back = restore<double>(read_checkpoint(path));
  EXPECT_EQ(snapshot(*back, s.vocab), bytes);
  std::filesystem::remove(path);
}

TEST(Checkpoint, CorruptionIsDetected) {
  SmallCorpus s;
  auto model = make_model<float>({ModelKind::mtl, std::nullopt, config_for(s.vocab)});
  std::mt19937_64 rng(4);
  model->initialize(rng);
  const auto bytes = snapshot(*model, s.vocab);

  EXPECT_THROW(parse_checkpoint(""), DataError);
  EXPECT_THROW(parse_checkpoint("not a checkpoint at all"), DataError);
  EXPECT_THROW(parse_checkpoint(std::string_view(bytes).substr(0, bytes.size() / 2)), DataError);
  for (std::size_t pos : {std::size_t{20}, bytes.size() / 2, bytes.size() - 3}) {
    auto flipped = bytes;
    flipped[pos] ^= 0x5A;
    EXPECT_THROW(parse_checkpoint(flipped), DataError) << pos;
  }
}

TEST(Checkpoint, MismatchedFeatureMapsIsDimensionError) {
  SmallCorpus s;
  auto small = make_model<float>({ModelKind::mtl, std::nullopt, config_for(s.vocab, 6)});
  auto large = make_model<float>({ModelKind::mtl, std::nullopt, config_for(s.vocab, 7)});
  const auto ck = parse_checkpoint(snapshot(*small, s.vocab));
  EXPECT_THROW(load_parameters(*large, ck), DimensionError);
  auto pair = make_model<float>({ModelKind::pair, Task::A, config_for(s.vocab, 6)});
  EXPECT_THROW(load_parameters(*pair, ck), DimensionError);
}

TEST(Checkpoint, PrecisionIsRecorded) {
  SmallCorpus s;
  auto f = make_model<float>({ModelKind::pair, Task::A, config_for(s.vocab)});
  auto d = make_model<double>({ModelKind::pair, Task::A, config_for(s.vocab)});
  EXPECT_EQ(parse_checkpoint(snapshot(*f, s.vocab)).tensors.front().dtype, 1);
  EXPECT_EQ(parse_checkpoint(snapshot(*d, s.vocab)).tensors.front().dtype, 2);
}

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <map>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cqa/dataset.hpp"
#include "cqa/io.hpp"
#include "cqa/synthetic.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

Run cli(const std::string& args) {
  const std::string cmd = std::string(CQA_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::size_t line_count(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("cqa_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    cqa::SyntheticConfig sc;
    sc.queries = 2;
    sc.related_per_query = 2;
    sc.comments_per_related = 3;
    corpus = dir / "corpus.jsonl";
    cqa::save_corpus(corpus, cqa::synthetic_corpus(sc));
  }
  void TearDown() override { fs::remove_all(dir); }

  std::string p(const fs::path& f) const { return (dir / f).string(); }

  fs::path dir;
  fs::path corpus;
  const std::string small = " --feature_maps 4 --word_dim 6 --feat_dim 2 --batch_size 4 ";
};

}  // namespace

TEST_F(Cli, ExtendCountsAndReloads) {
  cqa::Thread a{"t1", std::nullopt, "first question", {}};
  cqa::Thread b{"t2", "subject", "second question", {}};
  for (int i = 0; i < 3; ++i) {
    a.comments.push_back({"a" + std::to_string(i), "answer a" + std::to_string(i), cqa::CommentLabel::good});
    b.comments.push_back({"b" + std::to_string(i), "answer b" + std::to_string(i), cqa::CommentLabel::bad});
  }
  // A corpus whose task A threads are exactly these two threads.
  std::vector<cqa::Triple> triples;
  for (const auto& t : {a, b})
    for (const auto& c : t.comments) {
      cqa::Triple x;
      x.id = "orig_" + c.id;
      x.group = "new";
      x.q_new_body = "new question";
      x.q_rel_subject = t.subject;
      x.q_rel_body = t.body;
      x.q_rel_id = t.question_id;
      x.c_rel = c.text;
      x.label_A = c.label_A;
      triples.push_back(x);
    }
  cqa::save_corpus(dir / "threads.jsonl", triples);
  const auto r = cli("extend --input " + p("threads.jsonl") + " --output " + p("ext.jsonl"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("+6 extended"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("total triples: 12"), std::string::npos) << r.output;
  const auto back = cqa::load_corpus(dir / "ext.jsonl");
  ASSERT_EQ(back.size(), 12u);
  for (std::size_t i = 6; i < 12; ++i) {
    EXPECT_EQ(cqa::binarize(back[i]).yB, 1);
    EXPECT_EQ(back[i].label_C, back[i].label_A);
  }
}

TEST_F(Cli, TrainWritesOneCheckpointInGlobalMode) {
  const auto r = cli("train --train " + corpus.string() + " --dev " + corpus.string() + " --out_dir " +
                     p("global") + small + "--max_epochs 3");
  ASSERT_EQ(r.code, 0) << r.output;
  std::size_t ckpts = 0;
  for (const auto& e : fs::directory_iterator(dir / "global")) ckpts += e.path().extension() == ".ckpt";
  EXPECT_EQ(ckpts, 1u);
  EXPECT_TRUE(fs::exists(dir / "global" / "model.ckpt"));
  EXPECT_EQ(line_count(cqa::read_file(dir / "global" / "report.csv")), 4u);
}

TEST_F(Cli, TrainWritesThreeCheckpointsPerTask) {
  const auto r = cli("train --train " + corpus.string() + " --dev " + corpus.string() + " --out_dir " +
                     p("pt") + small + "--max_epochs 3 --stopping per_task");
  ASSERT_EQ(r.code, 0) << r.output;
  std::size_t ckpts = 0;
  for (const auto& e : fs::directory_iterator(dir / "pt")) ckpts += e.path().extension() == ".ckpt";
  EXPECT_EQ(ckpts, 3u);
  for (const char* name : {"model_A.ckpt", "model_B.ckpt", "model_C.ckpt"})
    EXPECT_TRUE(fs::exists(dir / "pt" / name)) << name;
}

TEST_F(Cli, SameSeedByteIdenticalReports) {
  const std::string common = "train --train " + corpus.string() + " --dev " + corpus.string() + small +
                             "--max_epochs 3 --seed 5 --out_dir ";
  ASSERT_EQ(cli(common + p("r1")).code, 0);
  ASSERT_EQ(cli(common + p("r2")).code, 0);
  EXPECT_EQ(cqa::read_file(dir / "r1" / "report.csv"), cqa::read_file(dir / "r2" / "report.csv"));
  EXPECT_EQ(cqa::read_file(dir / "r1" / "model.ckpt"), cqa::read_file(dir / "r2" / "model.ckpt"));
}

TEST_F(Cli, ConfigFileAndOverrides) {
  {
    std::ofstream cfg(dir / "run.cfg");
    cfg << "# tiny run\nmax_epochs = 2\nfeature_maps = 4\nword_dim = 6\nfeat_dim = 2\nseed = 9\n";
  }
  ASSERT_EQ(cli("train --config " + p("run.cfg") + " --train " + corpus.string() + " --dev " +
                corpus.string() + " --out_dir " + p("c1"))
                .code,
            0);
  EXPECT_EQ(line_count(cqa::read_file(dir / "c1" / "report.csv")), 3u);
  ASSERT_EQ(cli("train --config " + p("run.cfg") + " --max_epochs 1 --train " + corpus.string() +
                " --dev " + corpus.string() + " --out_dir " + p("c2"))
                .code,
            0);
  EXPECT_EQ(line_count(cqa::read_file(dir / "c2" / "report.csv")), 2u);

  {
    std::ofstream cfg(dir / "bad.cfg");
    cfg << "no_such_key = 1\n";
  }
  const auto bad = cli("train --config " + p("bad.cfg") + " --train " + corpus.string() + " --dev " +
                       corpus.string() + " --out_dir " + p("c3"));
  EXPECT_EQ(bad.code, 1) << bad.output;
}

TEST_F(Cli, EvaluateAlphaZeroFollowsGoogleRank) {
  ASSERT_EQ(cli("train --train " + corpus.string() + " --dev " + corpus.string() + " --out_dir " +
                p("m") + small + "--max_epochs 2")
                .code,
            0);
  const std::string eval = "evaluate --checkpoint " + p("m/model.ckpt") + " --data " + corpus.string() +
                           " --task C --alpha 0 --predictions ";
  const auto r = cli(eval + p("pred1.tsv"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("MAP="), std::string::npos);
  EXPECT_NE(r.output.find("MRR="), std::string::npos);
  EXPECT_NE(r.output.find("queries=2"), std::string::npos) << r.output;

  const auto triples = cqa::load_corpus(corpus);
  std::map<std::string, std::int64_t> rank_of;
  for (const auto& t : triples) rank_of[t.id] = t.google_rank;
  std::istringstream in(cqa::read_file(dir / "pred1.tsv"));
  std::string line, prev_group;
  std::int64_t prev_rank = 0;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    std::istringstream f(line);
    std::string group, doc, pos, score, label;
    f >> group >> doc >> pos >> score >> label;
    if (group != prev_group) prev_rank = 0;
    EXPECT_GE(rank_of.at(doc), prev_rank) << line;
    prev_rank = rank_of.at(doc);
    prev_group = group;
    ++rows;
  }
  EXPECT_EQ(rows, triples.size());

  ASSERT_EQ(cli(eval + p("pred2.tsv")).code, 0);
  EXPECT_EQ(cqa::read_file(dir / "pred1.tsv"), cqa::read_file(dir / "pred2.tsv"));
}

TEST_F(Cli, EvaluatePerfectModel) {
  // A single-query corpus the model can memorize.
  cqa::SyntheticConfig sc;
  sc.queries = 1;
  sc.related_per_query = 2;
  sc.comments_per_related = 3;
  sc.seed = 4;
  const auto data = cqa::synthetic_corpus(sc);
  cqa::save_corpus(dir / "tiny.jsonl", data);
  const auto r = cli("train --train " + p("tiny.jsonl") + " --dev " + p("tiny.jsonl") + " --out_dir " +
                     p("fit") + " --feature_maps 8 --word_dim 8 --feat_dim 3 --batch_size 6" +
                     " --dropout_input 0 --dropout_hidden 0 --learning_rate 0.005 --max_epochs 80" +
                     " --patience 80");
  ASSERT_EQ(r.code, 0) << r.output;
  const auto e = cli("evaluate --checkpoint " + p("fit/model.ckpt") + " --data " + p("tiny.jsonl") +
                     " --task C --predictions " + p("fit.tsv"));
  ASSERT_EQ(e.code, 0) << e.output;
  EXPECT_NE(e.output.find("MAP=100.00"), std::string::npos) << e.output;
}

TEST_F(Cli, PredictOmitsLabels) {
  ASSERT_EQ(cli("train --train " + corpus.string() + " --dev " + corpus.string() + " --out_dir " +
                p("m") + small + "--max_epochs 1")
                .code,
            0);
  const auto r = cli("predict --checkpoint " + p("m/model.ckpt") + " --data " + corpus.string() +
                     " --task A --predictions " + p("out.tsv"));
  ASSERT_EQ(r.code, 0) << r.output;
  std::istringstream in(cqa::read_file(dir / "out.tsv"));
  std::string line;
  while (std::getline(in, line)) EXPECT_EQ(std::count(line.begin(), line.end(), '\t'), 3) << line;
}

TEST_F(Cli, ErrorsMapToExitCodes) {
  const auto zero = cli("gradcheck --probes 0");
  EXPECT_EQ(zero.code, 1);
  EXPECT_NE(zero.output.find("probes must be ≥ 1"), std::string::npos) << zero.output;

  // A missing input path is a configuration error; unreadable content is a data error.
  EXPECT_EQ(cli("train --train " + p("missing.jsonl") + " --dev " + corpus.string() + " --out_dir " +
                p("x"))
                .code,
            1);
  {
    std::ofstream bad(dir / "bad.jsonl");
    bad << R"({"id": "x"})" << "\n";
  }
  const auto schema = cli("extend --input " + p("bad.jsonl") + " --output " + p("o.jsonl"));
  EXPECT_EQ(schema.code, 2);
  EXPECT_NE(schema.output.find("line 1"), std::string::npos) << schema.output;
  EXPECT_EQ(cli("train --tasks XYZ --train " + corpus.string() + " --dev " + corpus.string() +
                " --out_dir " + p("x"))
                .code,
            1);
  EXPECT_EQ(cli("no_such_command").code, 1);
}

TEST_F(Cli, GradcheckPassesAndNegativeControlFails) {
  const auto ok = cli("gradcheck --probes 50 --feature_maps 10");
  EXPECT_EQ(ok.code, 0) << ok.output;
  EXPECT_NE(ok.output.find("PASS"), std::string::npos);
  const auto bad = cli("gradcheck --corrupt_conv_grad 1.5");
  EXPECT_EQ(bad.code, 3) << bad.output;
  EXPECT_NE(bad.output.find("FAIL"), std::string::npos);
}

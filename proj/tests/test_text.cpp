#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "cqa/text.hpp"

using cqa::TokenizedText;
using cqa::Vocabulary;
using Tokens = std::vector<std::string>;

namespace {

TokenizedText text_of(Tokens tokens) {
  TokenizedText t;
  t.tokens = std::move(tokens);
  return t;
}

std::string join(const Tokens& tokens) {
  std::string s;
  for (const auto& t : tokens) {
    if (!s.empty()) s += ' ';
    s += t;
  }
  return s;
}

std::vector<std::uint8_t> overlaps(const TokenizedText& target,
                                   const std::vector<const TokenizedText*>& others) {
  return cqa::overlap_indicators(target, others);
}

}  // namespace

TEST(Preprocess, SubjectThenBodyWithPunctuationSplit) {
  const auto t = cqa::preprocess("Visa help?", "I need a visa.");
  EXPECT_EQ(t.tokens, (Tokens{"visa", "help", "?", "i", "need", "a", "visa", "."}));
}

TEST(Preprocess, TruncatesToMaxLen) {
  std::string body;
  for (int i = 0; i < 150; ++i) body += std::string(1, static_cast<char>('a' + i % 26)) + " ";
  EXPECT_EQ(cqa::preprocess(std::nullopt, body, 100).size(), 100u);
  EXPECT_EQ(cqa::preprocess(std::nullopt, body).size(), 100u);
}

TEST(Preprocess, EmptyInput) {
  EXPECT_TRUE(cqa::preprocess("", "").empty());
  EXPECT_TRUE(cqa::preprocess(std::nullopt, "   \t\n").empty());
}

TEST(Preprocess, LowercaseAndNoEmptyTokens) {
  const auto t = cqa::preprocess("HELLO, World!!", "  Qatar Airways (QR) ... ok  ");
  for (const auto& tok : t.tokens) {
    EXPECT_FALSE(tok.empty());
    EXPECT_TRUE(std::none_of(tok.begin(), tok.end(), [](char c) { return c >= 'A' && c <= 'Z'; }))
        << tok;
  }
  EXPECT_EQ(t.tokens.front(), "hello");
  EXPECT_NE(std::find(t.tokens.begin(), t.tokens.end(), "qatar"), t.tokens.end());
  EXPECT_NE(std::find(t.tokens.begin(), t.tokens.end(), "airways"), t.tokens.end());
}

TEST(Preprocess, Idempotent) {
  const std::vector<std::pair<std::string, std::string>> inputs = {
      {"Visa help?", "I need a visa."},
      {"", "\"Quoted\" (parens) end."},
      {"Mixed-Case URL", "see http://example.com/a?b=c, thanks!!"},
      {"...", "!?"},
      {"tabs\tand\nnewlines", "don't stop-believing"},
  };
  for (const auto& [subject, body] : inputs) {
    const auto once = cqa::preprocess(subject, body, 1000);
    const auto twice = cqa::preprocess(std::nullopt, join(once.tokens), 1000);
    EXPECT_EQ(once.tokens, twice.tokens) << subject << " | " << body;
  }
}

TEST(Preprocess, TruncationIsPrefix) {
  const std::string body = "One, two; three. Four five six? Seven (eight) nine ten!";
  const auto full = cqa::preprocess("Subject line", body, 1000);
  for (std::size_t m1 = 1; m1 < full.size(); ++m1) {
    for (std::size_t m2 = m1 + 1; m2 <= full.size() + 2; ++m2) {
      const auto a = cqa::preprocess("Subject line", body, m1);
      const auto b = cqa::preprocess("Subject line", body, m2);
      ASSERT_LE(a.size(), b.size());
      EXPECT_TRUE(std::equal(a.tokens.begin(), a.tokens.end(), b.tokens.begin()));
    }
  }
}

TEST(Vocabulary, ReservedIdsAndUnknown) {
  Vocabulary v;
  EXPECT_EQ(v.size(), 2u);
  EXPECT_EQ(v.token(Vocabulary::kPad), "<pad>");
  EXPECT_EQ(v.token(Vocabulary::kUnk), "<unk>");
  EXPECT_EQ(v.lookup("anything"), Vocabulary::kUnk);
}

TEST(Vocabulary, FrequencyOrder) {
  const std::vector<TokenizedText> corpus = {text_of({"a", "b"}), text_of({"a"})};
  const auto v = cqa::build_vocabulary(corpus, 1);
  ASSERT_EQ(v.size(), 4u);
  EXPECT_EQ(v.lookup("a"), 2);
  EXPECT_EQ(v.lookup("b"), 3);

  const auto v2 = cqa::build_vocabulary(corpus, 2);
  ASSERT_EQ(v2.size(), 3u);
  EXPECT_EQ(v2.lookup("a"), 2);
  EXPECT_EQ(v2.lookup("b"), Vocabulary::kUnk);
}

TEST(Vocabulary, TiesBrokenLexicographically) {
  const std::vector<TokenizedText> corpus = {text_of({"zeta", "alpha", "mid"})};
  const auto v = cqa::build_vocabulary(corpus);
  EXPECT_EQ(v.token(2), "alpha");
  EXPECT_EQ(v.token(3), "mid");
  EXPECT_EQ(v.token(4), "zeta");
}

TEST(Vocabulary, EmptyCorpus) {
  const auto v = cqa::build_vocabulary(std::span<const TokenizedText>{});
  EXPECT_EQ(v.size(), 2u);
}

TEST(Vocabulary, BijectiveAndIdsInRange) {
  std::mt19937_64 rng(3);
  std::vector<TokenizedText> corpus;
  for (int i = 0; i < 40; ++i) {
    Tokens toks;
    for (int j = 0; j < 12; ++j) toks.push_back("w" + std::to_string(rng() % 60));
    corpus.push_back(text_of(toks));
  }
  const auto v = cqa::build_vocabulary(corpus);
  for (std::int32_t id = 0; id < static_cast<std::int32_t>(v.size()); ++id)
    EXPECT_EQ(v.lookup(v.token(id)), id);
  for (auto t : corpus) {
    v.assign_ids(t);
    ASSERT_EQ(t.ids.size(), t.tokens.size());
    for (auto id : t.ids) {
      EXPECT_GE(id, 0);
      EXPECT_LT(static_cast<std::size_t>(id), v.size());
    }
  }
  auto unseen = text_of({"never", "seen"});
  v.assign_ids(unseen);
  EXPECT_EQ(unseen.ids, (std::vector<std::int32_t>{1, 1}));
}

TEST(Overlap, Examples) {
  const auto target = text_of({"a", "b", "c"});
  const auto other = text_of({"b", "z"});
  EXPECT_EQ(overlaps(target, {&other}), (std::vector<std::uint8_t>{0, 1, 0}));
  EXPECT_EQ(overlaps(target, {&target}), (std::vector<std::uint8_t>{1, 1, 1}));
  EXPECT_EQ(overlaps(target, {}), (std::vector<std::uint8_t>{0, 0, 0}));
}

TEST(Overlap, OrderAndDuplicateInvariant) {
  std::mt19937_64 rng(11);
  auto random_text = [&](std::size_t n) {
    Tokens toks;
    for (std::size_t i = 0; i < n; ++i) toks.push_back("t" + std::to_string(rng() % 15));
    return text_of(toks);
  };
  for (int trial = 0; trial < 50; ++trial) {
    const auto target = random_text(10);
    std::vector<TokenizedText> others;
    for (int k = 0; k < 4; ++k) others.push_back(random_text(4));
    std::vector<const TokenizedText*> ptrs;
    for (const auto& o : others) ptrs.push_back(&o);
    const auto base = overlaps(target, ptrs);
    ASSERT_EQ(base.size(), target.size());

    auto shuffled = ptrs;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    EXPECT_EQ(overlaps(target, shuffled), base);

    auto duplicated = ptrs;
    duplicated.push_back(ptrs[rng() % ptrs.size()]);
    duplicated.push_back(ptrs[0]);
    EXPECT_EQ(overlaps(target, duplicated), base);

    for (std::size_t j = 0; j < target.size(); ++j) {
      bool found = false;
      for (const auto& o : others)
        found |= std::find(o.tokens.begin(), o.tokens.end(), target.tokens[j]) != o.tokens.end();
      EXPECT_EQ(base[j], found ? 1 : 0);
    }
  }
}

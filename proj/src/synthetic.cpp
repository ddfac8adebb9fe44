#include "cqa/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

#include "cqa/error.hpp"
#include "cqa/ops.hpp"

namespace cqa {
namespace {

class TextMaker {
 public:
  TextMaker(const SyntheticConfig& config, std::mt19937_64& rng) : config_(config), rng_(rng) {}

  std::size_t pick(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }
  bool coin(double p) { return nn::uniform01(rng_) < p; }

  std::size_t other_topic(std::size_t topic) {
    const std::size_t k = pick(config_.topics - 1);
    return k >= topic ? k + 1 : k;
  }

  std::string sentence(std::size_t topic, std::size_t topic_words) {
    std::vector<std::string> words;
    for (std::size_t i = 0; i < topic_words; ++i)
      words.push_back("t" + std::to_string(topic) + "w" + std::to_string(pick(config_.words_per_topic)));
    for (std::size_t i = 0; i < config_.filler_mentions; ++i)
      words.push_back("f" + std::to_string(pick(config_.filler_words)));
    std::shuffle(words.begin(), words.end(), rng_);
    std::string s;
    for (const auto& w : words) {
      if (!s.empty()) s += ' ';
      s += w;
    }
    return s;
  }

 private:
  const SyntheticConfig& config_;
  std::mt19937_64& rng_;
};

}  // namespace

std::vector<Triple> synthetic_corpus(const SyntheticConfig& config) {
  if (config.topics < 2 || config.words_per_topic < 1 || config.filler_words < 1)
    throw ConfigError("synthetic corpus needs >= 2 topics and non-empty word lists");
  std::mt19937_64 rng(config.seed);
  TextMaker maker(config, rng);

  std::vector<Triple> out;
  for (std::size_t q = 0; q < config.queries; ++q) {
    const std::string qid = "q" + std::to_string(q);
    const std::size_t topic = maker.pick(config.topics);
    const std::string q_new_subject = maker.sentence(topic, 1);
    const std::string q_new_body = maker.sentence(topic, config.topic_mentions);

    struct Related {
      bool relevant;
      std::size_t topic;
      double order_key;
    };
    std::vector<Related> related;
    for (std::size_t r = 0; r < config.related_per_query; ++r) {
      const bool relevant = maker.coin(config.relevant_fraction);
      related.push_back({relevant, relevant ? topic : maker.other_topic(topic),
                         nn::uniform01(rng) + (relevant ? 0.0 : 0.6)});
    }
    std::vector<std::size_t> by_rank(related.size());
    std::iota(by_rank.begin(), by_rank.end(), std::size_t{0});
    std::stable_sort(by_rank.begin(), by_rank.end(), [&](std::size_t a, std::size_t b) {
      return related[a].order_key < related[b].order_key;
    });
    std::vector<std::int64_t> rank_of(related.size());
    for (std::size_t k = 0; k < by_rank.size(); ++k) rank_of[by_rank[k]] = static_cast<std::int64_t>(k + 1);

    for (std::size_t r = 0; r < related.size(); ++r) {
      const auto& rel = related[r];
      const std::string rid = qid + "_r" + std::to_string(r);
      const std::string rel_subject = maker.sentence(rel.topic, 1);
      const std::string rel_body = maker.sentence(rel.topic, config.topic_mentions);
      for (std::size_t c = 0; c < config.comments_per_related; ++c) {
        Triple t;
        t.id = rid + "_c" + std::to_string(c);
        t.group = qid;
        t.q_new_subject = q_new_subject;
        t.q_new_body = q_new_body;
        t.q_rel_subject = rel_subject;
        t.q_rel_body = rel_body;
        t.q_rel_id = rid;
        t.google_rank = rank_of[r];

        const bool good = maker.coin(config.good_fraction);
        if (good) {
          t.c_rel = maker.sentence(rel.topic, config.topic_mentions);
          t.label_A = CommentLabel::good;
        } else {
          t.c_rel = maker.sentence(maker.other_topic(rel.topic), config.topic_mentions);
          t.label_A = maker.coin(0.5) ? CommentLabel::bad : CommentLabel::potentially_useful;
        }
        t.label_B = rel.relevant ? (maker.coin(0.5) ? QuestionLabel::perfect_match : QuestionLabel::relevant)
                                 : QuestionLabel::irrelevant;
        if (good && rel.relevant)
          t.label_C = CommentLabel::good;
        else if (rel.relevant)
          t.label_C = t.label_A;
        else
          t.label_C = CommentLabel::bad;
        out.push_back(std::move(t));
      }
    }
  }
  return out;
}

}  // namespace cqa

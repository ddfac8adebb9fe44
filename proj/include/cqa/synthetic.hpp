#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cqa/dataset.hpp"

namespace cqa {

// Generator for small labeled corpora with the structure of the three tasks.
// Every question is about one topic and mentions some of its words. A related
// question is relevant (task B) iff it shares the new question's topic. A
// comment is good for its related question (task A) iff it talks about that
// question's topic, and good for the new question (task C) iff it is good
// for the related question and the related question is relevant.
// Relevant related questions tend to get better google ranks.
struct SyntheticConfig {
  std::size_t queries = 5;
  std::size_t related_per_query = 2;
  std::size_t comments_per_related = 5;
  std::size_t topics = 6;
  std::size_t words_per_topic = 5;
  std::size_t filler_words = 30;
  std::size_t topic_mentions = 3;  // topic words per text
  std::size_t filler_mentions = 4;
  double relevant_fraction = 0.5;
  double good_fraction = 0.5;
  std::uint64_t seed = 1;
};

std::vector<Triple> synthetic_corpus(const SyntheticConfig& config);

}  // namespace cqa

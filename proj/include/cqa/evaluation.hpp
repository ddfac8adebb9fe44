#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cqa/model.hpp"

namespace cqa {

struct Candidate {
  std::string group;
  std::string doc_id;
  double score = 0.0;
  std::int64_t google_rank = 1;
  std::uint8_t relevant = 0;
};

// Candidates of one query, best first: descending score, then ascending
// google rank, then doc id.
struct RankedList {
  std::string group;
  std::vector<Candidate> items;
};

struct EvalResult {
  double map = 0.0;  // percent
  double mrr = 0.0;  // percent
  std::vector<double> average_precisions;
  std::size_t queries = 0;
  std::size_t skipped = 0;  // queries without a relevant candidate
};

// Mean over relevant positions k of precision@k. Throws DataError when no
// entry is relevant.
double average_precision(std::span<const std::uint8_t> relevances);
// 1 / position of the first relevant entry. Throws DataError when none is.
double reciprocal_rank(std::span<const std::uint8_t> relevances);

// alpha * score + (1 - alpha) / google_rank
double weighted_combine(double model_score, std::int64_t google_rank, double alpha);

// Per-example scores from inference-mode forward passes.
template <typename T>
std::vector<std::array<double, 3>> score_examples(const Scorer<T>& model,
                                                  std::span<const Example> data);

// Turns per-example scores into candidates for one task. Task A queries are
// related questions and candidates are comments; task B queries are new
// questions and candidates are distinct related questions (scores averaged
// over that question's triples); task C queries are new questions and
// candidates are comments.
std::vector<Candidate> candidates_for_task(std::span<const Example> data,
                                           std::span<const std::array<double, 3>> scores,
                                           Task task);

template <typename T>
std::vector<Candidate> score_candidates(const Scorer<T>& model, std::span<const Example> data,
                                        Task task);

// Groups candidates by query (first-seen order) and sorts each list. With
// alpha, scores are replaced by weighted_combine(score, rank, alpha).
std::vector<RankedList> rank_candidates(std::span<const Candidate> candidates,
                                        std::optional<double> alpha = std::nullopt);

EvalResult evaluate_ranked(std::span<const RankedList> lists);

// Throws DataError on empty data.
template <typename T>
EvalResult evaluate(const Scorer<T>& model, std::span<const Example> data, Task task,
                    std::optional<double> alpha = std::nullopt);

struct AlphaChoice {
  double alpha = 1.0;
  double map = 0.0;
};

// Grid search over alpha = 0.00, 0.01, ..., 1.00 maximizing MAP; the
// smallest alpha wins ties.
AlphaChoice tune_alpha(std::span<const Candidate> dev_candidates);

template <typename T>
AlphaChoice tune_alpha(const Scorer<T>& model, std::span<const Example> dev_data, Task task);

// Tab-separated `group doc_id final_rank score [label]`, one line per
// candidate, ranks starting at 1.
std::string format_predictions(std::span<const RankedList> lists, bool with_labels = true);

}  // namespace cqa

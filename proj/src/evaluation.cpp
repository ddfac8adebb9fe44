#include "cqa/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <unordered_map>

#include "cqa/error.hpp"

namespace cqa {

double average_precision(std::span<const std::uint8_t> relevances) {
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t k = 0; k < relevances.size(); ++k) {
    if (!relevances[k]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  if (hits == 0) throw DataError("average_precision: no relevant item");
  return sum / static_cast<double>(hits);
}

double reciprocal_rank(std::span<const std::uint8_t> relevances) {
  for (std::size_t k = 0; k < relevances.size(); ++k)
    if (relevances[k]) return 1.0 / static_cast<double>(k + 1);
  throw DataError("reciprocal_rank: no relevant item");
}

double weighted_combine(double model_score, std::int64_t google_rank, double alpha) {
  if (google_rank < 1) throw DataError("google rank must be >= 1");
  return alpha * model_score + (1.0 - alpha) / static_cast<double>(google_rank);
}

template <typename T>
std::vector<std::array<double, 3>> score_examples(const Scorer<T>& model,
                                                  std::span<const Example> data) {
  std::vector<std::array<double, 3>> out;
  out.reserve(data.size());
  for (const auto& ex : data) {
    const auto s = model.score(ex);
    out.push_back({static_cast<double>(s[0]), static_cast<double>(s[1]), static_cast<double>(s[2])});
  }
  return out;
}

std::vector<Candidate> candidates_for_task(std::span<const Example> data,
                                           std::span<const std::array<double, 3>> scores,
                                           Task task) {
  if (scores.size() != data.size()) throw DimensionError("one score triple per example expected");
  const std::size_t k = index(task);
  std::vector<Candidate> out;
  if (task != Task::B) {
    out.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto& ex = data[i];
      out.push_back({task == Task::A ? ex.related_key : ex.group, ex.id, scores[i][k],
                     ex.google_rank, ex.labels[task]});
    }
    return out;
  }
  // Task B: one candidate per (new question, related question).
  std::map<std::pair<std::string, std::string>, std::size_t> slot;
  std::vector<std::size_t> counts;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& ex = data[i];
    auto [it, inserted] = slot.emplace(std::make_pair(ex.group, ex.related_key), out.size());
    if (inserted) {
      out.push_back({ex.group, ex.related_key, 0.0, ex.google_rank, ex.labels.yB});
      counts.push_back(0);
    }
    out[it->second].score += scores[i][k];
    ++counts[it->second];
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i].score /= static_cast<double>(counts[i]);
  return out;
}

template <typename T>
std::vector<Candidate> score_candidates(const Scorer<T>& model, std::span<const Example> data,
                                        Task task) {
  if (!model.tasks().contains(task))
    throw ConfigError(std::string("model does not score task ") + task_letter(task));
  const auto scores = score_examples(model, data);
  return candidates_for_task(data, scores, task);
}

std::vector<RankedList> rank_candidates(std::span<const Candidate> candidates,
                                        std::optional<double> alpha) {
  std::vector<RankedList> lists;
  std::unordered_map<std::string, std::size_t> where;
  for (const auto& c : candidates) {
    auto [it, inserted] = where.emplace(c.group, lists.size());
    if (inserted) lists.push_back({c.group, {}});
    auto& item = lists[it->second].items.emplace_back(c);
    if (alpha) item.score = weighted_combine(c.score, c.google_rank, *alpha);
    if (!std::isfinite(item.score)) throw NumericError("non-finite score for " + c.doc_id);
  }
  for (auto& list : lists) {
    std::stable_sort(list.items.begin(), list.items.end(), [](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.google_rank != b.google_rank) return a.google_rank < b.google_rank;
      return a.doc_id < b.doc_id;
    });
  }
  return lists;
}

EvalResult evaluate_ranked(std::span<const RankedList> lists) {
  EvalResult r;
  double rr_sum = 0.0;
  std::vector<std::uint8_t> rel;
  for (const auto& list : lists) {
    rel.clear();
    for (const auto& c : list.items) rel.push_back(c.relevant);
    if (std::find(rel.begin(), rel.end(), 1) == rel.end()) {
      ++r.skipped;
      continue;
    }
    r.average_precisions.push_back(average_precision(rel));
    rr_sum += reciprocal_rank(rel);
  }
  r.queries = r.average_precisions.size();
  if (r.queries > 0) {
    double ap_sum = 0.0;
    for (double ap : r.average_precisions) ap_sum += ap;
    r.map = 100.0 * ap_sum / static_cast<double>(r.queries);
    r.mrr = 100.0 * rr_sum / static_cast<double>(r.queries);
  }
  return r;
}

template <typename T>
EvalResult evaluate(const Scorer<T>& model, std::span<const Example> data, Task task,
                    std::optional<double> alpha) {
  if (data.empty()) throw DataError("evaluate: empty data");
  const auto candidates = score_candidates(model, data, task);
  const auto lists = rank_candidates(candidates, alpha);
  return evaluate_ranked(lists);
}

AlphaChoice tune_alpha(std::span<const Candidate> dev_candidates) {
  if (dev_candidates.empty()) throw DataError("tune_alpha: empty dev data");
  AlphaChoice best{0.0, -1.0};
  for (int step = 0; step <= 100; ++step) {
    const double alpha = step / 100.0;
    const auto lists = rank_candidates(dev_candidates, alpha);
    const double map = evaluate_ranked(lists).map;
    if (map > best.map) best = {alpha, map};
  }
  return best;
}

template <typename T>
AlphaChoice tune_alpha(const Scorer<T>& model, std::span<const Example> dev_data, Task task) {
  const auto candidates = score_candidates(model, dev_data, task);
  return tune_alpha(candidates);
}

std::string format_predictions(std::span<const RankedList> lists, bool with_labels) {
  std::string out;
  char buf[64];
  for (const auto& list : lists) {
    for (std::size_t k = 0; k < list.items.size(); ++k) {
      const auto& c = list.items[k];
      out += list.group;
      out += '\t';
      out += c.doc_id;
      out += '\t';
      out += std::to_string(k + 1);
      out += '\t';
      std::snprintf(buf, sizeof buf, "%.9g", c.score);
      out += buf;
      if (with_labels) {
        out += '\t';
        out += c.relevant ? '1' : '0';
      }
      out += '\n';
    }
  }
  return out;
}

template std::vector<std::array<double, 3>> score_examples(const Scorer<float>&, std::span<const Example>);
template std::vector<std::array<double, 3>> score_examples(const Scorer<double>&, std::span<const Example>);
template std::vector<Candidate> score_candidates(const Scorer<float>&, std::span<const Example>, Task);
template std::vector<Candidate> score_candidates(const Scorer<double>&, std::span<const Example>, Task);
template EvalResult evaluate(const Scorer<float>&, std::span<const Example>, Task, std::optional<double>);
template EvalResult evaluate(const Scorer<double>&, std::span<const Example>, Task, std::optional<double>);
template AlphaChoice tune_alpha(const Scorer<float>&, std::span<const Example>, Task);
template AlphaChoice tune_alpha(const Scorer<double>&, std::span<const Example>, Task);

}  // namespace cqa

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cqa {

enum class Task : std::uint8_t { A = 0, B = 1, C = 2 };
inline constexpr std::array<Task, 3> kAllTasks = {Task::A, Task::B, Task::C};

inline constexpr std::size_t index(Task t) { return static_cast<std::size_t>(t); }
char task_letter(Task t);
Task parse_task(std::string_view s);

// Set of tasks, used for loss masking and stopping bookkeeping.
class TaskSet {
 public:
  constexpr TaskSet() = default;
  constexpr TaskSet(std::initializer_list<Task> tasks) {
    for (Task t : tasks) bits_ |= bit(t);
  }
  static constexpr TaskSet all() { return {Task::A, Task::B, Task::C}; }
  // "ABC", "bc", "C", ...
  static TaskSet parse(std::string_view letters);

  constexpr bool contains(Task t) const { return (bits_ & bit(t)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::size_t count() const {
    return (bits_ & 1u) + ((bits_ >> 1) & 1u) + ((bits_ >> 2) & 1u);
  }
  std::vector<Task> tasks() const;
  std::string to_string() const;
  constexpr bool operator==(const TaskSet&) const = default;

 private:
  static constexpr std::uint8_t bit(Task t) { return static_cast<std::uint8_t>(1u << index(t)); }
  std::uint8_t bits_ = 0;
};

enum class CommentLabel : std::uint8_t { good, potentially_useful, bad };
enum class QuestionLabel : std::uint8_t { perfect_match, relevant, irrelevant };

std::string_view to_string(CommentLabel l);
std::string_view to_string(QuestionLabel l);
std::optional<CommentLabel> parse_comment_label(std::string_view s);
std::optional<QuestionLabel> parse_question_label(std::string_view s);

struct Triple {
  std::string id;
  std::string group;  // the new question's id; ranking query for tasks B and C
  std::optional<std::string> q_new_subject;
  std::string q_new_body;
  std::optional<std::string> q_rel_subject;
  std::string q_rel_body;
  std::string c_rel;
  std::int64_t google_rank = 1;
  CommentLabel label_A = CommentLabel::bad;
  QuestionLabel label_B = QuestionLabel::irrelevant;
  CommentLabel label_C = CommentLabel::bad;
  // Optional identifier of the related question. When absent, the related
  // question is identified by its text.
  std::optional<std::string> q_rel_id;

  // Ranking query for task A (the related question).
  std::string related_key() const;
};

struct BinaryLabels {
  std::uint8_t yA = 0;
  std::uint8_t yB = 0;
  std::uint8_t yC = 0;

  std::uint8_t operator[](Task t) const;
  bool operator==(const BinaryLabels&) const = default;
};

BinaryLabels binarize(const Triple& t);

enum class Labels { required, optional };

// Reads the JSONL corpus. Blank lines are ignored. Throws DataError naming
// the 1-based line number and the offending field. With Labels::optional,
// missing label fields default to bad / irrelevant / bad.
std::vector<Triple> load_corpus(const std::filesystem::path& path, Labels labels = Labels::required);
std::vector<Triple> parse_corpus(std::string_view jsonl, Labels labels = Labels::required);
std::string serialize_triple(const Triple& t);
// Atomic write (temp file + rename).
void save_corpus(const std::filesystem::path& path, std::span<const Triple> triples);

struct LabeledComment {
  std::string id;
  std::string text;
  CommentLabel label_A = CommentLabel::bad;
};

struct Thread {
  std::string question_id;
  std::optional<std::string> subject;
  std::string body;
  std::vector<LabeledComment> comments;
};

// Task A threads recovered from a corpus: one per distinct related
// question, each comment kept once, in first-seen order.
std::vector<Thread> threads_from_corpus(std::span<const Triple> corpus);

// One (q_rel, q_rel, c_rel) triple per comment, with a perfect question
// match and the task C label inherited from task A.
std::vector<Triple> extend_dataset(std::span<const Thread> threads);

// Seeded shuffle of [0, n) split into consecutive chunks of batch_size.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   std::uint64_t seed);

template <typename T>
std::vector<std::vector<T>> make_batches(std::span<const T> data, std::size_t batch_size,
                                         std::uint64_t seed) {
  std::vector<std::vector<T>> out;
  for (const auto& idx : make_batches(data.size(), batch_size, seed)) {
    auto& batch = out.emplace_back();
    batch.reserve(idx.size());
    for (std::size_t i : idx) batch.push_back(data[i]);
  }
  return out;
}

struct PositiveRates {
  double A = 0.0;
  double B = 0.0;
  double C = 0.0;
};

// Percentage of positive binarized labels per task.
PositiveRates positive_rates(std::span<const Triple> data);

}  // namespace cqa

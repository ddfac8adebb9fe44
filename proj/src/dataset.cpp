#include "cqa/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "cqa/error.hpp"
#include "cqa/io.hpp"

namespace cqa {

using json = nlohmann::json;

char task_letter(Task t) { return static_cast<char>('A' + index(t)); }

Task parse_task(std::string_view s) {
  if (s == "A" || s == "a") return Task::A;
  if (s == "B" || s == "b") return Task::B;
  if (s == "C" || s == "c") return Task::C;
  throw ConfigError("unknown task '" + std::string(s) + "' (expected A, B or C)");
}

TaskSet TaskSet::parse(std::string_view letters) {
  TaskSet set;
  for (char c : letters) {
    if (c == ',' || c == ' ') continue;
    const Task t = parse_task(std::string_view(&c, 1));
    set.bits_ |= bit(t);
  }
  if (set.empty()) throw ConfigError("task selection must not be empty");
  return set;
}

std::vector<Task> TaskSet::tasks() const {
  std::vector<Task> out;
  for (Task t : kAllTasks)
    if (contains(t)) out.push_back(t);
  return out;
}

std::string TaskSet::to_string() const {
  std::string s;
  for (Task t : tasks()) s += task_letter(t);
  return s;
}

std::string_view to_string(CommentLabel l) {
  switch (l) {
    case CommentLabel::good: return "good";
    case CommentLabel::potentially_useful: return "potentially_useful";
    case CommentLabel::bad: return "bad";
  }
  return "bad";
}

std::string_view to_string(QuestionLabel l) {
  switch (l) {
    case QuestionLabel::perfect_match: return "perfect_match";
    case QuestionLabel::relevant: return "relevant";
    case QuestionLabel::irrelevant: return "irrelevant";
  }
  return "irrelevant";
}

std::optional<CommentLabel> parse_comment_label(std::string_view s) {
  if (s == "good") return CommentLabel::good;
  if (s == "potentially_useful") return CommentLabel::potentially_useful;
  if (s == "bad") return CommentLabel::bad;
  return std::nullopt;
}

std::optional<QuestionLabel> parse_question_label(std::string_view s) {
  if (s == "perfect_match") return QuestionLabel::perfect_match;
  if (s == "relevant") return QuestionLabel::relevant;
  if (s == "irrelevant") return QuestionLabel::irrelevant;
  return std::nullopt;
}

std::string Triple::related_key() const {
  if (q_rel_id) return *q_rel_id;
  std::string text = q_rel_subject.value_or("");
  text += '\x1f';
  text += q_rel_body;
  char buf[24];
  std::snprintf(buf, sizeof buf, "rel:%016llx", static_cast<unsigned long long>(fnv1a64(text)));
  return buf;
}

std::uint8_t BinaryLabels::operator[](Task t) const {
  switch (t) {
    case Task::A: return yA;
    case Task::B: return yB;
    case Task::C: return yC;
  }
  return 0;
}

BinaryLabels binarize(const Triple& t) {
  BinaryLabels y;
  y.yA = t.label_A == CommentLabel::good ? 1 : 0;
  y.yB = (t.label_B == QuestionLabel::perfect_match || t.label_B == QuestionLabel::relevant) ? 1 : 0;
  y.yC = t.label_C == CommentLabel::good ? 1 : 0;
  return y;
}

namespace {

[[noreturn]] void fail(std::size_t line, std::string_view field, std::string_view what) {
  throw DataError("line " + std::to_string(line) + ": field '" + std::string(field) + "' " +
                  std::string(what));
}

const json& require(const json& obj, std::size_t line, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end()) fail(line, field, "is missing");
  return *it;
}

std::string get_string(const json& obj, std::size_t line, const char* field) {
  const json& v = require(obj, line, field);
  if (!v.is_string()) fail(line, field, "must be a string");
  return v.get<std::string>();
}

std::optional<std::string> get_nullable_string(const json& obj, std::size_t line,
                                               const char* field) {
  const json& v = require(obj, line, field);
  if (v.is_null()) return std::nullopt;
  if (!v.is_string()) fail(line, field, "must be a string or null");
  return v.get<std::string>();
}

CommentLabel get_comment_label(const json& obj, std::size_t line, const char* field) {
  const auto s = get_string(obj, line, field);
  auto label = parse_comment_label(s);
  if (!label) fail(line, field, "has unknown label \"" + s + "\"");
  return *label;
}

Triple parse_record(const json& obj, std::size_t line, Labels labels) {
  if (!obj.is_object()) throw DataError("line " + std::to_string(line) + ": not a JSON object");
  Triple t;
  t.id = get_string(obj, line, "id");
  t.group = get_string(obj, line, "group");
  t.q_new_subject = get_nullable_string(obj, line, "q_new_subject");
  t.q_new_body = get_string(obj, line, "q_new_body");
  t.q_rel_subject = get_nullable_string(obj, line, "q_rel_subject");
  t.q_rel_body = get_string(obj, line, "q_rel_body");
  t.c_rel = get_string(obj, line, "c_rel");

  const json& rank = require(obj, line, "google_rank");
  if (!rank.is_number_integer()) fail(line, "google_rank", "must be an integer");
  t.google_rank = rank.get<std::int64_t>();
  if (t.google_rank < 1) fail(line, "google_rank", "must be >= 1");

  auto present = [&](const char* field) {
    return labels == Labels::required || obj.contains(field);
  };
  if (present("label_A")) t.label_A = get_comment_label(obj, line, "label_A");
  if (present("label_B")) {
    const auto b = get_string(obj, line, "label_B");
    auto qb = parse_question_label(b);
    if (!qb) fail(line, "label_B", "has unknown label \"" + b + "\"");
    t.label_B = *qb;
  }
  if (present("label_C")) t.label_C = get_comment_label(obj, line, "label_C");

  if (auto it = obj.find("q_rel_id"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) fail(line, "q_rel_id", "must be a string or null");
    t.q_rel_id = it->get<std::string>();
  }
  return t;
}

}  // namespace

std::vector<Triple> parse_corpus(std::string_view jsonl, Labels labels) {
  std::vector<Triple> out;
  std::set<std::string> ids;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
    Triple t = parse_record(obj, line_no, labels);
    if (!ids.insert(t.id).second) fail(line_no, "id", "duplicates \"" + t.id + "\"");
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<Triple> load_corpus(const std::filesystem::path& path, Labels labels) {
  try {
    return parse_corpus(read_file(path), labels);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string serialize_triple(const Triple& t) {
  auto nullable = [](const std::optional<std::string>& s) -> json {
    return s ? json(*s) : json(nullptr);
  };
  json obj = {
      {"id", t.id},
      {"group", t.group},
      {"q_new_subject", nullable(t.q_new_subject)},
      {"q_new_body", t.q_new_body},
      {"q_rel_subject", nullable(t.q_rel_subject)},
      {"q_rel_body", t.q_rel_body},
      {"c_rel", t.c_rel},
      {"google_rank", t.google_rank},
      {"label_A", std::string(to_string(t.label_A))},
      {"label_B", std::string(to_string(t.label_B))},
      {"label_C", std::string(to_string(t.label_C))},
  };
  if (t.q_rel_id) obj["q_rel_id"] = *t.q_rel_id;
  return obj.dump();
}

void save_corpus(const std::filesystem::path& path, std::span<const Triple> triples) {
  std::string out;
  for (const auto& t : triples) {
    out += serialize_triple(t);
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::vector<Thread> threads_from_corpus(std::span<const Triple> corpus) {
  std::vector<Thread> threads;
  std::map<std::string, std::size_t> by_key;
  std::vector<std::set<std::string>> seen_comments;
  for (const auto& t : corpus) {
    const std::string key = t.related_key();
    auto [it, inserted] = by_key.emplace(key, threads.size());
    if (inserted) {
      threads.push_back({key, t.q_rel_subject, t.q_rel_body, {}});
      seen_comments.emplace_back();
    }
    const std::size_t k = it->second;
    if (seen_comments[k].insert(t.c_rel).second)
      threads[k].comments.push_back({t.id, t.c_rel, t.label_A});
  }
  return threads;
}

std::vector<Triple> extend_dataset(std::span<const Thread> threads) {
  std::vector<Triple> out;
  for (const auto& th : threads) {
    for (const auto& c : th.comments) {
      Triple t;
      t.id = "ed:" + c.id;
      t.group = th.question_id;
      t.q_new_subject = th.subject;
      t.q_new_body = th.body;
      t.q_rel_subject = th.subject;
      t.q_rel_body = th.body;
      t.q_rel_id = th.question_id;
      t.c_rel = c.text;
      t.google_rank = 1;
      t.label_A = c.label_A;
      t.label_B = QuestionLabel::perfect_match;
      t.label_C = c.label_A;
      out.push_back(std::move(t));
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   std::uint64_t seed) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Explicit Fisher-Yates: the permutation is a function of the seed alone.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return batches;
}

PositiveRates positive_rates(std::span<const Triple> data) {
  if (data.empty()) throw DataError("positive_rates: empty data");
  std::size_t a = 0, b = 0, c = 0;
  for (const auto& t : data) {
    const auto y = binarize(t);
    a += y.yA;
    b += y.yB;
    c += y.yC;
  }
  const double n = static_cast<double>(data.size());
  return {100.0 * static_cast<double>(a) / n, 100.0 * static_cast<double>(b) / n,
          100.0 * static_cast<double>(c) / n};
}

}  // namespace cqa

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cqa/dataset.hpp"
#include "cqa/ops.hpp"
#include "cqa/tensor.hpp"
#include "cqa/text.hpp"

namespace cqa {

using nn::NamedParameter;
using nn::Parameter;
using nn::Tensor;

struct ModelConfig {
  std::size_t vocab_size = 2;
  std::size_t word_dim = 50;
  std::size_t feat_dim = 5;
  std::size_t feature_maps = 100;  // sentence embedding size
  std::size_t conv_width = 5;
  std::size_t max_len = kDefaultMaxLen;  // tokens kept per text

  std::size_t input_dim() const { return word_dim + feat_dim; }
  bool operator==(const ModelConfig&) const = default;
};

inline constexpr std::size_t kRankBins = 5;

// Half-open bins [1,2) [2,5) [5,10) [10,25) [25,inf). Throws DataError for rank < 1.
std::size_t rank_bin(std::int64_t google_rank);

// A triple after preprocessing: ids assigned, overlap indicators of each text
// against the union of the other two, rank discretized.
struct Example {
  std::string id;
  std::string group;        // ranking query for tasks B and C
  std::string related_key;  // ranking query for task A, candidate id for task B
  TokenizedText q_new;
  TokenizedText q_rel;
  TokenizedText c_rel;
  std::int64_t google_rank = 1;
  std::size_t rank_bin = 0;
  BinaryLabels labels;
};

// Empty texts become a single <pad> token with overlap 0.
Example compute_triple_features(const Triple& triple, const Vocabulary& vocab,
                                std::size_t max_len = kDefaultMaxLen);
std::vector<Example> compute_features(std::span<const Triple> triples, const Vocabulary& vocab,
                                      std::size_t max_len = kDefaultMaxLen);

// Vocabulary over all three texts of every triple.
Vocabulary corpus_vocabulary(std::span<const Triple> triples, std::size_t min_count = 1,
                             std::size_t max_len = kDefaultMaxLen);

// Source of dropout masks for one forward pass. Training contexts draw fresh
// masks and record them; replay contexts hand back recorded masks in order,
// which freezes dropout for gradient checking.
template <typename T>
class Dropout {
 public:
  enum class Site { input, hidden };

  static Dropout inference() { return Dropout(); }
  static Dropout training(std::mt19937_64& rng, double input_rate, double hidden_rate);
  static Dropout replay(std::vector<std::vector<T>> masks);

  bool training() const { return mode_ != Mode::inference; }

  // Scales x in place; returns the mask (empty means identity).
  std::vector<T> apply(std::vector<T>& x, Site site);

  const std::vector<std::vector<T>>& history() const { return history_; }

 private:
  enum class Mode { inference, sample, replay };
  Dropout() = default;

  Mode mode_ = Mode::inference;
  std::mt19937_64* rng_ = nullptr;
  double input_rate_ = 0.0;
  double hidden_rate_ = 0.0;
  std::vector<std::vector<T>> history_;
  std::size_t cursor_ = 0;
};

// CNN sentence model: embedding lookup, wide convolution, 1-max pooling.
template <typename T>
class SentenceEncoder {
 public:
  struct Trace {
    std::vector<std::int32_t> ids;
    std::vector<std::uint8_t> overlaps;
    Tensor<T> input;
    nn::PoolResult<T> pooled;
    std::size_t length = 0;
  };

  explicit SentenceEncoder(const ModelConfig& config);

  std::vector<T> encode(std::span<const std::int32_t> ids, std::span<const std::uint8_t> overlaps,
                        Trace* trace = nullptr) const;
  void backward(const Trace& trace, std::span<const T> d_out);

  std::size_t output_dim() const { return filters.value.rows(); }
  std::size_t width() const { return width_; }

  template <typename Self, typename Fn>
  static void visit(Self& self, const std::string& prefix, Fn&& fn) {
    fn(prefix + ".words", self.words);
    fn(prefix + ".feats", self.feats);
    fn(prefix + ".filters", self.filters);
    fn(prefix + ".bias", self.bias);
  }

  Parameter<T> words;    // {|V|, d_w}
  Parameter<T> feats;    // {2, d_feat}
  Parameter<T> filters;  // {m, width * d}
  Parameter<T> bias;     // {m}

 private:
  std::size_t width_;
};

enum class ModelKind { mtl, pair };

struct ModelSpec {
  ModelKind kind = ModelKind::mtl;
  std::optional<Task> task;  // pair models only
  ModelConfig config;

  bool operator==(const ModelSpec&) const = default;
};

template <typename T>
struct ForwardTrace {
  std::array<T, 3> scores{};
  virtual ~ForwardTrace() = default;
  // Hash of every pooling argmax taken in this pass.
  virtual std::uint64_t branch_signature() const = 0;
};

// Common interface of the joint network and the single-task pair networks.
// Scores for tasks outside tasks() are NaN.
template <typename T>
class Scorer {
 public:
  using Scores = std::array<T, 3>;

  virtual ~Scorer() = default;

  virtual ModelSpec spec() const = 0;
  virtual TaskSet tasks() const = 0;
  virtual std::unique_ptr<ForwardTrace<T>> forward(const Example& ex, Dropout<T>& dropout) const = 0;
  // Accumulates parameter gradients for dL/dscore. Tasks with a zero entry
  // contribute nothing.
  virtual void backward(const ForwardTrace<T>& trace, const Scores& d_scores) = 0;
  virtual std::vector<NamedParameter<T>> parameters() = 0;
  virtual std::vector<std::pair<std::string, const Tensor<T>*>> values() const = 0;

  Scores score(const Example& ex) const;
  void zero_grad();
  // uniform(-0.05, 0.05) for weights and tables, zero biases.
  void initialize(std::mt19937_64& rng);
  // Word tables of every encoder; used to pre-load vectors.
  virtual std::vector<Parameter<T>*> word_tables() = 0;
};

template <typename T>
struct TaskHead {
  Parameter<T> hidden_weight;  // {H, H}
  Parameter<T> hidden_bias;    // {H}
  Parameter<T> out_weight;     // {1, H}
  Parameter<T> out_bias;       // {1}

  explicit TaskHead(std::size_t dim)
      : hidden_weight({dim, dim}), hidden_bias({dim}), out_weight({1, dim}), out_bias({1}) {}

  template <typename Self, typename Fn>
  static void visit(Self& self, const std::string& prefix, Fn&& fn) {
    fn(prefix + ".hidden.W", self.hidden_weight);
    fn(prefix + ".hidden.b", self.hidden_bias);
    fn(prefix + ".out.W", self.out_weight);
    fn(prefix + ".out.b", self.out_bias);
  }
};

// Joint network over <q_new, q_rel, c_rel>: one question encoder for both
// questions, one comment encoder, a rank-bin table, a shared tanh layer
// over the joint vector and three heads (tanh, then sigmoid).
template <typename T>
class MtlModel final : public Scorer<T> {
 public:
  explicit MtlModel(const ModelConfig& config);

  ModelSpec spec() const override { return {ModelKind::mtl, std::nullopt, config_}; }
  TaskSet tasks() const override { return TaskSet::all(); }
  std::unique_ptr<ForwardTrace<T>> forward(const Example& ex, Dropout<T>& dropout) const override;
  void backward(const ForwardTrace<T>& trace, const typename Scorer<T>::Scores& d_scores) override;
  std::vector<NamedParameter<T>> parameters() override;
  std::vector<std::pair<std::string, const Tensor<T>*>> values() const override;
  std::vector<Parameter<T>*> word_tables() override;

  std::size_t joint_dim() const { return 3 * config_.feature_maps + config_.feat_dim; }

  // The encoder applied to each input text.
  const SentenceEncoder<T>& encoder_for_q_new() const { return question_encoder; }
  const SentenceEncoder<T>& encoder_for_q_rel() const { return question_encoder; }
  const SentenceEncoder<T>& encoder_for_c_rel() const { return comment_encoder; }
  SentenceEncoder<T>& encoder_for_q_new() { return question_encoder; }
  SentenceEncoder<T>& encoder_for_q_rel() { return question_encoder; }
  SentenceEncoder<T>& encoder_for_c_rel() { return comment_encoder; }

  SentenceEncoder<T> question_encoder;
  SentenceEncoder<T> comment_encoder;
  Parameter<T> rank_table;     // {5, d_feat}
  Parameter<T> shared_weight;  // {H, H}
  Parameter<T> shared_bias;    // {H}
  std::array<TaskHead<T>, 3> heads;

 private:
  template <typename Self, typename Fn>
  static void visit(Self& self, Fn&& fn);

  ModelConfig config_;
};

// Single-task network over one text pair: A = <q_rel, c_rel>,
// B = <q_new, q_rel> (one shared encoder), C = <q_new, c_rel>. Tasks B and C
// also see the rank bin. Overlaps are computed between the two texts.
template <typename T>
class PairModel final : public Scorer<T> {
 public:
  PairModel(const ModelConfig& config, Task task);

  ModelSpec spec() const override { return {ModelKind::pair, task_, config_}; }
  TaskSet tasks() const override { return {task_}; }
  std::unique_ptr<ForwardTrace<T>> forward(const Example& ex, Dropout<T>& dropout) const override;
  void backward(const ForwardTrace<T>& trace, const typename Scorer<T>::Scores& d_scores) override;
  std::vector<NamedParameter<T>> parameters() override;
  std::vector<std::pair<std::string, const Tensor<T>*>> values() const override;
  std::vector<Parameter<T>*> word_tables() override;

  Task task() const { return task_; }
  bool uses_rank() const { return task_ != Task::A; }
  std::size_t joint_dim() const {
    return 2 * config_.feature_maps + (uses_rank() ? config_.feat_dim : 0);
  }

  SentenceEncoder<T> question_encoder;
  std::optional<SentenceEncoder<T>> comment_encoder;  // absent for task B
  std::optional<Parameter<T>> rank_table;             // absent for task A
  Parameter<T> hidden1_weight, hidden1_bias;
  Parameter<T> hidden2_weight, hidden2_bias;
  Parameter<T> out_weight, out_bias;

 private:
  template <typename Self, typename Fn>
  static void visit(Self& self, Fn&& fn);

  ModelConfig config_;
  Task task_;
};

template <typename T>
std::unique_ptr<Scorer<T>> make_model(const ModelSpec& spec);

// Loads `token v1 ... v_d` lines into every word table of the model. Tokens
// missing from the vocabulary are ignored; vocabulary entries missing from
// the file keep their values. Returns the number of rows loaded.
template <typename T>
std::size_t load_word_vectors(const std::filesystem::path& path, const Vocabulary& vocab,
                              Scorer<T>& model);

}  // namespace cqa

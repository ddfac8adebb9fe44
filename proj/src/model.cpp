#include "cqa/model.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "cqa/error.hpp"

namespace cqa {

std::size_t rank_bin(std::int64_t google_rank) {
  if (google_rank < 1) throw DataError("google rank must be >= 1, got " + std::to_string(google_rank));
  if (google_rank < 2) return 0;
  if (google_rank < 5) return 1;
  if (google_rank < 10) return 2;
  if (google_rank < 25) return 3;
  return 4;
}

namespace {

void pad_if_empty(TokenizedText& text) {
  if (!text.empty()) return;
  text.tokens = {std::string(Vocabulary::kPadToken)};
  text.ids = {Vocabulary::kPad};
  text.overlaps = {0};
}

std::vector<std::uint8_t> overlap_against(const TokenizedText& target, const TokenizedText& a,
                                          const TokenizedText& b) {
  const std::array<const TokenizedText*, 2> others{&a, &b};
  return overlap_indicators(target, others);
}

std::vector<std::uint8_t> overlap_against(const TokenizedText& target, const TokenizedText& other) {
  const std::array<const TokenizedText*, 1> others{&other};
  return overlap_indicators(target, others);
}

}  // namespace

Example compute_triple_features(const Triple& triple, const Vocabulary& vocab,
                                std::size_t max_len) {
  Example ex;
  ex.id = triple.id;
  ex.group = triple.group;
  ex.related_key = triple.related_key();
  ex.q_new = preprocess(triple.q_new_subject, triple.q_new_body, max_len);
  ex.q_rel = preprocess(triple.q_rel_subject, triple.q_rel_body, max_len);
  ex.c_rel = preprocess(std::nullopt, triple.c_rel, max_len);

  ex.q_new.overlaps = overlap_against(ex.q_new, ex.q_rel, ex.c_rel);
  ex.q_rel.overlaps = overlap_against(ex.q_rel, ex.q_new, ex.c_rel);
  ex.c_rel.overlaps = overlap_against(ex.c_rel, ex.q_new, ex.q_rel);
  for (TokenizedText* text : {&ex.q_new, &ex.q_rel, &ex.c_rel}) {
    vocab.assign_ids(*text);
    pad_if_empty(*text);
  }
  ex.google_rank = triple.google_rank;
  ex.rank_bin = rank_bin(triple.google_rank);
  ex.labels = binarize(triple);
  return ex;
}

std::vector<Example> compute_features(std::span<const Triple> triples, const Vocabulary& vocab,
                                      std::size_t max_len) {
  std::vector<Example> out;
  out.reserve(triples.size());
  for (const auto& t : triples) out.push_back(compute_triple_features(t, vocab, max_len));
  return out;
}

Vocabulary corpus_vocabulary(std::span<const Triple> triples, std::size_t min_count,
                             std::size_t max_len) {
  std::vector<TokenizedText> texts;
  texts.reserve(3 * triples.size());
  for (const auto& t : triples) {
    texts.push_back(preprocess(t.q_new_subject, t.q_new_body, max_len));
    texts.push_back(preprocess(t.q_rel_subject, t.q_rel_body, max_len));
    texts.push_back(preprocess(std::nullopt, t.c_rel, max_len));
  }
  return build_vocabulary(texts, min_count);
}

// ---------------------------------------------------------------------------
// Dropout

template <typename T>
Dropout<T> Dropout<T>::training(std::mt19937_64& rng, double input_rate, double hidden_rate) {
  for (double r : {input_rate, hidden_rate})
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("dropout rate must be in [0, 1)");
  Dropout d;
  d.mode_ = Mode::sample;
  d.rng_ = &rng;
  d.input_rate_ = input_rate;
  d.hidden_rate_ = hidden_rate;
  return d;
}

template <typename T>
Dropout<T> Dropout<T>::replay(std::vector<std::vector<T>> masks) {
  Dropout d;
  d.mode_ = Mode::replay;
  d.history_ = std::move(masks);
  return d;
}

template <typename T>
std::vector<T> Dropout<T>::apply(std::vector<T>& x, Site site) {
  std::vector<T> mask;
  switch (mode_) {
    case Mode::inference:
      return mask;
    case Mode::sample: {
      const double rate = site == Site::input ? input_rate_ : hidden_rate_;
      if (rate > 0.0) mask = nn::dropout_mask<T>(x.size(), rate, *rng_);
      history_.push_back(mask);
      break;
    }
    case Mode::replay:
      if (cursor_ >= history_.size()) throw ConfigError("dropout replay ran out of masks");
      mask = history_[cursor_++];
      if (!mask.empty() && mask.size() != x.size())
        throw DimensionError("dropout replay mask size mismatch");
      break;
  }
  for (std::size_t i = 0; i < mask.size(); ++i) x[i] *= mask[i];
  return mask;
}

namespace {

template <typename T>
void apply_mask(std::vector<T>& g, const std::vector<T>& mask) {
  for (std::size_t i = 0; i < mask.size(); ++i) g[i] *= mask[i];
}

template <typename T>
void add_into(std::vector<T>& acc, const std::vector<T>& v) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
}

}  // namespace

// ---------------------------------------------------------------------------
// SentenceEncoder

template <typename T>
SentenceEncoder<T>::SentenceEncoder(const ModelConfig& config)
    : words({config.vocab_size, config.word_dim}),
      feats({2, config.feat_dim}),
      filters({config.feature_maps, config.conv_width * config.input_dim()}),
      bias({config.feature_maps}),
      width_(config.conv_width) {
  if (config.conv_width < 1 || config.feature_maps < 1 || config.vocab_size < 2)
    throw ConfigError("encoder needs width >= 1, feature_maps >= 1 and a vocabulary");
}

template <typename T>
std::vector<T> SentenceEncoder<T>::encode(std::span<const std::int32_t> ids,
                                          std::span<const std::uint8_t> overlaps,
                                          Trace* trace) const {
  if (ids.empty()) throw DimensionError("encode: empty text (pad it first)");
  auto input = nn::embedding_lookup(words.value, feats.value, ids, overlaps);
  auto map = nn::conv1d_wide(input, filters.value, bias.value, width_);
  auto pooled = nn::kmax_pool(map);
  std::vector<T> out = pooled.values.storage();
  if (trace) {
    trace->ids.assign(ids.begin(), ids.end());
    trace->overlaps.assign(overlaps.begin(), overlaps.end());
    trace->length = map.cols();
    trace->input = std::move(input);
    trace->pooled = std::move(pooled);
  }
  return out;
}

template <typename T>
void SentenceEncoder<T>::backward(const Trace& trace, std::span<const T> d_out) {
  const auto d_map = nn::kmax_pool_backward(trace.pooled, d_out, trace.length);
  Tensor<T> d_input(trace.input.shape());
  nn::conv1d_wide_backward(trace.input, filters.value, width_, d_map, &d_input, filters.grad,
                           bias.grad);
  nn::embedding_lookup_backward(d_input, trace.ids, trace.overlaps, words.grad, feats.grad);
}

// ---------------------------------------------------------------------------
// Scorer

template <typename T>
typename Scorer<T>::Scores Scorer<T>::score(const Example& ex) const {
  auto dropout = Dropout<T>::inference();
  return forward(ex, dropout)->scores;
}

template <typename T>
void Scorer<T>::zero_grad() {
  for (auto& p : parameters()) p.param->zero_grad();
}

namespace {

bool is_bias(const std::string& name) {
  return name.ends_with(".b") || name.ends_with(".bias");
}

}  // namespace

template <typename T>
void Scorer<T>::initialize(std::mt19937_64& rng) {
  for (auto& p : parameters()) {
    auto& v = p.param->value;
    if (is_bias(p.name)) {
      v.fill(T{0});
      continue;
    }
    for (auto& x : v.values()) x = static_cast<T>(-0.05 + 0.1 * nn::uniform01(rng));
  }
}

// ---------------------------------------------------------------------------
// MtlModel

namespace {

template <typename T>
void hash_argmax(std::uint64_t& h, const typename SentenceEncoder<T>::Trace& t) {
  for (std::size_t a : t.pooled.argmax) {
    h ^= a + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
  }
  h ^= 0xFF51AFD7ED558CCDULL;
}

template <typename T>
struct MtlTrace final : ForwardTrace<T> {
  typename SentenceEncoder<T>::Trace q_new, q_rel, c_rel;
  std::size_t bin = 0;
  std::vector<T> joint_in, joint_mask;
  std::vector<T> shared, shared_in, shared_mask;
  std::array<std::vector<T>, 3> head_hidden, head_in, head_mask;

  std::uint64_t branch_signature() const override {
    std::uint64_t h = 0;
    hash_argmax<T>(h, q_new);
    hash_argmax<T>(h, q_rel);
    hash_argmax<T>(h, c_rel);
    return h;
  }
};

}  // namespace

template <typename T>
MtlModel<T>::MtlModel(const ModelConfig& config)
    : question_encoder(config),
      comment_encoder(config),
      rank_table({kRankBins, config.feat_dim}),
      shared_weight({3 * config.feature_maps + config.feat_dim,
                     3 * config.feature_maps + config.feat_dim}),
      shared_bias({3 * config.feature_maps + config.feat_dim}),
      heads{TaskHead<T>(3 * config.feature_maps + config.feat_dim),
            TaskHead<T>(3 * config.feature_maps + config.feat_dim),
            TaskHead<T>(3 * config.feature_maps + config.feat_dim)},
      config_(config) {}

template <typename T>
template <typename Self, typename Fn>
void MtlModel<T>::visit(Self& self, Fn&& fn) {
  SentenceEncoder<T>::visit(self.question_encoder, "q_enc", fn);
  SentenceEncoder<T>::visit(self.comment_encoder, "c_enc", fn);
  fn(std::string("rank"), self.rank_table);
  fn(std::string("shared.W"), self.shared_weight);
  fn(std::string("shared.b"), self.shared_bias);
  for (Task t : kAllTasks)
    TaskHead<T>::visit(self.heads[index(t)], std::string("head_") + task_letter(t), fn);
}

template <typename T>
std::vector<NamedParameter<T>> MtlModel<T>::parameters() {
  std::vector<NamedParameter<T>> out;
  visit(*this, [&](const std::string& name, Parameter<T>& p) { out.push_back({name, &p}); });
  return out;
}

template <typename T>
std::vector<std::pair<std::string, const Tensor<T>*>> MtlModel<T>::values() const {
  std::vector<std::pair<std::string, const Tensor<T>*>> out;
  visit(*this, [&](const std::string& name, const Parameter<T>& p) { out.emplace_back(name, &p.value); });
  return out;
}

template <typename T>
std::vector<Parameter<T>*> MtlModel<T>::word_tables() {
  return {&question_encoder.words, &comment_encoder.words};
}

template <typename T>
std::unique_ptr<ForwardTrace<T>> MtlModel<T>::forward(const Example& ex, Dropout<T>& dropout) const {
  using Site = typename Dropout<T>::Site;
  auto tr = std::make_unique<MtlTrace<T>>();
  if (ex.rank_bin >= kRankBins) throw DimensionError("rank bin out of range");

  const auto x_new = question_encoder.encode(ex.q_new.ids, ex.q_new.overlaps, &tr->q_new);
  const auto x_rel = question_encoder.encode(ex.q_rel.ids, ex.q_rel.overlaps, &tr->q_rel);
  const auto x_com = comment_encoder.encode(ex.c_rel.ids, ex.c_rel.overlaps, &tr->c_rel);
  tr->bin = ex.rank_bin;

  std::vector<T> joint;
  joint.reserve(joint_dim());
  joint.insert(joint.end(), x_new.begin(), x_new.end());
  joint.insert(joint.end(), x_rel.begin(), x_rel.end());
  joint.insert(joint.end(), x_com.begin(), x_com.end());
  const auto rank_row = rank_table.value.row(ex.rank_bin);
  joint.insert(joint.end(), rank_row.begin(), rank_row.end());
  tr->joint_mask = dropout.apply(joint, Site::input);
  tr->joint_in = std::move(joint);

  tr->shared = nn::dense<T>(tr->joint_in, shared_weight.value, shared_bias.value, nn::Activation::tanh);
  tr->shared_in = tr->shared;
  tr->shared_mask = dropout.apply(tr->shared_in, Site::hidden);

  for (Task t : kAllTasks) {
    const auto k = index(t);
    const auto& head = heads[k];
    tr->head_hidden[k] = nn::dense<T>(tr->shared_in, head.hidden_weight.value,
                                      head.hidden_bias.value, nn::Activation::tanh);
    tr->head_in[k] = tr->head_hidden[k];
    tr->head_mask[k] = dropout.apply(tr->head_in[k], Site::hidden);
    tr->scores[k] = nn::dense<T>(tr->head_in[k], head.out_weight.value, head.out_bias.value,
                                 nn::Activation::sigmoid)[0];
  }
  return tr;
}

template <typename T>
void MtlModel<T>::backward(const ForwardTrace<T>& trace, const typename Scorer<T>::Scores& d_scores) {
  const auto& tr = dynamic_cast<const MtlTrace<T>&>(trace);
  const std::size_t dim = joint_dim();
  std::vector<T> d_shared(dim, T{0});
  bool any = false;
  for (Task t : kAllTasks) {
    const auto k = index(t);
    if (d_scores[k] == T{0}) continue;
    any = true;
    auto& head = heads[k];
    const std::array<T, 1> p{tr.scores[k]};
    const std::array<T, 1> dp{d_scores[k]};
    auto d_head = nn::dense_backward<T>(tr.head_in[k], head.out_weight.value, p,
                                        nn::Activation::sigmoid, dp, head.out_weight.grad,
                                        head.out_bias.grad);
    apply_mask(d_head, tr.head_mask[k]);
    add_into(d_shared, nn::dense_backward<T>(tr.shared_in, head.hidden_weight.value,
                                             tr.head_hidden[k], nn::Activation::tanh, d_head,
                                             head.hidden_weight.grad, head.hidden_bias.grad));
  }
  if (!any) return;
  apply_mask(d_shared, tr.shared_mask);
  auto d_joint = nn::dense_backward<T>(tr.joint_in, shared_weight.value, tr.shared,
                                       nn::Activation::tanh, d_shared, shared_weight.grad,
                                       shared_bias.grad);
  apply_mask(d_joint, tr.joint_mask);

  const std::size_t m = config_.feature_maps;
  const std::span<const T> dj(d_joint);
  question_encoder.backward(tr.q_new, dj.subspan(0, m));
  question_encoder.backward(tr.q_rel, dj.subspan(m, m));
  comment_encoder.backward(tr.c_rel, dj.subspan(2 * m, m));
  auto rank_grad = rank_table.grad.row(tr.bin);
  for (std::size_t i = 0; i < config_.feat_dim; ++i) rank_grad[i] += dj[3 * m + i];
}

// ---------------------------------------------------------------------------
// PairModel

namespace {

template <typename T>
struct PairTrace final : ForwardTrace<T> {
  typename SentenceEncoder<T>::Trace first, second;
  std::size_t bin = 0;
  std::vector<T> joint_in, joint_mask;
  std::vector<T> h1, h1_in, h1_mask;
  std::vector<T> h2, h2_in, h2_mask;

  std::uint64_t branch_signature() const override {
    std::uint64_t h = 0;
    hash_argmax<T>(h, first);
    hash_argmax<T>(h, second);
    return h;
  }
};

}  // namespace

template <typename T>
PairModel<T>::PairModel(const ModelConfig& config, Task task)
    : question_encoder(config), config_(config), task_(task) {
  if (task != Task::B) comment_encoder.emplace(config);
  if (task != Task::A) rank_table.emplace(nn::Shape{kRankBins, config.feat_dim});
  const std::size_t dim = joint_dim();
  hidden1_weight = Parameter<T>({dim, dim});
  hidden1_bias = Parameter<T>({dim});
  hidden2_weight = Parameter<T>({dim, dim});
  hidden2_bias = Parameter<T>({dim});
  out_weight = Parameter<T>({1, dim});
  out_bias = Parameter<T>({1});
}

template <typename T>
template <typename Self, typename Fn>
void PairModel<T>::visit(Self& self, Fn&& fn) {
  SentenceEncoder<T>::visit(self.question_encoder, "q_enc", fn);
  if (self.comment_encoder) SentenceEncoder<T>::visit(*self.comment_encoder, "c_enc", fn);
  if (self.rank_table) fn(std::string("rank"), *self.rank_table);
  fn(std::string("hidden1.W"), self.hidden1_weight);
  fn(std::string("hidden1.b"), self.hidden1_bias);
  fn(std::string("hidden2.W"), self.hidden2_weight);
  fn(std::string("hidden2.b"), self.hidden2_bias);
  fn(std::string("out.W"), self.out_weight);
  fn(std::string("out.b"), self.out_bias);
}

template <typename T>
std::vector<NamedParameter<T>> PairModel<T>::parameters() {
  std::vector<NamedParameter<T>> out;
  visit(*this, [&](const std::string& name, Parameter<T>& p) { out.push_back({name, &p}); });
  return out;
}

template <typename T>
std::vector<std::pair<std::string, const Tensor<T>*>> PairModel<T>::values() const {
  std::vector<std::pair<std::string, const Tensor<T>*>> out;
  visit(*this, [&](const std::string& name, const Parameter<T>& p) { out.emplace_back(name, &p.value); });
  return out;
}

template <typename T>
std::vector<Parameter<T>*> PairModel<T>::word_tables() {
  std::vector<Parameter<T>*> out{&question_encoder.words};
  if (comment_encoder) out.push_back(&comment_encoder->words);
  return out;
}

template <typename T>
std::unique_ptr<ForwardTrace<T>> PairModel<T>::forward(const Example& ex, Dropout<T>& dropout) const {
  using Site = typename Dropout<T>::Site;
  auto tr = std::make_unique<PairTrace<T>>();

  const TokenizedText* first = &ex.q_rel;
  const TokenizedText* second = &ex.c_rel;
  if (task_ == Task::B) {
    first = &ex.q_new;
    second = &ex.q_rel;
  } else if (task_ == Task::C) {
    first = &ex.q_new;
  }
  const SentenceEncoder<T>& second_encoder = comment_encoder ? *comment_encoder : question_encoder;

  const auto ov_first = overlap_against(*first, *second);
  const auto ov_second = overlap_against(*second, *first);
  const auto x1 = question_encoder.encode(first->ids, ov_first, &tr->first);
  const auto x2 = second_encoder.encode(second->ids, ov_second, &tr->second);

  std::vector<T> joint;
  joint.reserve(joint_dim());
  joint.insert(joint.end(), x1.begin(), x1.end());
  joint.insert(joint.end(), x2.begin(), x2.end());
  if (rank_table) {
    if (ex.rank_bin >= kRankBins) throw DimensionError("rank bin out of range");
    tr->bin = ex.rank_bin;
    const auto row = rank_table->value.row(ex.rank_bin);
    joint.insert(joint.end(), row.begin(), row.end());
  }
  tr->joint_mask = dropout.apply(joint, Site::input);
  tr->joint_in = std::move(joint);

  tr->h1 = nn::dense<T>(tr->joint_in, hidden1_weight.value, hidden1_bias.value, nn::Activation::tanh);
  tr->h1_in = tr->h1;
  tr->h1_mask = dropout.apply(tr->h1_in, Site::hidden);
  tr->h2 = nn::dense<T>(tr->h1_in, hidden2_weight.value, hidden2_bias.value, nn::Activation::tanh);
  tr->h2_in = tr->h2;
  tr->h2_mask = dropout.apply(tr->h2_in, Site::hidden);

  tr->scores.fill(std::numeric_limits<T>::quiet_NaN());
  tr->scores[index(task_)] =
      nn::dense<T>(tr->h2_in, out_weight.value, out_bias.value, nn::Activation::sigmoid)[0];
  return tr;
}

template <typename T>
void PairModel<T>::backward(const ForwardTrace<T>& trace, const typename Scorer<T>::Scores& d_scores) {
  const auto& tr = dynamic_cast<const PairTrace<T>&>(trace);
  const T d = d_scores[index(task_)];
  if (d == T{0}) return;
  const std::array<T, 1> p{tr.scores[index(task_)]};
  const std::array<T, 1> dp{d};
  auto d_h2 = nn::dense_backward<T>(tr.h2_in, out_weight.value, p, nn::Activation::sigmoid, dp,
                                    out_weight.grad, out_bias.grad);
  apply_mask(d_h2, tr.h2_mask);
  auto d_h1 = nn::dense_backward<T>(tr.h1_in, hidden2_weight.value, tr.h2, nn::Activation::tanh,
                                    d_h2, hidden2_weight.grad, hidden2_bias.grad);
  apply_mask(d_h1, tr.h1_mask);
  auto d_joint = nn::dense_backward<T>(tr.joint_in, hidden1_weight.value, tr.h1,
                                       nn::Activation::tanh, d_h1, hidden1_weight.grad,
                                       hidden1_bias.grad);
  apply_mask(d_joint, tr.joint_mask);

  const std::size_t m = config_.feature_maps;
  const std::span<const T> dj(d_joint);
  question_encoder.backward(tr.first, dj.subspan(0, m));
  SentenceEncoder<T>& second_encoder = comment_encoder ? *comment_encoder : question_encoder;
  second_encoder.backward(tr.second, dj.subspan(m, m));
  if (rank_table) {
    auto g = rank_table->grad.row(tr.bin);
    for (std::size_t i = 0; i < config_.feat_dim; ++i) g[i] += dj[2 * m + i];
  }
}

// ---------------------------------------------------------------------------

template <typename T>
std::unique_ptr<Scorer<T>> make_model(const ModelSpec& spec) {
  if (spec.kind == ModelKind::mtl) return std::make_unique<MtlModel<T>>(spec.config);
  if (!spec.task) throw ConfigError("pair model needs a task");
  return std::make_unique<PairModel<T>>(spec.config, *spec.task);
}

template <typename T>
std::size_t load_word_vectors(const std::filesystem::path& path, const Vocabulary& vocab,
                              Scorer<T>& model) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open word vectors " + path.string());
  const auto tables = model.word_tables();
  const std::size_t dim = tables.front()->value.cols();

  std::size_t loaded = 0;
  std::size_t line_no = 0;
  std::string line;
  std::vector<T> row;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    row.clear();
    std::string field;
    while (fields >> field) {
      double v = 0.0;
      const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
      if (res.ec != std::errc() || res.ptr != field.data() + field.size())
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + field + "'");
      row.push_back(static_cast<T>(v));
    }
    // word2vec text files may start with a "<count> <dim>" header
    if (line_no == 1 && row.size() == 1 && token.find_first_not_of("0123456789") == std::string::npos)
      continue;
    if (row.size() != dim)
      throw DimensionError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                           std::to_string(dim) + " values, got " + std::to_string(row.size()));
    const auto id = vocab.find(token);
    if (!id) continue;
    for (auto* table : tables) {
      auto dst = table->value.row(static_cast<std::size_t>(*id));
      std::copy(row.begin(), row.end(), dst.begin());
    }
    ++loaded;
  }
  return loaded;
}

template class Dropout<float>;
template class Dropout<double>;
template class SentenceEncoder<float>;
template class SentenceEncoder<double>;
template class Scorer<float>;
template class Scorer<double>;
template class MtlModel<float>;
template class MtlModel<double>;
template class PairModel<float>;
template class PairModel<double>;
template std::unique_ptr<Scorer<float>> make_model<float>(const ModelSpec&);
template std::unique_ptr<Scorer<double>> make_model<double>(const ModelSpec&);
template std::size_t load_word_vectors(const std::filesystem::path&, const Vocabulary&, Scorer<float>&);
template std::size_t load_word_vectors(const std::filesystem::path&, const Vocabulary&, Scorer<double>&);

}  // namespace cqa

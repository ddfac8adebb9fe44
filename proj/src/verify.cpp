#include "cqa/verify.hpp"

#include <random>

#include "cqa/error.hpp"
#include "cqa/synthetic.hpp"
#include "cqa/training.hpp"

namespace cqa {

nn::GradCheckResult check_model_gradients(const GradientCheckOptions& options) {
  if (options.probes < 1) throw ConfigError("probes must be ≥ 1");
  if (options.triples < 1) throw ConfigError("triples must be >= 1");

  SyntheticConfig sc;
  sc.queries = 1;
  sc.related_per_query = options.triples;
  sc.comments_per_related = 1;
  sc.seed = options.seed;
  const auto corpus = synthetic_corpus(sc);
  const auto vocab = corpus_vocabulary(corpus, 1, options.model.max_len);
  const auto examples = compute_features(corpus, vocab, options.model.max_len);

  ModelSpec spec;
  spec.config = options.model;
  spec.config.vocab_size = vocab.size();
  if (options.pair_task) {
    spec.kind = ModelKind::pair;
    spec.task = options.pair_task;
  }
  auto model = make_model<double>(spec);
  std::mt19937_64 rng(options.seed);
  model->initialize(rng);
  const auto tasks = model->tasks().tasks();

  std::vector<std::vector<std::vector<double>>> masks(examples.size());
  if (options.frozen_dropout) {
    for (std::size_t i = 0; i < examples.size(); ++i) {
      auto dropout = Dropout<double>::training(rng, options.dropout_input, options.dropout_hidden);
      model->forward(examples[i], dropout);
      masks[i] = dropout.history();
    }
  }
  auto context = [&](std::size_t i) {
    return options.frozen_dropout ? Dropout<double>::replay(masks[i]) : Dropout<double>::inference();
  };

  model->zero_grad();
  for (std::size_t i = 0; i < examples.size(); ++i) {
    auto dropout = context(i);
    const auto trace = model->forward(examples[i], dropout);
    Scorer<double>::Scores d{};
    for (Task t : tasks) d[index(t)] = nn::bce_grad(trace->scores[index(t)], examples[i].labels[t]);
    model->backward(*trace, d);
  }
  auto params = model->parameters();
  if (options.corrupt_conv_grad != 1.0)
    for (auto& p : params)
      if (p.name.ends_with(".filters"))
        for (auto& g : p.param->grad.values()) g *= options.corrupt_conv_grad;

  const TaskSet active = model->tasks();
  const std::function<nn::LossPoint()> loss = [&]() {
    nn::LossPoint point;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      auto dropout = context(i);
      const auto trace = model->forward(examples[i], dropout);
      const auto& s = trace->scores;
      point.loss += joint_loss({s[0], s[1], s[2]}, examples[i].labels, active);
      point.branch = point.branch * 0x100000001B3ULL ^ trace->branch_signature();
    }
    return point;
  };
  return nn::grad_check(loss, params, options.probes, options.seed + 1, options.delta);
}

}  // namespace cqa

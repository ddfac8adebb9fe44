#include "cqa/training.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "cqa/checkpoint.hpp"
#include "cqa/dataset.hpp"
#include "cqa/error.hpp"
#include "cqa/evaluation.hpp"

namespace cqa {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

StoppingMode parse_stopping_mode(std::string_view s) {
  if (s == "global") return StoppingMode::global;
  if (s == "per_task") return StoppingMode::per_task;
  throw ConfigError("unknown stopping mode '" + std::string(s) + "' (expected global or per_task)");
}

std::string_view to_string(StoppingMode m) {
  return m == StoppingMode::global ? "global" : "per_task";
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (active_tasks.empty()) throw ConfigError("active_tasks must not be empty");
  for (double r : {dropout_input, dropout_hidden})
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("dropout rates must be in [0, 1)");
  if (!(rmsprop.decay >= 0.0 && rmsprop.decay < 1.0)) throw ConfigError("rmsprop decay must be in [0, 1)");
  if (!(rmsprop.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(rmsprop.epsilon > 0.0)) throw ConfigError("rmsprop epsilon must be positive");
}

double joint_loss(const std::array<double, 3>& predictions, const BinaryLabels& labels,
                  TaskSet active) {
  double sum = 0.0;
  for (Task t : active.tasks()) sum += nn::bce_loss(predictions[index(t)], labels[t]);
  return sum;
}

EarlyStopping::EarlyStopping(StoppingMode mode, TaskSet active, std::size_t patience)
    : mode_(mode), active_(active), patience_(patience), best_loss_(kInf) {
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (active.empty()) throw ConfigError("active_tasks must not be empty");
  task_best_loss_.fill(kInf);
}

EarlyStopping::Update EarlyStopping::observe(std::size_t epoch,
                                             const std::array<double, 3>& task_losses) {
  epoch_ = epoch;
  Update u;
  double total = 0.0;
  for (Task t : active_.tasks()) {
    const double loss = task_losses[index(t)];
    total += loss;
    if (loss < task_best_loss_[index(t)]) {
      task_best_loss_[index(t)] = loss;
      task_best_epoch_[index(t)] = epoch;
      u.task_improved[index(t)] = true;
    }
  }
  if (total < best_loss_) {
    best_loss_ = total;
    best_epoch_ = epoch;
    u.global_improved = true;
  }
  return u;
}

bool EarlyStopping::should_stop() const {
  if (mode_ == StoppingMode::global) return epoch_ >= best_epoch_ + patience_;
  for (Task t : active_.tasks())
    if (epoch_ < task_best_epoch_[index(t)] + patience_) return false;
  return true;
}

std::string TrainReport::to_csv() const {
  std::string out = "epoch,loss_train,loss_dev,lossA_dev,lossB_dev,lossC_dev,mapA_dev,mapB_dev,mapC_dev\n";
  char buf[64];
  auto field = [&](double v) {
    out += ',';
    if (std::isnan(v)) return;
    std::snprintf(buf, sizeof buf, "%.9g", v);
    out += buf;
  };
  for (const auto& r : epochs) {
    out += std::to_string(r.epoch);
    field(r.loss_train);
    field(r.loss_dev);
    for (double v : r.task_loss_dev) field(v);
    for (double v : r.map_dev) field(v);
    out += '\n';
  }
  return out;
}

template <typename T>
EpochRecord evaluate_dev(const Scorer<T>& model, std::span<const Example> dev, TaskSet active) {
  if (dev.empty()) throw DataError("dev data must not be empty");
  EpochRecord r;
  r.task_loss_dev.fill(kNaN);
  r.map_dev.fill(kNaN);
  const auto scores = score_examples(model, dev);
  const TaskSet scored = model.tasks();
  for (Task t : scored.tasks()) {
    double sum = 0.0;
    for (std::size_t i = 0; i < dev.size(); ++i)
      sum += nn::bce_loss(scores[i][index(t)], dev[i].labels[t]);
    r.task_loss_dev[index(t)] = sum / static_cast<double>(dev.size());
    const auto lists = rank_candidates(candidates_for_task(dev, scores, t));
    const auto eval = evaluate_ranked(lists);
    if (eval.queries > 0) r.map_dev[index(t)] = eval.map;
  }
  r.loss_dev = 0.0;
  for (Task t : active.tasks()) r.loss_dev += r.task_loss_dev[index(t)];
  return r;
}

template <typename T>
TrainResult train(Scorer<T>& model, const Vocabulary& vocab, std::span<const Example> train_data,
                  std::span<const Example> dev_data, const TrainConfig& config,
                  const TrainHooks<T>& hooks) {
  config.validate();
  for (Task t : config.active_tasks.tasks())
    if (!model.tasks().contains(t))
      throw ConfigError(std::string("model cannot be trained on task ") + task_letter(t));
  if (train_data.empty()) throw DataError("training data must not be empty");
  if (dev_data.empty()) throw DataError("dev data must not be empty");

  auto params = model.parameters();
  nn::RmsProp<T> optimizer(params, config.rmsprop);
  EarlyStopping stopper(config.stopping, config.active_tasks, config.patience);
  std::mt19937_64 dropout_rng(config.seed);
  const auto active = config.active_tasks.tasks();

  TrainResult result;
  std::array<std::optional<Snapshot>, 3> task_snapshots;
  std::optional<Snapshot> best;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto batches =
        make_batches(train_data.size(), config.batch_size, config.seed + 0x9E3779B97F4A7C15ULL * epoch);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      model.zero_grad();
      for (std::size_t i : batches[b]) {
        const Example& ex = train_data[i];
        auto dropout = Dropout<T>::training(dropout_rng, config.dropout_input, config.dropout_hidden);
        const auto trace = model.forward(ex, dropout);
        typename Scorer<T>::Scores d_scores{};
        double loss = 0.0;
        for (Task t : active) {
          const double p = static_cast<double>(trace->scores[index(t)]);
          loss += nn::bce_loss(p, ex.labels[t]);
          d_scores[index(t)] = static_cast<T>(nn::bce_grad(p, ex.labels[t]));
        }
        if (!std::isfinite(loss))
          throw NumericError("non-finite training loss in epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(b + 1) + " (example " + ex.id + ")");
        loss_sum += loss;
        model.backward(*trace, d_scores);
      }
      const T scale = T{1} / static_cast<T>(batches[b].size());
      for (auto& p : params) {
        for (auto& g : p.param->grad.values()) g *= scale;
        if (!p.param->grad.all_finite())
          throw NumericError("non-finite gradient for " + p.name + " in epoch " +
                             std::to_string(epoch) + ", batch " + std::to_string(b + 1));
      }
      optimizer.step();
    }

    EpochRecord record;
    if (hooks.dev_losses) {
      record.task_loss_dev = hooks.dev_losses(epoch);
      record.map_dev.fill(kNaN);
      record.loss_dev = 0.0;
      for (Task t : active) record.loss_dev += record.task_loss_dev[index(t)];
    } else {
      record = evaluate_dev(model, dev_data, config.active_tasks);
    }
    record.epoch = epoch;
    record.loss_train = loss_sum / static_cast<double>(train_data.size());
    if (!std::isfinite(record.loss_dev))
      throw NumericError("non-finite dev loss in epoch " + std::to_string(epoch));
    result.report.epochs.push_back(record);

    const auto update = stopper.observe(epoch, record.task_loss_dev);
    if (config.stopping == StoppingMode::global) {
      if (update.global_improved) best = Snapshot{std::nullopt, epoch, snapshot(model, vocab)};
    } else {
      for (Task t : active)
        if (update.task_improved[index(t)])
          task_snapshots[index(t)] = Snapshot{t, epoch, snapshot(model, vocab)};
    }
    if (hooks.on_epoch) hooks.on_epoch(record, model);
    result.report.stop_epoch = epoch;
    if (stopper.should_stop()) {
      result.report.early_stopped = true;
      break;
    }
  }

  if (config.stopping == StoppingMode::global) {
    load_parameters(model, parse_checkpoint(best->checkpoint));
    result.snapshots.push_back(std::move(*best));
  } else {
    for (Task t : active) result.snapshots.push_back(std::move(*task_snapshots[index(t)]));
  }
  return result;
}

template EpochRecord evaluate_dev(const Scorer<float>&, std::span<const Example>, TaskSet);
template EpochRecord evaluate_dev(const Scorer<double>&, std::span<const Example>, TaskSet);
template TrainResult train(Scorer<float>&, const Vocabulary&, std::span<const Example>,
                           std::span<const Example>, const TrainConfig&, const TrainHooks<float>&);
template TrainResult train(Scorer<double>&, const Vocabulary&, std::span<const Example>,
                           std::span<const Example>, const TrainConfig&, const TrainHooks<double>&);

}  // namespace cqa

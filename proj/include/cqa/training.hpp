#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cqa/model.hpp"
#include "cqa/optim.hpp"

namespace cqa {

enum class StoppingMode { global, per_task };

StoppingMode parse_stopping_mode(std::string_view s);
std::string_view to_string(StoppingMode m);

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t patience = 10;
  std::size_t max_epochs = 100;
  double dropout_input = 0.4;
  double dropout_hidden = 0.7;
  nn::RmsPropConfig rmsprop;
  std::uint64_t seed = 1;
  TaskSet active_tasks = TaskSet::all();
  StoppingMode stopping = StoppingMode::global;

  // Throws ConfigError.
  void validate() const;
};

// Sum of binary cross-entropies over the active tasks.
double joint_loss(const std::array<double, 3>& predictions, const BinaryLabels& labels,
                  TaskSet active);

// Patience bookkeeping over per-epoch dev losses. An epoch improves a
// tracker when its loss is strictly below the best seen so far. Training
// stops once `patience` consecutive epochs pass without improvement: of the
// summed loss in global mode, of every active task in per-task mode.
class EarlyStopping {
 public:
  struct Update {
    bool global_improved = false;
    std::array<bool, 3> task_improved{};
  };

  EarlyStopping(StoppingMode mode, TaskSet active, std::size_t patience);

  Update observe(std::size_t epoch, const std::array<double, 3>& task_losses);
  bool should_stop() const;

  std::size_t best_epoch() const { return best_epoch_; }
  std::size_t best_epoch(Task t) const { return task_best_epoch_[index(t)]; }
  double best_loss() const { return best_loss_; }
  double best_loss(Task t) const { return task_best_loss_[index(t)]; }

 private:
  StoppingMode mode_;
  TaskSet active_;
  std::size_t patience_;
  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  double best_loss_;
  std::array<std::size_t, 3> task_best_epoch_{};
  std::array<double, 3> task_best_loss_;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss_train = 0.0;  // mean joint loss over the epoch's training passes
  double loss_dev = 0.0;    // sum of active per-task dev losses
  std::array<double, 3> task_loss_dev{};  // NaN when the model does not score the task
  std::array<double, 3> map_dev{};        // NaN when unavailable
};

struct Snapshot {
  std::optional<Task> task;  // set in per-task mode
  std::size_t epoch = 0;
  std::string checkpoint;    // checkpoint bytes
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t stop_epoch = 0;
  bool early_stopped = false;

  // epoch,loss_train,loss_dev,lossA_dev,lossB_dev,lossC_dev,mapA_dev,mapB_dev,mapC_dev
  std::string to_csv() const;
};

struct TrainResult {
  TrainReport report;
  // Global mode: one snapshot from the best epoch, already loaded back into
  // the model. Per-task mode: one per active task, from that task's best
  // epoch; the model keeps its final-epoch weights.
  std::vector<Snapshot> snapshots;
};

template <typename T>
struct TrainHooks {
  // Replaces the dev-set loss computation with scripted per-task losses.
  std::function<std::array<double, 3>(std::size_t epoch)> dev_losses;
  std::function<void(const EpochRecord&, const Scorer<T>&)> on_epoch;
};

// Mean per-task dev losses and MAPs in inference mode.
template <typename T>
EpochRecord evaluate_dev(const Scorer<T>& model, std::span<const Example> dev, TaskSet active);

// Mini-batch training with averaged gradients and one rmsprop step per
// batch. Throws NumericError naming the epoch and batch on a non-finite loss.
template <typename T>
TrainResult train(Scorer<T>& model, const Vocabulary& vocab, std::span<const Example> train_data,
                  std::span<const Example> dev_data, const TrainConfig& config,
                  const TrainHooks<T>& hooks = {});

}  // namespace cqa

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "cqa/dataset.hpp"
#include "cqa/gradcheck.hpp"
#include "cqa/model.hpp"

namespace cqa {

struct GradientCheckOptions {
  std::size_t probes = 200;
  std::uint64_t seed = 1;
  std::size_t triples = 5;
  // vocab_size is taken from the generated corpus.
  ModelConfig model;
  std::optional<Task> pair_task;  // check a single-task pair network instead
  // Run the check in training mode with masks drawn once and then frozen.
  bool frozen_dropout = false;
  double dropout_input = 0.4;
  double dropout_hidden = 0.7;
  // Multiplies the analytic gradient of every convolution filter bank
  // before comparison. Values other than 1 serve as a negative control.
  double corrupt_conv_grad = 1.0;
  double delta = 1e-4;
};

// Builds a randomly initialized 64-bit network on a synthetic corpus and
// compares its backpropagated gradients of the summed joint loss against
// central differences.
nn::GradCheckResult check_model_gradients(const GradientCheckOptions& options);

}  // namespace cqa

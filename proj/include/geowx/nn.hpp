// include/geowx/nn.hpp

// Copyright 2026 The geowx authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GEOWX_NN_HPP_
#define GEOWX_NN_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "geowx/features.hpp"

namespace geowx {

enum class Task { kClassification, kRegression };

const char* task_name(Task t);
Task task_from_name(const std::string& name);

bool is_valid_head(const std::string& name);

// Four conv blocks (5x5, stride 1, pad 2, ReLU, 2x2 max pool), mean over
// the time axis, then two fully connected layers. Classification heads
// end in a sigmoid, regression heads are linear.
struct ModelConfig {
  std::array<int, 4> conv_channels = {32, 32, 64, 64};
  int fc_hidden = 256;
  int n_mels = 128;
  std::vector<std::string> heads = {"rain"};
  Task task = Task::kClassification;
};

void validate_model_config(const ModelConfig& config);

struct CnnModel {
  ModelConfig config;
  std::array<std::vector<double>, 4> conv_w;  // [oc][ic*5*5], row-major
  std::array<std::vector<double>, 4> conv_b;  // [oc]
  std::vector<double> fc1_w;                  // [fc_hidden][fc_in]
  std::vector<double> fc1_b;
  std::vector<double> fc2_w;                  // [n_heads][fc_hidden]
  std::vector<double> fc2_b;

  // Mel rows surviving the four halvings.
  int mel_rows_after_pool() const;
  // conv_channels[3] * mel_rows_after_pool(): the time axis is averaged
  // away, so this does not depend on the frame count.
  int fc_input_size() const;

  // Parameter blocks in fixed declaration order (conv_w[0], conv_b[0],
  // ..., fc2_b); checkpoints and gradients follow this order.
  std::vector<std::vector<double>*> param_blocks();
  std::vector<const std::vector<double>*> param_blocks() const;
  std::size_t n_params() const;
};

// Kaiming-normal weights (std = sqrt(2 / fan_in)), zero biases, drawn in
// declaration order from the seeded generator.
CnnModel init_model(const ModelConfig& config, std::uint64_t seed);

// One network input: a standardized spectrogram, row-major
// [n_mels][n_frames]. Frame count must be at least 16 so the pooled time
// axis is non-empty.
struct InputView {
  const double* data = nullptr;
  int n_mels = 0;
  int n_frames = 0;
};

// Per-clip standardization to zero mean, unit variance, with the
// variance floored at 1e-8.
std::vector<double> standardize(const LogMelSpectrogram& spec);

// Per-sample head outputs: sigmoid probabilities for classification,
// raw values for regression. Samples are independent, so results do not
// depend on how the batch is partitioned across threads.
std::vector<std::vector<double>> forward(const CnnModel& model,
                                         const std::vector<InputView>& batch);

// Mean binary cross-entropy over batch x heads, probabilities clamped
// to [1e-7, 1 - 1e-7] inside the logs.
double bce_loss(const std::vector<std::vector<double>>& probs,
                const std::vector<std::vector<double>>& targets);

// Mean squared error over batch x heads; regression targets are
// expected in standardized space.
double mse_loss(const std::vector<std::vector<double>>& preds,
                const std::vector<std::vector<double>>& targets);

struct Gradients {
  std::vector<std::vector<double>> blocks;  // aligned with param_blocks()
};

struct BackwardResult {
  double loss = 0.0;
  std::vector<std::vector<double>> outputs;
  Gradients grads;
};

// Forward, loss, and parameter gradients for one batch. The loss picks
// BCE or MSE from the model's task. Per-sample gradients land in
// per-sample buffers and are reduced in sample order, so the result is
// bitwise independent of worker count.
BackwardResult backward(const CnnModel& model,
                        const std::vector<InputView>& batch,
                        const std::vector<std::vector<double>>& targets);

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long step = 0;
};

AdamState make_adam_state(const CnnModel& model);

// Adam with beta1 0.9, beta2 0.999, eps 1e-8 and bias correction.
void adam_step(CnnModel& model, const Gradients& grads, AdamState& state,
               double learning_rate);

struct TrainConfig {
  int max_epochs = 1500;
  int patience = 20;
  int batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  AugmentConfig augment;
};

// Targets carry one value per head: 0/1 for classification, physical
// units for regression (train() standardizes them internally).
struct TrainExample {
  const LogMelSpectrogram* spec = nullptr;
  std::vector<double> targets;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;
  bool improved = false;
};

struct Checkpoint {
  ModelConfig config;
  std::uint64_t seed = 0;
  std::string selection_metric;  // "f1" or "mse"
  double metric_value = 0.0;
  int best_epoch = 0;
  std::vector<double> target_means;  // per head; 0/1 for classification
  std::vector<double> target_stds;
  std::vector<std::pair<std::string, std::string>> extra;  // caller metadata
  std::vector<double> params;  // flat, declaration order
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochStats> history;
};

// Full loop: seeded shuffling, per-clip augmentation (training set
// only), Adam updates, per-epoch validation (mean F1 at the 0.5 cutoff
// for classification, MSE for regression), early stopping after
// `patience` epochs without improvement, best-epoch checkpointing.
// Throws std::runtime_error with epoch/batch context if the loss goes
// non-finite.
TrainResult train(const ModelConfig& model_config,
                  const std::vector<TrainExample>& train_set,
                  const std::vector<TrainExample>& val_set,
                  const TrainConfig& cfg);

// Binary format: magic "GWX1", uint32-le metadata length, key=value
// metadata text, then parameters as little-endian float64 in declaration
// order. Numbers round-trip exactly.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

CnnModel model_from_checkpoint(const Checkpoint& ckpt);

// Forward pass through a checkpointed model; regression outputs are
// mapped back to physical units using the stored target stats.
std::vector<std::vector<double>> predict(const Checkpoint& ckpt,
                                         const std::vector<InputView>& batch);

}  // namespace geowx

#endif  // GEOWX_NN_HPP_

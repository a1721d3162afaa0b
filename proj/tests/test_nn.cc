// tests/test_nn.cc

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

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "doctest.h"
#include "geowx/features.hpp"
#include "geowx/nn.hpp"
#include "geowx/rng.hpp"
#include "test_util.hpp"

using namespace geowx;
using geowx::testing::TempDir;

namespace {

LogMelSpectrogram random_spec(int n_mels, int n_frames, std::uint64_t seed) {
  LogMelSpectrogram s;
  s.n_mels = n_mels;
  s.n_frames = n_frames;
  s.sample_rate = 8000;
  s.frame_hop_s = 0.023;
  s.floor_log = std::log(1e-10);
  s.values.resize(static_cast<std::size_t>(n_mels) * n_frames);
  Rng rng(seed);
  for (double& v : s.values) v = rng.gaussian(-5.0, 3.0);
  return s;
}

// A strongly banded spectrogram: energy in [lo, hi) mel rows, floor
// elsewhere. Standardization keeps the contrast.
LogMelSpectrogram banded_spec(int n_mels, int n_frames, int lo, int hi,
                              std::uint64_t seed) {
  LogMelSpectrogram s = random_spec(n_mels, n_frames, seed);
  for (int b = 0; b < n_mels; ++b) {
    for (int t = 0; t < n_frames; ++t) {
      double base = (b >= lo && b < hi) ? 2.0 : -18.0;
      s.values[static_cast<std::size_t>(b) * n_frames + t] =
          base + 0.1 * s.values[static_cast<std::size_t>(b) * n_frames + t];
    }
  }
  return s;
}

ModelConfig tiny_config(Task task, std::vector<std::string> heads,
                        int n_mels = 16) {
  ModelConfig cfg;
  cfg.conv_channels = {2, 3, 4, 5};
  cfg.fc_hidden = 7;
  cfg.n_mels = n_mels;
  cfg.heads = std::move(heads);
  cfg.task = task;
  return cfg;
}

double batch_loss(const CnnModel& model, const std::vector<InputView>& batch,
                  const std::vector<std::vector<double>>& targets) {
  auto outs = forward(model, batch);
  return model.config.task == Task::kClassification
             ? bce_loss(outs, targets)
             : mse_loss(outs, targets);
}

}  // namespace

TEST_CASE("model geometry and parameter layout") {
  ModelConfig cfg = tiny_config(Task::kClassification, {"rain", "wind"});
  CnnModel model = init_model(cfg, 1);
  CHECK(model.mel_rows_after_pool() == 1);  // 16 -> 8 -> 4 -> 2 -> 1
  CHECK(model.fc_input_size() == 5);
  auto blocks = model.param_blocks();
  REQUIRE(blocks.size() == 12);
  CHECK(blocks[0]->size() == 2u * 1 * 25);   // conv1 w
  CHECK(blocks[1]->size() == 2u);            // conv1 b
  CHECK(blocks[2]->size() == 3u * 2 * 25);   // conv2 w
  CHECK(blocks[6]->size() == 5u * 4 * 25);   // conv4 w
  CHECK(blocks[8]->size() == 7u * 5);        // fc1 w
  CHECK(blocks[9]->size() == 7u);
  CHECK(blocks[10]->size() == 2u * 7);       // fc2 w: one row per head
  CHECK(blocks[11]->size() == 2u);
  std::size_t total = 0;
  for (auto* b : blocks) total += b->size();
  CHECK(model.n_params() == total);

  // Biases start at zero, weights are seeded draws.
  for (double b : model.conv_b[0]) CHECK(b == 0.0);
  bool any_nonzero = false;
  for (double w : model.fc1_w) any_nonzero |= (w != 0.0);
  CHECK(any_nonzero);

  CnnModel same = init_model(cfg, 1);
  CHECK(same.conv_w[0] == model.conv_w[0]);
  CnnModel other = init_model(cfg, 2);
  CHECK(other.conv_w[0] != model.conv_w[0]);
}

TEST_CASE("validate_model_config rejects bad shapes and heads") {
  ModelConfig cfg = tiny_config(Task::kClassification, {"rain"});
  CHECK_NOTHROW(validate_model_config(cfg));
  cfg.heads = {"fog"};
  CHECK_THROWS_AS(validate_model_config(cfg), std::invalid_argument);
  cfg.heads = {};
  CHECK_THROWS_AS(validate_model_config(cfg), std::invalid_argument);
  cfg = tiny_config(Task::kClassification, {"rain", "rain"});
  CHECK_THROWS_AS(validate_model_config(cfg), std::invalid_argument);
  cfg = tiny_config(Task::kClassification, {"rain"});
  cfg.conv_channels[2] = 0;
  CHECK_THROWS_AS(validate_model_config(cfg), std::invalid_argument);
  cfg = tiny_config(Task::kClassification, {"rain"});
  cfg.n_mels = 8;  // collapses before the fourth pooling
  CHECK_THROWS_AS(validate_model_config(cfg), std::invalid_argument);
  cfg = tiny_config(Task::kClassification, {"rain"});
  cfg.fc_hidden = 0;
  CHECK_THROWS_AS(validate_model_config(cfg), std::invalid_argument);
}

TEST_CASE("forward needs at least 16 frames and matching mel rows") {
  ModelConfig cfg = tiny_config(Task::kClassification, {"rain"});
  CnnModel model = init_model(cfg, 3);
  LogMelSpectrogram ok = random_spec(16, 16, 4);
  std::vector<double> x = standardize(ok);
  CHECK_NOTHROW(forward(model, {{x.data(), 16, 16}}));
  CHECK_THROWS_AS(forward(model, {{x.data(), 16, 15}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(forward(model, {{x.data(), 8, 32}}),
                  std::invalid_argument);
}

TEST_CASE("sigmoid heads emit probabilities; samples are independent") {
  ModelConfig cfg = tiny_config(Task::kClassification, {"rain", "wind"});
  CnnModel model = init_model(cfg, 5);
  LogMelSpectrogram a = random_spec(16, 20, 6);
  LogMelSpectrogram b = random_spec(16, 24, 7);  // frame counts may differ
  std::vector<double> xa = standardize(a), xb = standardize(b);
  std::vector<InputView> batch = {{xa.data(), 16, 20}, {xb.data(), 16, 24}};
  auto outs = forward(model, batch);
  REQUIRE(outs.size() == 2);
  REQUIRE(outs[0].size() == 2);
  for (const auto& row : outs) {
    for (double v : row) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }
  auto lone = forward(model, {batch[1]});
  CHECK(lone[0] == outs[1]);
}

TEST_CASE("analytic gradients match central finite differences") {
  // Reduced model per the acceptance contract: channels [2,2,2,2],
  // input 16 x 20.
  ModelConfig cfg;
  cfg.conv_channels = {2, 2, 2, 2};
  cfg.fc_hidden = 5;
  cfg.n_mels = 16;

  for (Task task : {Task::kClassification, Task::kRegression}) {
    cfg.task = task;
    cfg.heads = task == Task::kClassification
                    ? std::vector<std::string>{"rain", "wind"}
                    : std::vector<std::string>{"rain"};
    CnnModel model = init_model(cfg, 11);

    LogMelSpectrogram sa = random_spec(16, 20, 21);
    LogMelSpectrogram sb = random_spec(16, 20, 22);
    std::vector<double> xa = standardize(sa), xb = standardize(sb);
    std::vector<InputView> batch = {{xa.data(), 16, 20}, {xb.data(), 16, 20}};
    std::vector<std::vector<double>> targets =
        task == Task::kClassification
            ? std::vector<std::vector<double>>{{1.0, 0.0}, {0.0, 1.0}}
            : std::vector<std::vector<double>>{{0.8}, {-1.2}};

    BackwardResult res = backward(model, batch, targets);
    CHECK(res.loss == doctest::Approx(batch_loss(model, batch, targets))
                          .epsilon(1e-12));

    auto blocks = model.param_blocks();
    REQUIRE(res.grads.blocks.size() == blocks.size());
    const double h = 1e-5;
    Rng pick(31);
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      REQUIRE(res.grads.blocks[bi].size() == blocks[bi]->size());
      // Every entry of small blocks, a random handful of large ones.
      std::vector<std::size_t> idx;
      if (blocks[bi]->size() <= 12) {
        for (std::size_t i = 0; i < blocks[bi]->size(); ++i) {
          idx.push_back(i);
        }
      } else {
        for (int i = 0; i < 10; ++i) {
          idx.push_back(pick.uniform_int(0, blocks[bi]->size() - 1));
        }
      }
      for (std::size_t i : idx) {
        double saved = (*blocks[bi])[i];
        (*blocks[bi])[i] = saved + h;
        double up = batch_loss(model, batch, targets);
        (*blocks[bi])[i] = saved - h;
        double down = batch_loss(model, batch, targets);
        (*blocks[bi])[i] = saved;
        double numeric = (up - down) / (2.0 * h);
        double analytic = res.grads.blocks[bi][i];
        double denom = std::max({std::fabs(numeric), std::fabs(analytic),
                                 1e-8});
        CHECK(std::fabs(numeric - analytic) / denom < 1e-4);
      }
    }
  }
}

TEST_CASE("adam step follows the bias-corrected update") {
  ModelConfig cfg = tiny_config(Task::kClassification, {"rain"});
  CnnModel model = init_model(cfg, 13);
  double w0 = model.conv_w[0][0];

  Gradients grads;
  for (auto* b : model.param_blocks()) {
    grads.blocks.emplace_back(b->size(), 0.0);
  }
  grads.blocks[0][0] = 0.5;

  AdamState state = make_adam_state(model);
  adam_step(model, grads, state, 1e-3);
  CHECK(state.step == 1);

  double m = 0.1 * 0.5;
  double v = 0.001 * 0.25;
  double mhat = m / (1.0 - 0.9);
  double vhat = v / (1.0 - 0.999);
  double want = w0 - 1e-3 * mhat / (std::sqrt(vhat) + 1e-8);
  CHECK(model.conv_w[0][0] == doctest::Approx(want).epsilon(1e-15));

  // Untouched parameters stay put after a zero-gradient step.
  CHECK(model.conv_w[0][1] == init_model(cfg, 13).conv_w[0][1]);

  adam_step(model, grads, state, 1e-3);
  CHECK(state.step == 2);
}

TEST_CASE("training overfits a separable toy set") {
  ModelConfig cfg = tiny_config(Task::kClassification, {"rain"});
  std::vector<LogMelSpectrogram> specs;
  std::vector<TrainExample> examples;
  for (int i = 0; i < 16; ++i) {
    bool hot = i % 2 == 0;
    specs.push_back(hot ? banded_spec(16, 20, 2, 6, 100 + i)
                        : banded_spec(16, 20, 10, 14, 100 + i));
  }
  for (int i = 0; i < 16; ++i) {
    examples.push_back({&specs[i], {i % 2 == 0 ? 1.0 : 0.0}});
  }
  TrainConfig tcfg;
  tcfg.max_epochs = 80;
  tcfg.patience = 15;
  tcfg.batch_size = 8;
  tcfg.seed = 3;
  tcfg.augment.apply_prob = 0.0;
  tcfg.augment.noise_std_frac = 0.0;
  TrainResult res = train(cfg, examples, examples, tcfg);
  CHECK(res.best.metric_value == 1.0);
  CHECK(res.best.selection_metric == "f1");
  CHECK(res.history.size() <= 80);
  CHECK(res.history.front().train_loss > res.history.back().train_loss);
}

TEST_CASE("a never-improving metric stops after patience plus one") {
  ModelConfig cfg = tiny_config(Task::kClassification, {"rain"});
  std::vector<LogMelSpectrogram> specs;
  for (int i = 0; i < 8; ++i) specs.push_back(random_spec(16, 20, 40 + i));
  std::vector<TrainExample> examples;
  for (int i = 0; i < 8; ++i) {
    examples.push_back({&specs[i], {i % 2 == 0 ? 1.0 : 0.0}});
  }
  TrainConfig tcfg;
  tcfg.max_epochs = 100;
  tcfg.patience = 20;
  tcfg.learning_rate = 0.0;  // the model never changes, nor can the metric
  tcfg.seed = 5;
  TrainResult res = train(cfg, examples, examples, tcfg);
  CHECK(res.history.size() == 21);
  CHECK(res.best.best_epoch == 1);
  CHECK(res.history[0].improved);
  for (std::size_t i = 1; i < res.history.size(); ++i) {
    CHECK(!res.history[i].improved);
  }
}

TEST_CASE("regression training standardizes targets per head") {
  ModelConfig cfg = tiny_config(Task::kRegression, {"temperature", "wind"});
  std::vector<LogMelSpectrogram> specs;
  std::vector<TrainExample> examples;
  for (int i = 0; i < 12; ++i) specs.push_back(random_spec(16, 20, 60 + i));
  for (int i = 0; i < 12; ++i) {
    examples.push_back(
        {&specs[i], {5.0 + static_cast<double>(i), 0.25 * i}});
  }
  TrainConfig tcfg;
  tcfg.max_epochs = 4;
  tcfg.patience = 3;
  tcfg.seed = 8;
  TrainResult res = train(cfg, examples, examples, tcfg);
  CHECK(res.best.selection_metric == "mse");
  REQUIRE(res.best.target_means.size() == 2);
  // Mean of 5..16 is 10.5; mean of 0, 0.25, ..., 2.75 is 1.375.
  CHECK(res.best.target_means[0] == doctest::Approx(10.5).epsilon(1e-12));
  CHECK(res.best.target_means[1] == doctest::Approx(1.375).epsilon(1e-12));
  CHECK(res.best.target_stds[0] > 0.0);

  // predict() maps outputs back through the stored stats.
  std::vector<double> x = standardize(specs[0]);
  std::vector<InputView> batch = {{x.data(), 16, 20}};
  Checkpoint moved = res.best;
  auto y = predict(res.best, batch);
  moved.target_means = {0.0, 0.0};
  moved.target_stds = {1.0, 1.0};
  auto raw = predict(moved, batch);
  CHECK(y[0][0] == doctest::Approx(raw[0][0] * res.best.target_stds[0] +
                                   res.best.target_means[0])
                       .epsilon(1e-12));
  CHECK(y[0][1] == doctest::Approx(raw[0][1] * res.best.target_stds[1] +
                                   res.best.target_means[1])
                       .epsilon(1e-12));
}

TEST_CASE("training is bitwise deterministic for a fixed seed") {
  TempDir tmp;
  ModelConfig cfg = tiny_config(Task::kClassification, {"rain"});
  std::vector<LogMelSpectrogram> specs;
  for (int i = 0; i < 10; ++i) specs.push_back(random_spec(16, 18, 80 + i));
  std::vector<TrainExample> examples;
  for (int i = 0; i < 10; ++i) {
    examples.push_back({&specs[i], {i < 5 ? 1.0 : 0.0}});
  }
  TrainConfig tcfg;
  tcfg.max_epochs = 5;
  tcfg.patience = 4;
  tcfg.seed = 99;
  tcfg.augment.apply_prob = 1.0;  // exercise the augmentation stream too

  TrainResult a = train(cfg, examples, examples, tcfg);
  TrainResult b = train(cfg, examples, examples, tcfg);
  CHECK(a.best.params == b.best.params);
  CHECK(a.best.metric_value == b.best.metric_value);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_loss == b.history[i].train_loss);
    CHECK(a.history[i].val_metric == b.history[i].val_metric);
  }

  save_checkpoint(tmp.file("a.gwx"), a.best);
  save_checkpoint(tmp.file("b.gwx"), b.best);
  CHECK(geowx::testing::read_bytes(tmp.file("a.gwx")) ==
        geowx::testing::read_bytes(tmp.file("b.gwx")));
}

TEST_CASE("checkpoints round-trip bitwise") {
  TempDir tmp;
  ModelConfig cfg = tiny_config(Task::kRegression, {"rain", "humidity"});
  CnnModel model = init_model(cfg, 17);
  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.seed = 555;
  ckpt.selection_metric = "mse";
  ckpt.metric_value = 0.12345678901234567;
  ckpt.best_epoch = 42;
  ckpt.target_means = {0.5, 80.0};
  ckpt.target_stds = {0.25, 10.0};
  ckpt.extra.emplace_back("bin_rain", "0.1");
  ckpt.extra.emplace_back("note", "smoke");
  for (auto* b : model.param_blocks()) {
    ckpt.params.insert(ckpt.params.end(), b->begin(), b->end());
  }

  save_checkpoint(tmp.file("m.gwx"), ckpt);
  Checkpoint back = load_checkpoint(tmp.file("m.gwx"));
  CHECK(back.config.conv_channels == cfg.conv_channels);
  CHECK(back.config.fc_hidden == cfg.fc_hidden);
  CHECK(back.config.n_mels == cfg.n_mels);
  CHECK(back.config.heads == cfg.heads);
  CHECK(back.config.task == cfg.task);
  CHECK(back.seed == 555);
  CHECK(back.selection_metric == "mse");
  CHECK(back.metric_value == ckpt.metric_value);
  CHECK(back.best_epoch == 42);
  CHECK(back.target_means == ckpt.target_means);
  CHECK(back.target_stds == ckpt.target_stds);
  CHECK(back.params == ckpt.params);
  bool found = false;
  for (auto& [k, v] : back.extra) {
    if (k == "note") {
      found = true;
      CHECK(v == "smoke");
    }
  }
  CHECK(found);

  CnnModel restored = model_from_checkpoint(back);
  CHECK(restored.conv_w[0] == model.conv_w[0]);
  CHECK(restored.fc2_b == model.fc2_b);
}

TEST_CASE("checkpoint loader rejects corrupt files") {
  TempDir tmp;
  ModelConfig cfg = tiny_config(Task::kClassification, {"rain"});
  CnnModel model = init_model(cfg, 19);
  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.selection_metric = "f1";
  ckpt.target_means = {0.0};
  ckpt.target_stds = {1.0};
  for (auto* b : model.param_blocks()) {
    ckpt.params.insert(ckpt.params.end(), b->begin(), b->end());
  }
  save_checkpoint(tmp.file("ok.gwx"), ckpt);

  std::string bytes = geowx::testing::read_bytes(tmp.file("ok.gwx"));
  std::string bad = bytes;
  bad[0] = 'X';
  geowx::testing::write_bytes(tmp.file("magic.gwx"), bad);
  CHECK_THROWS_AS(load_checkpoint(tmp.file("magic.gwx")),
                  std::runtime_error);

  std::string trunc = bytes.substr(0, bytes.size() - 9);
  geowx::testing::write_bytes(tmp.file("trunc.gwx"), trunc);
  CHECK_THROWS_AS(load_checkpoint(tmp.file("trunc.gwx")),
                  std::runtime_error);

  CHECK_THROWS_AS(load_checkpoint(tmp.file("absent.gwx")),
                  std::runtime_error);

  // Extra keys may not collide with the fixed metadata or carry '='.
  Checkpoint evil = ckpt;
  evil.extra.emplace_back("task", "oops");
  CHECK_THROWS_AS(save_checkpoint(tmp.file("e1.gwx"), evil),
                  std::invalid_argument);
  evil = ckpt;
  evil.extra.emplace_back("a=b", "x");
  CHECK_THROWS_AS(save_checkpoint(tmp.file("e2.gwx"), evil),
                  std::invalid_argument);
}

TEST_CASE("standardize yields zero mean, unit variance") {
  LogMelSpectrogram s = random_spec(8, 40, 7);
  s.n_mels = 8;
  std::vector<double> x = standardize(s);
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  CHECK(std::fabs(mean) < 1e-12);
  CHECK(var == doctest::Approx(1.0).epsilon(1e-9));

  LogMelSpectrogram flat = s;
  std::fill(flat.values.begin(), flat.values.end(), 4.0);
  std::vector<double> zeros = standardize(flat);
  for (double v : zeros) CHECK(v == 0.0);
}

TEST_CASE("task and head names") {
  CHECK(task_from_name("classification") == Task::kClassification);
  CHECK(task_from_name("regression") == Task::kRegression);
  CHECK(std::string(task_name(Task::kRegression)) == "regression");
  CHECK_THROWS_AS(task_from_name("ranking"), std::invalid_argument);
  CHECK(is_valid_head("rain"));
  CHECK(is_valid_head("wind"));
  CHECK(is_valid_head("temperature"));
  CHECK(is_valid_head("humidity"));
  CHECK(!is_valid_head("fog"));
}

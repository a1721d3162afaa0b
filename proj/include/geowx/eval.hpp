// include/geowx/eval.hpp

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

#ifndef GEOWX_EVAL_HPP_
#define GEOWX_EVAL_HPP_

#include <optional>
#include <string>
#include <vector>

namespace geowx {

// F1 = 2TP / (2TP + FP + FN); defined as 0 when the denominator is 0.
double f1_score(const std::vector<bool>& preds,
                const std::vector<bool>& labels);

// Probability a random positive outscores a random negative, ties at
// half credit (Mann-Whitney with averaged ranks). Throws
// std::invalid_argument unless both classes are present.
double auc_score(const std::vector<double>& scores,
                 const std::vector<bool>& labels);

double rmse(const std::vector<double>& preds,
            const std::vector<double>& targets);

// RMSE of predicting the training mean everywhere.
double constant_baseline_rmse(const std::vector<double>& train_targets,
                              const std::vector<double>& eval_targets);

// 100 * (model - baseline) / baseline; negative is an improvement.
double change_pct(double model_rmse, double baseline_rmse);

struct ClassificationRow {
  std::string class_name;   // rain, wind
  std::string model_kind;   // baseline, individual, shared, strong-label
  std::optional<double> threshold;
  double auc = 0.0;
  double f1 = 0.0;
};

struct RegressionRow {
  std::string variable;
  std::string model_kind;
  double baseline_rmse = 0.0;
  double model_rmse = 0.0;
  double change_pct = 0.0;
};

std::string classification_csv(const std::vector<ClassificationRow>& rows);
std::string classification_table(const std::vector<ClassificationRow>& rows);
std::string regression_csv(const std::vector<RegressionRow>& rows);
std::string regression_table(const std::vector<RegressionRow>& rows);

}  // namespace geowx

#endif  // GEOWX_EVAL_HPP_

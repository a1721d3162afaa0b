// src/eval.cc

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

#include "geowx/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace geowx {

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace

double f1_score(const std::vector<bool>& preds,
                const std::vector<bool>& labels) {
  if (preds.size() != labels.size() || preds.empty()) {
    throw std::invalid_argument("f1_score: size mismatch or empty input");
  }
  long tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] && labels[i]) ++tp;
    else if (preds[i] && !labels[i]) ++fp;
    else if (!preds[i] && labels[i]) ++fn;
  }
  long denom = 2 * tp + fp + fn;
  if (denom == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

double auc_score(const std::vector<double>& scores,
                 const std::vector<bool>& labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw std::invalid_argument("auc_score: size mismatch or empty input");
  }
  std::size_t n_pos = 0;
  for (bool l : labels) n_pos += l ? 1 : 0;
  std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw std::invalid_argument(
        "auc_score: needs at least one positive and one negative");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  // Average ranks over tie groups, then the Mann-Whitney statistic.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() &&
           scores[order[j + 1]] == scores[order[i]]) {
      ++j;
    }
    double avg_rank = 0.5 * (static_cast<double>(i + 1) +
                             static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]]) rank_sum_pos += avg_rank;
    }
    i = j + 1;
  }

  double u = rank_sum_pos -
             0.5 * static_cast<double>(n_pos) *
                 (static_cast<double>(n_pos) + 1.0);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double rmse(const std::vector<double>& preds,
            const std::vector<double>& targets) {
  if (preds.size() != targets.size() || preds.empty()) {
    throw std::invalid_argument("rmse: size mismatch or empty input");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    double d = preds[i] - targets[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(preds.size()));
}

double constant_baseline_rmse(const std::vector<double>& train_targets,
                              const std::vector<double>& eval_targets) {
  if (train_targets.empty() || eval_targets.empty()) {
    throw std::invalid_argument("constant_baseline_rmse: empty input");
  }
  double mean = std::accumulate(train_targets.begin(), train_targets.end(),
                                0.0) /
                static_cast<double>(train_targets.size());
  std::vector<double> preds(eval_targets.size(), mean);
  return rmse(preds, eval_targets);
}

double change_pct(double model_rmse, double baseline_rmse) {
  if (baseline_rmse == 0.0) {
    throw std::invalid_argument("change_pct: baseline RMSE is zero");
  }
  return 100.0 * (model_rmse - baseline_rmse) / baseline_rmse;
}

std::string classification_csv(const std::vector<ClassificationRow>& rows) {
  std::ostringstream out;
  out << "class,model,threshold,auc,f1\n";
  for (const auto& r : rows) {
    out << r.class_name << ',' << r.model_kind << ',';
    if (r.threshold) out << fmt("%.6f", *r.threshold);
    out << ',' << fmt("%.6f", r.auc) << ',' << fmt("%.6f", r.f1) << '\n';
  }
  return out.str();
}

std::string classification_table(const std::vector<ClassificationRow>& rows) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-8s %-14s %10s %8s %8s\n", "class",
                "model", "threshold", "auc", "f1");
  out << buf;
  for (const auto& r : rows) {
    std::string thr = r.threshold ? fmt("%.3f", *r.threshold) : "N/A";
    std::snprintf(buf, sizeof(buf), "%-8s %-14s %10s %8.3f %8.3f\n",
                  r.class_name.c_str(), r.model_kind.c_str(), thr.c_str(),
                  r.auc, r.f1);
    out << buf;
  }
  return out.str();
}

std::string regression_csv(const std::vector<RegressionRow>& rows) {
  std::ostringstream out;
  out << "variable,model,baseline_rmse,model_rmse,change_pct\n";
  for (const auto& r : rows) {
    out << r.variable << ',' << r.model_kind << ','
        << fmt("%.6f", r.baseline_rmse) << ',' << fmt("%.6f", r.model_rmse)
        << ',' << fmt("%.2f", r.change_pct) << '\n';
  }
  return out.str();
}

std::string regression_table(const std::vector<RegressionRow>& rows) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-12s %-12s %14s %12s %12s\n", "variable",
                "model", "baseline_rmse", "model_rmse", "change_pct");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-12s %-12s %14.4f %12.4f %11.2f%%\n",
                  r.variable.c_str(), r.model_kind.c_str(), r.baseline_rmse,
                  r.model_rmse, r.change_pct);
    out << buf;
  }
  return out.str();
}

}  // namespace geowx

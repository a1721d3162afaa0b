// src/nn.cc

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

#include "geowx/nn.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "geowx/csvio.hpp"
#include "geowx/rng.hpp"

namespace geowx {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Eigen::VectorXd>;
using MapConstVec = Eigen::Map<const Eigen::VectorXd>;

constexpr int kK = 5;
constexpr int kPad = 2;
constexpr double kProbClamp = 1e-7;
constexpr double kVarFloor = 1e-8;

constexpr std::uint64_t kInitStream = 0x696e6974;
constexpr std::uint64_t kShuffleStream = 0x73687566;
constexpr std::uint64_t kAugmentStream = 0x6175676dULL;

const char* const kHeadNames[] = {"rain", "wind", "temperature", "humidity"};

struct LayerGeom {
  int ic = 0, ih = 0, iw = 0;  // input planes and size
  int oc = 0;
  int ph = 0, pw = 0;  // pooled output size
};

std::array<LayerGeom, 4> make_geometry(const ModelConfig& cfg, int n_frames) {
  std::array<LayerGeom, 4> g;
  int c = 1, h = cfg.n_mels, w = n_frames;
  for (int l = 0; l < 4; ++l) {
    g[l].ic = c;
    g[l].ih = h;
    g[l].iw = w;
    g[l].oc = cfg.conv_channels[l];
    g[l].ph = h / 2;
    g[l].pw = w / 2;
    if (g[l].ph < 1 || g[l].pw < 1) {
      throw std::invalid_argument(
          "input too small: " + std::to_string(cfg.n_mels) + " mels x " +
          std::to_string(n_frames) + " frames does not survive 4 poolings");
    }
    c = g[l].oc;
    h = g[l].ph;
    w = g[l].pw;
  }
  return g;
}

// Chunk of conv output rows processed at once, sized to keep the im2col
// scratch around 2 MB. Always even so chunks align with pool rows.
int pick_chunk_rows(const LayerGeom& g) {
  long k_rows = static_cast<long>(g.ic) * kK * kK;
  long budget = 262144 / std::max(1L, k_rows * g.iw);
  int chunk = static_cast<int>(std::max(2L, budget & ~1L));
  return std::min(chunk, 2 * g.ph);
}

// Patch matrix for conv output rows [r0, r1): row (ci*25 + kr*5 + kc),
// column (r - r0)*iw + c holds x[ci][r + kr - 2][c + kc - 2], zero
// outside the input.
void im2col(const double* x, const LayerGeom& g, int r0, int r1,
            double* cols) {
  int iw = g.iw, ih = g.ih;
  std::size_t n_pos = static_cast<std::size_t>(r1 - r0) * iw;
  for (int ci = 0; ci < g.ic; ++ci) {
    const double* xc = x + static_cast<std::size_t>(ci) * ih * iw;
    for (int kr = 0; kr < kK; ++kr) {
      for (int kc = 0; kc < kK; ++kc) {
        double* row =
            cols + (static_cast<std::size_t>(ci) * kK * kK + kr * kK + kc) *
                       n_pos;
        std::size_t p = 0;
        for (int r = r0; r < r1; ++r, p += iw) {
          int sr = r + kr - kPad;
          if (sr < 0 || sr >= ih) {
            std::fill(row + p, row + p + iw, 0.0);
            continue;
          }
          const double* xr = xc + static_cast<std::size_t>(sr) * iw;
          int shift = kc - kPad;
          int c_lo = std::max(0, -shift);
          int c_hi = std::min(iw, iw - shift);
          for (int c = 0; c < c_lo; ++c) row[p + c] = 0.0;
          for (int c = c_lo; c < c_hi; ++c) row[p + c] = xr[c + shift];
          for (int c = c_hi; c < iw; ++c) row[p + c] = 0.0;
        }
      }
    }
  }
}

// Scatter-add of a patch-matrix gradient back onto the input plane.
void col2im_add(const double* cols, const LayerGeom& g, int r0, int r1,
                double* dx) {
  int iw = g.iw, ih = g.ih;
  std::size_t n_pos = static_cast<std::size_t>(r1 - r0) * iw;
  for (int ci = 0; ci < g.ic; ++ci) {
    double* xc = dx + static_cast<std::size_t>(ci) * ih * iw;
    for (int kr = 0; kr < kK; ++kr) {
      for (int kc = 0; kc < kK; ++kc) {
        const double* row =
            cols + (static_cast<std::size_t>(ci) * kK * kK + kr * kK + kc) *
                       n_pos;
        std::size_t p = 0;
        for (int r = r0; r < r1; ++r, p += iw) {
          int sr = r + kr - kPad;
          if (sr < 0 || sr >= ih) continue;
          double* xr = xc + static_cast<std::size_t>(sr) * iw;
          int shift = kc - kPad;
          int c_lo = std::max(0, -shift);
          int c_hi = std::min(iw, iw - shift);
          for (int c = c_lo; c < c_hi; ++c) xr[c + shift] += row[p + c];
        }
      }
    }
  }
}

// conv 5x5 -> ReLU -> 2x2 max pool, materializing only the pooled
// output. pool_arg (optional) records the flat conv-grid argmax per
// pooled cell; since the pooled value equals the winning cell's
// post-ReLU activation, pool_out > 0 doubles as the ReLU gate in the
// backward pass.
void conv_pool_forward(const double* x, const LayerGeom& g,
                       const std::vector<double>& w,
                       const std::vector<double>& b, double* pool_out,
                       int* pool_arg, std::vector<double>& cols_buf,
                       std::vector<double>& y_buf) {
  int k_rows = g.ic * kK * kK;
  int chunk = pick_chunk_rows(g);
  cols_buf.resize(static_cast<std::size_t>(k_rows) * chunk * g.iw);
  y_buf.resize(static_cast<std::size_t>(g.oc) * chunk * g.iw);

  MapConstMat wm(w.data(), g.oc, k_rows);
  for (int r0 = 0; r0 < 2 * g.ph; r0 += chunk) {
    int r1 = std::min(r0 + chunk, 2 * g.ph);
    int n_pos = (r1 - r0) * g.iw;
    im2col(x, g, r0, r1, cols_buf.data());
    MapConstMat cm(cols_buf.data(), k_rows, n_pos);
    MapMat ym(y_buf.data(), g.oc, n_pos);
    ym.noalias() = wm * cm;

    for (int o = 0; o < g.oc; ++o) {
      double* yrow = y_buf.data() + static_cast<std::size_t>(o) * n_pos;
      double bias = b[o];
      for (int i = 0; i < n_pos; ++i) yrow[i] += bias;

      for (int pr = r0 / 2; pr < r1 / 2; ++pr) {
        const double* top =
            yrow + static_cast<std::size_t>(2 * pr - r0) * g.iw;
        const double* bot = top + g.iw;
        double* dst =
            pool_out + (static_cast<std::size_t>(o) * g.ph + pr) * g.pw;
        int* arg = pool_arg
                       ? pool_arg +
                             (static_cast<std::size_t>(o) * g.ph + pr) * g.pw
                       : nullptr;
        for (int pc = 0; pc < g.pw; ++pc) {
          int c0 = 2 * pc;
          double v = top[c0];
          int ai = 0;
          if (top[c0 + 1] > v) { v = top[c0 + 1]; ai = 1; }
          if (bot[c0] > v) { v = bot[c0]; ai = 2; }
          if (bot[c0 + 1] > v) { v = bot[c0 + 1]; ai = 3; }
          dst[pc] = v > 0.0 ? v : 0.0;
          if (arg) {
            int rr = 2 * pr + (ai >> 1);
            int cc = c0 + (ai & 1);
            arg[pc] = (o * g.ih + rr) * g.iw + cc;
          }
        }
      }
    }
  }
}

void conv_pool_backward(const double* x, const LayerGeom& g,
                        const std::vector<double>& w, const double* pool_out,
                        const int* pool_arg, const double* d_pool, double* dw,
                        double* db, double* dx, std::vector<double>& cols_buf,
                        std::vector<double>& dy_buf,
                        std::vector<double>& dcols_buf) {
  int k_rows = g.ic * kK * kK;
  int chunk = pick_chunk_rows(g);
  cols_buf.resize(static_cast<std::size_t>(k_rows) * chunk * g.iw);
  dy_buf.resize(static_cast<std::size_t>(g.oc) * chunk * g.iw);
  if (dx) {
    dcols_buf.resize(static_cast<std::size_t>(k_rows) * chunk * g.iw);
    std::fill_n(dx, static_cast<std::size_t>(g.ic) * g.ih * g.iw, 0.0);
  }

  MapConstMat wm(w.data(), g.oc, k_rows);
  MapMat dwm(dw, g.oc, k_rows);
  for (int r0 = 0; r0 < 2 * g.ph; r0 += chunk) {
    int r1 = std::min(r0 + chunk, 2 * g.ph);
    int n_pos = (r1 - r0) * g.iw;
    std::fill(dy_buf.begin(),
              dy_buf.begin() + static_cast<std::size_t>(g.oc) * n_pos, 0.0);

    // Route pooled gradients to their argmax cells, gated by ReLU.
    for (int o = 0; o < g.oc; ++o) {
      double* dy = dy_buf.data() + static_cast<std::size_t>(o) * n_pos;
      for (int pr = r0 / 2; pr < r1 / 2; ++pr) {
        std::size_t base = (static_cast<std::size_t>(o) * g.ph + pr) * g.pw;
        for (int pc = 0; pc < g.pw; ++pc) {
          if (pool_out[base + pc] <= 0.0) continue;
          int flat = pool_arg[base + pc];
          int rr = (flat / g.iw) % g.ih;
          int cc = flat % g.iw;
          dy[static_cast<std::size_t>(rr - r0) * g.iw + cc] =
              d_pool[base + pc];
        }
      }
    }

    im2col(x, g, r0, r1, cols_buf.data());
    MapConstMat cm(cols_buf.data(), k_rows, n_pos);
    MapConstMat dym(dy_buf.data(), g.oc, n_pos);
    dwm.noalias() += dym * cm.transpose();
    for (int o = 0; o < g.oc; ++o) {
      const double* dy = dy_buf.data() + static_cast<std::size_t>(o) * n_pos;
      double acc = 0.0;
      for (int i = 0; i < n_pos; ++i) acc += dy[i];
      db[o] += acc;
    }

    if (dx) {
      MapMat dcm(dcols_buf.data(), k_rows, n_pos);
      dcm.noalias() = wm.transpose() * dym;
      col2im_add(dcols_buf.data(), g, r0, r1, dx);
    }
  }
}

struct BlockLayout {
  std::vector<std::size_t> sizes;
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
};

BlockLayout block_layout(const CnnModel& model) {
  BlockLayout layout;
  for (const auto* b : model.param_blocks()) {
    layout.offsets.push_back(layout.total);
    layout.sizes.push_back(b->size());
    layout.total += b->size();
  }
  return layout;
}

struct SampleCache {
  std::array<std::vector<double>, 4> pool_out;
  std::array<std::vector<int>, 4> pool_arg;
  std::vector<double> tm;       // temporal mean, [oc4 * mel_rows]
  std::vector<double> fc1_act;  // post-ReLU
  std::vector<double> out;      // head outputs after task transform
  std::vector<double> cols_buf, y_buf, dcols_buf;
};

void forward_sample(const CnnModel& model, const std::array<LayerGeom, 4>& g,
                    const double* x, SampleCache& cache, bool want_arg) {
  for (int l = 0; l < 4; ++l) {
    cache.pool_out[l].resize(static_cast<std::size_t>(g[l].oc) * g[l].ph *
                             g[l].pw);
    if (want_arg) {
      cache.pool_arg[l].resize(cache.pool_out[l].size());
    }
    const double* in = l == 0 ? x : cache.pool_out[l - 1].data();
    conv_pool_forward(in, g[l], model.conv_w[l], model.conv_b[l],
                      cache.pool_out[l].data(),
                      want_arg ? cache.pool_arg[l].data() : nullptr,
                      cache.cols_buf, cache.y_buf);
  }

  const LayerGeom& last = g[3];
  int mel_rows = last.ph;
  int frames = last.pw;
  cache.tm.resize(static_cast<std::size_t>(last.oc) * mel_rows);
  for (int o = 0; o < last.oc; ++o) {
    for (int r = 0; r < mel_rows; ++r) {
      const double* src = cache.pool_out[3].data() +
                          (static_cast<std::size_t>(o) * mel_rows + r) *
                              frames;
      double acc = 0.0;
      for (int t = 0; t < frames; ++t) acc += src[t];
      cache.tm[static_cast<std::size_t>(o) * mel_rows + r] =
          acc / static_cast<double>(frames);
    }
  }

  int fc_in = model.fc_input_size();
  int hidden = model.config.fc_hidden;
  int heads = static_cast<int>(model.config.heads.size());

  cache.fc1_act.resize(hidden);
  MapConstMat w1(model.fc1_w.data(), hidden, fc_in);
  MapConstVec tm(cache.tm.data(), fc_in);
  MapVec a1(cache.fc1_act.data(), hidden);
  a1.noalias() = w1 * tm;
  for (int i = 0; i < hidden; ++i) {
    double z = cache.fc1_act[i] + model.fc1_b[i];
    cache.fc1_act[i] = z > 0.0 ? z : 0.0;
  }

  cache.out.resize(heads);
  MapConstMat w2(model.fc2_w.data(), heads, hidden);
  MapConstVec act(cache.fc1_act.data(), hidden);
  MapVec out(cache.out.data(), heads);
  out.noalias() = w2 * act;
  for (int j = 0; j < heads; ++j) {
    double z = cache.out[j] + model.fc2_b[j];
    cache.out[j] = model.config.task == Task::kClassification
                       ? 1.0 / (1.0 + std::exp(-z))
                       : z;
  }
}

// d_out is dL/d(logit) per head. Gradients are written into a flat
// per-sample buffer laid out like param_blocks().
void backward_sample(const CnnModel& model, const std::array<LayerGeom, 4>& g,
                     const double* x, SampleCache& cache,
                     const std::vector<double>& d_out,
                     const BlockLayout& layout, double* grad) {
  int fc_in = model.fc_input_size();
  int hidden = model.config.fc_hidden;
  int heads = static_cast<int>(model.config.heads.size());
  int mel_rows = g[3].ph;
  int frames = g[3].pw;

  // Block order: conv_w[l], conv_b[l] pairs, then fc1_w, fc1_b, fc2_w,
  // fc2_b.
  double* d_fc1_w = grad + layout.offsets[8];
  double* d_fc1_b = grad + layout.offsets[9];
  double* d_fc2_w = grad + layout.offsets[10];
  double* d_fc2_b = grad + layout.offsets[11];

  std::vector<double> d_act(hidden, 0.0);
  for (int j = 0; j < heads; ++j) {
    double dz = d_out[j];
    d_fc2_b[j] += dz;
    double* wrow = d_fc2_w + static_cast<std::size_t>(j) * hidden;
    const double* w2row =
        model.fc2_w.data() + static_cast<std::size_t>(j) * hidden;
    for (int i = 0; i < hidden; ++i) {
      wrow[i] += dz * cache.fc1_act[i];
      d_act[i] += dz * w2row[i];
    }
  }

  std::vector<double> d_tm(fc_in, 0.0);
  for (int i = 0; i < hidden; ++i) {
    if (cache.fc1_act[i] <= 0.0) continue;  // ReLU gate
    double dz = d_act[i];
    d_fc1_b[i] += dz;
    double* wrow = d_fc1_w + static_cast<std::size_t>(i) * fc_in;
    const double* w1row =
        model.fc1_w.data() + static_cast<std::size_t>(i) * fc_in;
    for (int k = 0; k < fc_in; ++k) {
      wrow[k] += dz * cache.tm[k];
      d_tm[k] += dz * w1row[k];
    }
  }

  // Undo the temporal mean: spread evenly over frames.
  std::vector<double> d_pool(static_cast<std::size_t>(g[3].oc) * mel_rows *
                             frames);
  double inv_frames = 1.0 / static_cast<double>(frames);
  for (int o = 0; o < g[3].oc; ++o) {
    for (int r = 0; r < mel_rows; ++r) {
      double dv = d_tm[static_cast<std::size_t>(o) * mel_rows + r] *
                  inv_frames;
      double* dst = d_pool.data() +
                    (static_cast<std::size_t>(o) * mel_rows + r) * frames;
      for (int t = 0; t < frames; ++t) dst[t] = dv;
    }
  }

  std::vector<double> d_pool_prev;
  for (int l = 3; l >= 0; --l) {
    const double* in = l == 0 ? x : cache.pool_out[l - 1].data();
    double* dx = nullptr;
    if (l > 0) {
      d_pool_prev.assign(cache.pool_out[l - 1].size(), 0.0);
      dx = d_pool_prev.data();
    }
    conv_pool_backward(in, g[l], model.conv_w[l], cache.pool_out[l].data(),
                       cache.pool_arg[l].data(), d_pool.data(),
                       grad + layout.offsets[2 * l],
                       grad + layout.offsets[2 * l + 1], dx, cache.cols_buf,
                       cache.y_buf, cache.dcols_buf);
    if (l > 0) d_pool.swap(d_pool_prev);
  }
}

void check_views(const CnnModel& model, const std::vector<InputView>& batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  for (const auto& v : batch) {
    if (v.data == nullptr) throw std::invalid_argument("null input view");
    if (v.n_mels != model.config.n_mels) {
      throw std::invalid_argument(
          "input has " + std::to_string(v.n_mels) + " mel bands, model wants " +
          std::to_string(model.config.n_mels));
    }
    if (v.n_frames < 16) {
      throw std::invalid_argument(
          "input needs at least 16 frames, got " +
          std::to_string(v.n_frames));
    }
  }
}

double loss_for_task(Task task, const std::vector<std::vector<double>>& outs,
                     const std::vector<std::vector<double>>& targets) {
  return task == Task::kClassification ? bce_loss(outs, targets)
                                       : mse_loss(outs, targets);
}

std::string join_csv_ints(const int* v, std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

std::size_t param_count(const ModelConfig& config) {
  std::size_t n = 0;
  int ic = 1;
  for (int l = 0; l < 4; ++l) {
    int oc = config.conv_channels[l];
    n += static_cast<std::size_t>(oc) * ic * kK * kK + oc;
    ic = oc;
  }
  int mel_rows = config.n_mels / 16;
  std::size_t fc_in = static_cast<std::size_t>(config.conv_channels[3]) *
                      static_cast<std::size_t>(mel_rows);
  n += static_cast<std::size_t>(config.fc_hidden) * fc_in + config.fc_hidden;
  n += config.heads.size() * config.fc_hidden + config.heads.size();
  return n;
}

}  // namespace

const char* task_name(Task t) {
  return t == Task::kClassification ? "classification" : "regression";
}

Task task_from_name(const std::string& name) {
  if (name == "classification") return Task::kClassification;
  if (name == "regression") return Task::kRegression;
  throw std::invalid_argument("unknown task: " + name);
}

bool is_valid_head(const std::string& name) {
  for (const char* h : kHeadNames) {
    if (name == h) return true;
  }
  return false;
}

void validate_model_config(const ModelConfig& config) {
  for (int c : config.conv_channels) {
    if (c < 1) throw std::invalid_argument("conv channels must be >= 1");
  }
  if (config.fc_hidden < 1) {
    throw std::invalid_argument("fc_hidden must be >= 1");
  }
  if (config.n_mels < 16) {
    throw std::invalid_argument(
        "n_mels must be >= 16 to survive 4 poolings");
  }
  if (config.heads.empty()) {
    throw std::invalid_argument("model needs at least one head");
  }
  std::set<std::string> seen;
  for (const auto& h : config.heads) {
    if (!is_valid_head(h)) {
      throw std::invalid_argument("unknown head: " + h);
    }
    if (!seen.insert(h).second) {
      throw std::invalid_argument("duplicate head: " + h);
    }
  }
}

int CnnModel::mel_rows_after_pool() const {
  int h = config.n_mels;
  for (int l = 0; l < 4; ++l) h /= 2;
  return h;
}

int CnnModel::fc_input_size() const {
  return config.conv_channels[3] * mel_rows_after_pool();
}

std::vector<std::vector<double>*> CnnModel::param_blocks() {
  std::vector<std::vector<double>*> blocks;
  for (int l = 0; l < 4; ++l) {
    blocks.push_back(&conv_w[l]);
    blocks.push_back(&conv_b[l]);
  }
  blocks.push_back(&fc1_w);
  blocks.push_back(&fc1_b);
  blocks.push_back(&fc2_w);
  blocks.push_back(&fc2_b);
  return blocks;
}

std::vector<const std::vector<double>*> CnnModel::param_blocks() const {
  std::vector<const std::vector<double>*> blocks;
  for (int l = 0; l < 4; ++l) {
    blocks.push_back(&conv_w[l]);
    blocks.push_back(&conv_b[l]);
  }
  blocks.push_back(&fc1_w);
  blocks.push_back(&fc1_b);
  blocks.push_back(&fc2_w);
  blocks.push_back(&fc2_b);
  return blocks;
}

std::size_t CnnModel::n_params() const {
  std::size_t n = 0;
  for (const auto* b : param_blocks()) n += b->size();
  return n;
}

namespace {

// Allocates all parameter blocks, zero filled.
CnnModel make_sized_model(const ModelConfig& config) {
  validate_model_config(config);

  CnnModel model;
  model.config = config;
  int ic = 1;
  for (int l = 0; l < 4; ++l) {
    int oc = config.conv_channels[l];
    model.conv_w[l].assign(static_cast<std::size_t>(oc) * ic * kK * kK, 0.0);
    model.conv_b[l].assign(oc, 0.0);
    ic = oc;
  }
  int fc_in = model.fc_input_size();
  if (fc_in < 1) {
    throw std::invalid_argument("n_mels too small for the pooling stack");
  }
  int hidden = config.fc_hidden;
  int heads = static_cast<int>(config.heads.size());
  model.fc1_w.assign(static_cast<std::size_t>(hidden) * fc_in, 0.0);
  model.fc1_b.assign(hidden, 0.0);
  model.fc2_w.assign(static_cast<std::size_t>(heads) * hidden, 0.0);
  model.fc2_b.assign(heads, 0.0);
  return model;
}

}  // namespace

CnnModel init_model(const ModelConfig& config, std::uint64_t seed) {
  CnnModel model = make_sized_model(config);
  int fc_in = model.fc_input_size();
  int hidden = config.fc_hidden;

  Rng rng(Rng::derive(seed, {kInitStream}));
  int ic = 1;
  for (int l = 0; l < 4; ++l) {
    double std = std::sqrt(2.0 / (static_cast<double>(ic) * kK * kK));
    for (double& w : model.conv_w[l]) w = std * rng.gaussian();
    ic = config.conv_channels[l];
  }
  double std1 = std::sqrt(2.0 / static_cast<double>(fc_in));
  for (double& w : model.fc1_w) w = std1 * rng.gaussian();
  double std2 = std::sqrt(2.0 / static_cast<double>(hidden));
  for (double& w : model.fc2_w) w = std2 * rng.gaussian();
  return model;
}

std::vector<double> standardize(const LogMelSpectrogram& spec) {
  if (spec.values.empty()) {
    throw std::invalid_argument("empty spectrogram");
  }
  double mean = 0.0;
  for (double v : spec.values) mean += v;
  mean /= static_cast<double>(spec.values.size());
  double var = 0.0;
  for (double v : spec.values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(spec.values.size());
  double inv_std = 1.0 / std::sqrt(std::max(var, kVarFloor));

  std::vector<double> out(spec.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (spec.values[i] - mean) * inv_std;
  }
  return out;
}

std::vector<std::vector<double>> forward(const CnnModel& model,
                                         const std::vector<InputView>& batch) {
  check_views(model, batch);
  std::vector<std::vector<double>> outs(batch.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(batch.size()); ++i) {
    auto g = make_geometry(model.config, batch[i].n_frames);
    SampleCache cache;
    forward_sample(model, g, batch[i].data, cache, false);
    outs[i] = std::move(cache.out);
  }
  return outs;
}

double bce_loss(const std::vector<std::vector<double>>& probs,
                const std::vector<std::vector<double>>& targets) {
  if (probs.size() != targets.size() || probs.empty()) {
    throw std::invalid_argument("bce_loss: size mismatch or empty input");
  }
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i].size() != targets[i].size() || probs[i].empty()) {
      throw std::invalid_argument("bce_loss: head count mismatch");
    }
    for (std::size_t j = 0; j < probs[i].size(); ++j) {
      double p = std::clamp(probs[i][j], kProbClamp, 1.0 - kProbClamp);
      double t = targets[i][j];
      acc -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
      ++n;
    }
  }
  return acc / static_cast<double>(n);
}

double mse_loss(const std::vector<std::vector<double>>& preds,
                const std::vector<std::vector<double>>& targets) {
  if (preds.size() != targets.size() || preds.empty()) {
    throw std::invalid_argument("mse_loss: size mismatch or empty input");
  }
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].size() != targets[i].size() || preds[i].empty()) {
      throw std::invalid_argument("mse_loss: head count mismatch");
    }
    for (std::size_t j = 0; j < preds[i].size(); ++j) {
      double d = preds[i][j] - targets[i][j];
      acc += d * d;
      ++n;
    }
  }
  return acc / static_cast<double>(n);
}

BackwardResult backward(const CnnModel& model,
                        const std::vector<InputView>& batch,
                        const std::vector<std::vector<double>>& targets) {
  check_views(model, batch);
  if (targets.size() != batch.size()) {
    throw std::invalid_argument("backward: targets do not match batch");
  }
  std::size_t heads = model.config.heads.size();
  for (const auto& t : targets) {
    if (t.size() != heads) {
      throw std::invalid_argument("backward: target head count mismatch");
    }
  }

  BlockLayout layout = block_layout(model);
  std::size_t b = batch.size();
  double denom = static_cast<double>(b * heads);

  std::vector<std::vector<double>> outs(b);
  std::vector<std::vector<double>> sample_grads(b);

#pragma omp parallel for schedule(static)
  for (long i = 0; i < static_cast<long>(b); ++i) {
    auto g = make_geometry(model.config, batch[i].n_frames);
    SampleCache cache;
    forward_sample(model, g, batch[i].data, cache, true);

    std::vector<double> d_out(heads);
    for (std::size_t j = 0; j < heads; ++j) {
      double t = targets[i][j];
      if (model.config.task == Task::kClassification) {
        double p = cache.out[j];
        // Outside the clamp band the loss is flat in p.
        d_out[j] = (p < kProbClamp || p > 1.0 - kProbClamp)
                       ? 0.0
                       : (p - t) / denom;
      } else {
        d_out[j] = 2.0 * (cache.out[j] - t) / denom;
      }
    }

    sample_grads[i].assign(layout.total, 0.0);
    backward_sample(model, g, batch[i].data, cache, d_out, layout,
                    sample_grads[i].data());
    outs[i] = std::move(cache.out);
  }

  // Sequential reduction in sample order keeps results bitwise identical
  // for any worker count.
  BackwardResult result;
  result.grads.blocks.resize(layout.sizes.size());
  for (std::size_t k = 0; k < layout.sizes.size(); ++k) {
    result.grads.blocks[k].assign(layout.sizes[k], 0.0);
  }
  for (std::size_t i = 0; i < b; ++i) {
    const double* src = sample_grads[i].data();
    for (std::size_t k = 0; k < layout.sizes.size(); ++k) {
      double* dst = result.grads.blocks[k].data();
      const double* s = src + layout.offsets[k];
      for (std::size_t j = 0; j < layout.sizes[k]; ++j) dst[j] += s[j];
    }
  }

  result.loss = loss_for_task(model.config.task, outs, targets);
  result.outputs = std::move(outs);
  return result;
}

AdamState make_adam_state(const CnnModel& model) {
  AdamState state;
  for (const auto* b : model.param_blocks()) {
    state.m.emplace_back(b->size(), 0.0);
    state.v.emplace_back(b->size(), 0.0);
  }
  return state;
}

void adam_step(CnnModel& model, const Gradients& grads, AdamState& state,
               double learning_rate) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  auto blocks = model.param_blocks();
  if (grads.blocks.size() != blocks.size() ||
      state.m.size() != blocks.size()) {
    throw std::invalid_argument("adam_step: gradient/state layout mismatch");
  }
  state.step += 1;
  double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    std::vector<double>& p = *blocks[k];
    const std::vector<double>& g = grads.blocks[k];
    if (g.size() != p.size()) {
      throw std::invalid_argument("adam_step: gradient block size mismatch");
    }
    std::vector<double>& m = state.m[k];
    std::vector<double>& v = state.v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      p[i] -= learning_rate * mhat / (std::sqrt(vhat) + kEps);
    }
  }
}

TrainResult train(const ModelConfig& model_config,
                  const std::vector<TrainExample>& train_set,
                  const std::vector<TrainExample>& val_set,
                  const TrainConfig& cfg) {
  validate_model_config(model_config);
  if (train_set.empty() || val_set.empty()) {
    throw std::invalid_argument("train and val sets must be non-empty");
  }
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (cfg.max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
  if (cfg.patience < 1 || cfg.patience >= cfg.max_epochs) {
    throw std::invalid_argument("need 1 <= patience < max_epochs");
  }
  if (cfg.learning_rate < 0.0) {
    throw std::invalid_argument("learning_rate must be >= 0");
  }
  std::size_t heads = model_config.heads.size();
  auto check_examples = [&](const std::vector<TrainExample>& set,
                            const char* which) {
    for (const auto& ex : set) {
      if (ex.spec == nullptr) {
        throw std::invalid_argument(std::string(which) +
                                    " example has no spectrogram");
      }
      if (ex.targets.size() != heads) {
        throw std::invalid_argument(std::string(which) +
                                    " example target count mismatch");
      }
      if (model_config.task == Task::kClassification) {
        for (double t : ex.targets) {
          if (t != 0.0 && t != 1.0) {
            throw std::invalid_argument(
                "classification targets must be 0 or 1");
          }
        }
      }
    }
  };
  check_examples(train_set, "train");
  check_examples(val_set, "val");

  // Regression targets are standardized per head by training-set stats;
  // classification targets pass through (stats pinned to 0/1).
  std::vector<double> t_mean(heads, 0.0), t_std(heads, 1.0);
  if (model_config.task == Task::kRegression) {
    for (std::size_t j = 0; j < heads; ++j) {
      double mean = 0.0;
      for (const auto& ex : train_set) mean += ex.targets[j];
      mean /= static_cast<double>(train_set.size());
      double var = 0.0;
      for (const auto& ex : train_set) {
        double d = ex.targets[j] - mean;
        var += d * d;
      }
      var /= static_cast<double>(train_set.size());
      t_mean[j] = mean;
      t_std[j] = std::sqrt(std::max(var, kVarFloor));
    }
  }
  auto std_targets = [&](const std::vector<TrainExample>& set) {
    std::vector<std::vector<double>> out(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
      out[i].resize(heads);
      for (std::size_t j = 0; j < heads; ++j) {
        out[i][j] = (set[i].targets[j] - t_mean[j]) / t_std[j];
      }
    }
    return out;
  };
  std::vector<std::vector<double>> train_targets = std_targets(train_set);
  std::vector<std::vector<double>> val_targets = std_targets(val_set);

  CnnModel model = init_model(model_config, cfg.seed);
  AdamState adam = make_adam_state(model);
  bool classification = model_config.task == Task::kClassification;

  TrainResult result;
  double best_metric = classification ? -1.0
                                      : std::numeric_limits<double>::max();
  int epochs_since_improve = 0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng shuffle_rng(Rng::derive(
        cfg.seed, {kShuffleStream, static_cast<std::uint64_t>(epoch)}));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t end = std::min(order.size(),
                                 start + static_cast<std::size_t>(
                                             cfg.batch_size));
      std::size_t bn = end - start;

      std::vector<std::vector<double>> inputs(bn);
      std::vector<InputView> views(bn);
      std::vector<std::vector<double>> targets(bn);
#pragma omp parallel for schedule(static)
      for (long k = 0; k < static_cast<long>(bn); ++k) {
        std::size_t idx = order[start + static_cast<std::size_t>(k)];
        // Substream keyed by the clip's dataset index so augmentation is
        // reproducible regardless of batch composition.
        Rng aug_rng(Rng::derive(cfg.seed,
                                {kAugmentStream,
                                 static_cast<std::uint64_t>(epoch),
                                 static_cast<std::uint64_t>(idx)}));
        LogMelSpectrogram aug =
            spec_augment(*train_set[idx].spec, cfg.augment, aug_rng);
        aug = add_gaussian_noise(aug, cfg.augment.noise_std_frac, aug_rng);
        inputs[k] = standardize(aug);
        views[k] = {inputs[k].data(), aug.n_mels, aug.n_frames};
        targets[k] = train_targets[idx];
      }

      BackwardResult bw = backward(model, views, targets);
      if (!std::isfinite(bw.loss)) {
        throw std::runtime_error(
            "training loss went non-finite at epoch " +
            std::to_string(epoch) + ", batch starting at sample " +
            std::to_string(start) + " (seed " + std::to_string(cfg.seed) +
            ")");
      }
      adam_step(model, bw.grads, adam, cfg.learning_rate);
      loss_sum += bw.loss * static_cast<double>(bn);
    }
    double train_loss = loss_sum / static_cast<double>(order.size());

    // Validation pass: standardize only, no augmentation.
    std::vector<std::vector<double>> val_outs(val_set.size());
    for (std::size_t start = 0; start < val_set.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t end = std::min(val_set.size(),
                                 start + static_cast<std::size_t>(
                                             cfg.batch_size));
      std::size_t bn = end - start;
      std::vector<std::vector<double>> inputs(bn);
      std::vector<InputView> views(bn);
#pragma omp parallel for schedule(static)
      for (long k = 0; k < static_cast<long>(bn); ++k) {
        const LogMelSpectrogram& spec =
            *val_set[start + static_cast<std::size_t>(k)].spec;
        inputs[k] = standardize(spec);
        views[k] = {inputs[k].data(), spec.n_mels, spec.n_frames};
      }
      auto outs = forward(model, views);
      for (std::size_t k = 0; k < bn; ++k) {
        val_outs[start + k] = std::move(outs[k]);
      }
    }

    double metric;
    if (classification) {
      double f1_sum = 0.0;
      for (std::size_t j = 0; j < heads; ++j) {
        std::vector<bool> preds(val_set.size()), labels(val_set.size());
        for (std::size_t i = 0; i < val_set.size(); ++i) {
          preds[i] = val_outs[i][j] > 0.5;
          labels[i] = val_targets[i][j] != 0.0;
        }
        long tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < preds.size(); ++i) {
          if (preds[i] && labels[i]) ++tp;
          else if (preds[i]) ++fp;
          else if (labels[i]) ++fn;
        }
        long den = 2 * tp + fp + fn;
        f1_sum += den == 0 ? 0.0
                           : 2.0 * static_cast<double>(tp) /
                                 static_cast<double>(den);
      }
      metric = f1_sum / static_cast<double>(heads);
    } else {
      metric = mse_loss(val_outs, val_targets);
    }

    bool improved =
        classification ? metric > best_metric : metric < best_metric;
    if (improved) {
      best_metric = metric;
      epochs_since_improve = 0;
      result.best.params.clear();
      result.best.params.reserve(model.n_params());
      for (const auto* blk : model.param_blocks()) {
        result.best.params.insert(result.best.params.end(), blk->begin(),
                                  blk->end());
      }
      result.best.metric_value = metric;
      result.best.best_epoch = epoch;
    } else {
      ++epochs_since_improve;
    }
    result.history.push_back({epoch, train_loss, metric, improved});
    if (epochs_since_improve >= cfg.patience) break;
  }

  result.best.config = model_config;
  result.best.seed = cfg.seed;
  result.best.selection_metric = classification ? "f1" : "mse";
  result.best.target_means = t_mean;
  result.best.target_stds = t_std;
  return result;
}

namespace {

constexpr char kMagic[4] = {'G', 'W', 'X', '1'};

void put_u32le(std::string& s, std::uint32_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
  s.push_back(static_cast<char>((v >> 16) & 0xff));
  s.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f64le(std::string& s, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  for (int i = 0; i < 8; ++i) {
    s.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
}

double get_f64le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  }
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

std::string join_strings(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += v[i];
  }
  return s;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += format_double(v[i]);
  }
  return s;
}

std::vector<std::string> split_list(const std::string& s) {
  return split_fields(s);
}

const char* const kFixedKeys[] = {
    "format",       "task",        "heads",       "conv_channels",
    "fc_hidden",    "n_mels",      "seed",        "selection_metric",
    "metric_value", "best_epoch",  "target_means", "target_stds"};

bool is_fixed_key(const std::string& k) {
  for (const char* f : kFixedKeys) {
    if (k == f) return true;
  }
  return false;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  validate_model_config(ckpt.config);
  std::size_t heads = ckpt.config.heads.size();
  if (ckpt.target_means.size() != heads || ckpt.target_stds.size() != heads) {
    throw std::invalid_argument("checkpoint target stats do not match heads");
  }

  std::string meta;
  meta += "format=1\n";
  meta += std::string("task=") + task_name(ckpt.config.task) + "\n";
  meta += "heads=" + join_strings(ckpt.config.heads) + "\n";
  meta += "conv_channels=" +
          join_csv_ints(ckpt.config.conv_channels.data(), 4) + "\n";
  meta += "fc_hidden=" + std::to_string(ckpt.config.fc_hidden) + "\n";
  meta += "n_mels=" + std::to_string(ckpt.config.n_mels) + "\n";
  meta += "seed=" + std::to_string(ckpt.seed) + "\n";
  meta += "selection_metric=" + ckpt.selection_metric + "\n";
  meta += "metric_value=" + format_double(ckpt.metric_value) + "\n";
  meta += "best_epoch=" + std::to_string(ckpt.best_epoch) + "\n";
  meta += "target_means=" + join_doubles(ckpt.target_means) + "\n";
  meta += "target_stds=" + join_doubles(ckpt.target_stds) + "\n";
  for (const auto& [k, v] : ckpt.extra) {
    if (k.empty() || is_fixed_key(k) ||
        k.find_first_of("=\n") != std::string::npos ||
        v.find('\n') != std::string::npos) {
      throw std::invalid_argument("bad checkpoint metadata key: " + k);
    }
    meta += k + "=" + v + "\n";
  }

  if (ckpt.params.size() != param_count(ckpt.config)) {
    throw std::invalid_argument(
        "checkpoint parameter count mismatch: have " +
        std::to_string(ckpt.params.size()) + ", config wants " +
        std::to_string(param_count(ckpt.config)));
  }

  std::string out;
  out.reserve(4 + 4 + meta.size() + 8 * ckpt.params.size());
  out.append(kMagic, 4);
  put_u32le(out, static_cast<std::uint32_t>(meta.size()));
  out += meta;
  for (double p : ckpt.params) put_f64le(out, p);
  write_text_file(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::string raw = read_text_file(path);
  if (raw.size() < 8 || std::memcmp(raw.data(), kMagic, 4) != 0) {
    throw std::runtime_error(path + ": not a model checkpoint (bad magic)");
  }
  const unsigned char* p = reinterpret_cast<const unsigned char*>(raw.data());
  std::uint32_t meta_len = static_cast<std::uint32_t>(p[4]) |
                           (static_cast<std::uint32_t>(p[5]) << 8) |
                           (static_cast<std::uint32_t>(p[6]) << 16) |
                           (static_cast<std::uint32_t>(p[7]) << 24);
  if (raw.size() < 8 + static_cast<std::size_t>(meta_len)) {
    throw std::runtime_error(path + ": truncated checkpoint metadata");
  }

  std::map<std::string, std::string> kv;
  Checkpoint ckpt;
  std::string meta = raw.substr(8, meta_len);
  std::size_t pos = 0;
  while (pos < meta.size()) {
    std::size_t eol = meta.find('\n', pos);
    if (eol == std::string::npos) {
      throw std::runtime_error(path + ": unterminated metadata line");
    }
    std::string line = meta.substr(pos, eol - pos);
    pos = eol + 1;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw std::runtime_error(path + ": malformed metadata line: " + line);
    }
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    if (is_fixed_key(key)) {
      if (!kv.emplace(key, value).second) {
        throw std::runtime_error(path + ": duplicate metadata key: " + key);
      }
    } else {
      ckpt.extra.emplace_back(key, value);
    }
  }

  auto need = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) {
      throw std::runtime_error(path + ": missing metadata key: " +
                               std::string(key));
    }
    return it->second;
  };

  if (need("format") != "1") {
    throw std::runtime_error(path + ": unsupported checkpoint format " +
                             need("format"));
  }
  ckpt.config.task = task_from_name(need("task"));
  ckpt.config.heads = split_list(need("heads"));
  auto channels = split_list(need("conv_channels"));
  if (channels.size() != 4) {
    throw std::runtime_error(path + ": conv_channels needs 4 entries");
  }
  for (int l = 0; l < 4; ++l) {
    ckpt.config.conv_channels[l] =
        static_cast<int>(parse_int(channels[l], "conv_channels"));
  }
  ckpt.config.fc_hidden =
      static_cast<int>(parse_int(need("fc_hidden"), "fc_hidden"));
  ckpt.config.n_mels = static_cast<int>(parse_int(need("n_mels"), "n_mels"));
  ckpt.seed = static_cast<std::uint64_t>(parse_int(need("seed"), "seed"));
  ckpt.selection_metric = need("selection_metric");
  ckpt.metric_value = parse_double(need("metric_value"), "metric_value");
  ckpt.best_epoch =
      static_cast<int>(parse_int(need("best_epoch"), "best_epoch"));
  for (const auto& s : split_list(need("target_means"))) {
    ckpt.target_means.push_back(parse_double(s, "target_means"));
  }
  for (const auto& s : split_list(need("target_stds"))) {
    ckpt.target_stds.push_back(parse_double(s, "target_stds"));
  }
  validate_model_config(ckpt.config);
  if (ckpt.target_means.size() != ckpt.config.heads.size() ||
      ckpt.target_stds.size() != ckpt.config.heads.size()) {
    throw std::runtime_error(path + ": target stats do not match heads");
  }

  std::size_t n_params = param_count(ckpt.config);
  std::size_t payload = raw.size() - 8 - meta_len;
  if (payload != 8 * n_params) {
    throw std::runtime_error(
        path + ": parameter payload is " + std::to_string(payload) +
        " bytes, config wants " + std::to_string(8 * n_params));
  }
  ckpt.params.resize(n_params);
  const unsigned char* params_p = p + 8 + meta_len;
  for (std::size_t i = 0; i < n_params; ++i) {
    ckpt.params[i] = get_f64le(params_p + 8 * i);
  }
  return ckpt;
}

CnnModel model_from_checkpoint(const Checkpoint& ckpt) {
  CnnModel model = make_sized_model(ckpt.config);
  if (ckpt.params.size() != model.n_params()) {
    throw std::invalid_argument("checkpoint parameter count mismatch");
  }
  std::size_t off = 0;
  for (auto* blk : model.param_blocks()) {
    std::copy(ckpt.params.begin() + static_cast<std::ptrdiff_t>(off),
              ckpt.params.begin() + static_cast<std::ptrdiff_t>(off) +
                  static_cast<std::ptrdiff_t>(blk->size()),
              blk->begin());
    off += blk->size();
  }
  return model;
}

std::vector<std::vector<double>> predict(const Checkpoint& ckpt,
                                         const std::vector<InputView>& batch) {
  CnnModel model = model_from_checkpoint(ckpt);
  auto outs = forward(model, batch);
  if (ckpt.config.task == Task::kRegression) {
    for (auto& row : outs) {
      for (std::size_t j = 0; j < row.size(); ++j) {
        row[j] = row[j] * ckpt.target_stds[j] + ckpt.target_means[j];
      }
    }
  }
  return outs;
}

}  // namespace geowx

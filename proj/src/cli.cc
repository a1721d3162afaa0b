// src/cli.cc

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

#include "geowx/cli.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"

#include "geowx/attenuation.hpp"
#include "geowx/audio_io.hpp"
#include "geowx/csvio.hpp"
#include "geowx/datasets.hpp"
#include "geowx/eval.hpp"
#include "geowx/features.hpp"
#include "geowx/nn.hpp"
#include "geowx/synth.hpp"
#include "geowx/timeutil.hpp"
#include "geowx/weather.hpp"

namespace geowx::cli {
namespace {

namespace fs = std::filesystem;

std::string fmt4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

// Paths inside CSV files are relative to the file that names them.
std::string resolve_path(const std::string& csv_path, const std::string& rel) {
  fs::path p(rel);
  if (p.is_absolute()) return rel;
  return (fs::path(csv_path).parent_path() / p).generic_string();
}

std::string sanitize_field(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

double weak_value(const LabeledClip& clip, const std::string& head) {
  if (head == "rain") return clip.weak.rainfall;
  if (head == "wind") return clip.weak.wind_speed;
  if (head == "temperature") return clip.weak.temperature;
  if (head == "humidity") return clip.weak.rel_humidity;
  throw std::invalid_argument("unknown head name: " + head);
}

std::optional<bool> strong_value(const LabeledClip& clip,
                                 const std::string& head) {
  if (head == "rain") return clip.rain_strong;
  if (head == "wind") return clip.wind_strong;
  return std::nullopt;
}

// Loads precomputed spectrograms or computes them from the referenced
// wav files. Only `wanted` slots of the result are filled.
std::vector<LogMelSpectrogram> materialize_features(
    const std::vector<LabeledClip>& clips,
    const std::vector<std::size_t>& wanted, const std::string& labeled_path,
    const std::string& features_dir, const StftConfig& stft, int n_mels) {
  std::vector<LogMelSpectrogram> specs(clips.size());
  std::exception_ptr eptr = nullptr;
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t wi = 0; wi < static_cast<std::int64_t>(wanted.size());
       ++wi) {
    try {
      const LabeledClip& c = clips[wanted[wi]];
      LogMelSpectrogram spec;
      if (!features_dir.empty()) {
        spec = load_spectrogram(
            (fs::path(features_dir) / (c.clip_id + ".spec")).string());
        if (spec.n_mels != n_mels) {
          throw std::invalid_argument(
              "spectrogram for " + c.clip_id + " has " +
              std::to_string(spec.n_mels) + " mel bands, model wants " +
              std::to_string(n_mels));
        }
      } else {
        Waveform wf = read_wav(resolve_path(labeled_path, c.wav_path));
        AudioClip clip = make_clip(std::move(wf.samples), wf.sample_rate,
                                   c.site_id, c.start_time);
        spec = log_mel(clip, n_mels, stft);
      }
      specs[wanted[wi]] = std::move(spec);
    } catch (...) {
#pragma omp critical
      if (eptr == nullptr) eptr = std::current_exception();
    }
  }
  if (eptr != nullptr) std::rethrow_exception(eptr);
  return specs;
}

// ---------------------------------------------------------------- synth

struct SynthOpts {
  std::string out;
  ScenarioConfig cfg;
  bool no_smear = false;
};

void add_synth(CLI::App& app, SynthOpts& o) {
  auto* c = app.add_subcommand(
      "synth", "generate a synthetic labeled corpus with known truth");
  c->add_option("--out", o.out, "output directory")->required();
  c->add_option("--seed", o.cfg.seed, "rng seed");
  c->add_option("--sites", o.cfg.n_sites, "number of recording sites");
  c->add_option("--hours", o.cfg.hours, "scenario length in hours");
  c->add_option("--clips-per-hour", o.cfg.clips_per_hour,
                "clips recorded per site-hour");
  c->add_option("--sample-rate", o.cfg.sample_rate, "audio sample rate, Hz");
  c->add_option("--clip-len", o.cfg.clip_len_s, "clip length, seconds");
  c->add_option("--rain-prob", o.cfg.rain_hour_prob,
                "probability an hour has rain");
  c->add_option("--rain-min", o.cfg.rain_rate_min, "min rain rate, mm/hr");
  c->add_option("--rain-max", o.cfg.rain_rate_max, "max rain rate, mm/hr");
  c->add_option("--wind-min", o.cfg.wind_base_min, "min site wind mean, m/s");
  c->add_option("--wind-max", o.cfg.wind_base_max, "max site wind mean, m/s");
  c->add_option("--wind-threshold", o.cfg.wind_event_threshold,
                "wind speed labeled as an event, m/s");
  c->add_option("--sigma-rel", o.cfg.error_model.sigma_rel,
                "relative noise on weak labels");
  c->add_option("--fp-rate", o.cfg.error_model.light_rain_fp_rate,
                "false drizzle rate on dry hours");
  c->add_flag("--no-smear", o.no_smear,
              "disable sub-hour temporal smearing of rain");
}

void run_synth(const SynthOpts& o) {
  ScenarioConfig cfg = o.cfg;
  cfg.error_model.temporal_smear = !o.no_smear;
  SynthCorpus corpus = synth_corpus(cfg);
  write_corpus(corpus, o.out, cfg.seed);
  std::cout << "synth: " << corpus.clips.size() << " clips, " << cfg.n_sites
            << " sites x " << cfg.hours << " hours -> " << o.out << "\n";
}

// --------------------------------------------------------------- ingest

struct IngestOpts {
  std::string audio_dir;
  std::string sites_path;
  std::string out;
  int clip_len_s = 10;
  double max_clipped = 0.2;
};

void add_ingest(CLI::App& app, IngestOpts& o) {
  auto* c = app.add_subcommand(
      "ingest", "segment raw recordings into clips and build a manifest");
  c->add_option("--audio-dir", o.audio_dir,
                "directory of SITE_YYYYMMDD_HHMMSS.wav recordings")
      ->required();
  c->add_option("--sites", o.sites_path,
                "CSV of site coordinates (site_id,lat,lon)")
      ->required();
  c->add_option("--out", o.out, "output directory")->required();
  c->add_option("--clip-len", o.clip_len_s, "clip length, seconds");
  c->add_option("--max-clipped", o.max_clipped,
                "drop clips with at least this clipped fraction");
}

void run_ingest(const IngestOpts& o) {
  CsvTable sites = read_csv(o.sites_path);
  std::size_t id_c = sites.col("site_id");
  std::size_t lat_c = sites.col("lat");
  std::size_t lon_c = sites.col("lon");
  std::map<std::string, std::pair<double, double>> coords;
  for (const auto& row : sites.rows) {
    coords[row[id_c]] = {parse_double(row[lat_c], "lat"),
                         parse_double(row[lon_c], "lon")};
  }

  std::vector<std::string> wavs;
  for (const auto& ent : fs::directory_iterator(o.audio_dir)) {
    if (ent.is_regular_file() && ent.path().extension() == ".wav") {
      wavs.push_back(ent.path().string());
    }
  }
  std::sort(wavs.begin(), wavs.end());

  fs::create_directories(fs::path(o.out) / "wavs");
  std::vector<ManifestEntry> entries;
  std::set<std::string> seen;
  std::size_t skipped = 0;
  std::size_t dropped = 0;
  for (const std::string& path : wavs) {
    std::string name = fs::path(path).filename().string();
    auto info = parse_clip_filename(name);
    if (!info) {
      std::cerr << "ingest: skipping " << name
                << " (name is not SITE_YYYYMMDD_HHMMSS.wav)\n";
      ++skipped;
      continue;
    }
    auto it = coords.find(info->site_id);
    if (it == coords.end()) {
      throw std::invalid_argument("site " + info->site_id + " (from " + name +
                                  ") is not in " + o.sites_path);
    }
    Waveform wf = read_wav(path);
    wf.site_id = info->site_id;
    wf.start_time = info->start_time;
    std::vector<AudioClip> clips = segment(wf, o.clip_len_s);
    std::size_t before = clips.size();
    clips = filter_clipped(std::move(clips), o.max_clipped);
    dropped += before - clips.size();
    for (const AudioClip& clip : clips) {
      std::string fname = make_clip_filename(clip.site_id, clip.start_time);
      std::string clip_id = fname.substr(0, fname.size() - 4);
      if (!seen.insert(clip_id).second) {
        throw std::invalid_argument("duplicate clip id " + clip_id +
                                    "; overlapping recordings?");
      }
      write_wav((fs::path(o.out) / "wavs" / fname).string(), clip.samples,
                clip.sample_rate);
      ManifestEntry e;
      e.clip_id = clip_id;
      e.site_id = clip.site_id;
      e.start_time = clip.start_time;
      e.wav_path = "wavs/" + fname;
      e.lat = it->second.first;
      e.lon = it->second.second;
      entries.push_back(std::move(e));
    }
  }
  std::sort(entries.begin(), entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) {
              return a.clip_id < b.clip_id;
            });
  save_manifest((fs::path(o.out) / "manifest.csv").string(), entries);
  std::cout << "ingest: kept " << entries.size() << " clips (" << dropped
            << " clipped, " << skipped << " files skipped) -> " << o.out
            << "\n";
}

// ------------------------------------------------------------- features

struct FeaturesOpts {
  std::string manifest;
  std::string out;
  int n_mels = 128;
  StftConfig stft;
};

void add_features(CLI::App& app, FeaturesOpts& o) {
  auto* c = app.add_subcommand(
      "features", "precompute log-mel spectrograms for a manifest");
  c->add_option("--manifest", o.manifest, "clip manifest CSV")->required();
  c->add_option("--out", o.out, "output directory")->required();
  c->add_option("--n-mels", o.n_mels, "mel bands");
  c->add_option("--frame-len", o.stft.frame_len_s, "analysis window, seconds");
  c->add_option("--frame-hop", o.stft.frame_hop_s, "hop, seconds");
}

void run_features(const FeaturesOpts& o) {
  std::vector<ManifestEntry> entries = load_manifest(o.manifest);
  fs::create_directories(o.out);
  std::exception_ptr eptr = nullptr;
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(entries.size());
       ++i) {
    try {
      const ManifestEntry& e = entries[i];
      Waveform wf = read_wav(resolve_path(o.manifest, e.wav_path));
      AudioClip clip = make_clip(std::move(wf.samples), wf.sample_rate,
                                 e.site_id, e.start_time);
      LogMelSpectrogram spec = log_mel(clip, o.n_mels, o.stft);
      save_spectrogram((fs::path(o.out) / (e.clip_id + ".spec")).string(),
                       spec);
    } catch (...) {
#pragma omp critical
      if (eptr == nullptr) eptr = std::current_exception();
    }
  }
  if (eptr != nullptr) std::rethrow_exception(eptr);

  std::string index = "clip_id,spec_path\n";
  for (const ManifestEntry& e : entries) {
    index += e.clip_id + "," + e.clip_id + ".spec\n";
  }
  write_text_file((fs::path(o.out) / "features.csv").string(), index);
  std::cout << "features: " << entries.size() << " spectrograms (" << o.n_mels
            << " mels) -> " << o.out << "\n";
}

// ---------------------------------------------------------------- align

struct AlignOpts {
  std::string manifest;
  std::string grid;
  std::string out;
};

void add_align(CLI::App& app, AlignOpts& o) {
  auto* c = app.add_subcommand(
      "align", "join clips to the weather cell-hour covering each start");
  c->add_option("--manifest", o.manifest, "clip manifest CSV")->required();
  c->add_option("--grid", o.grid, "hourly weather grid CSV")->required();
  c->add_option("--out", o.out, "output directory")->required();
}

void run_align(const AlignOpts& o) {
  std::vector<ManifestEntry> entries = load_manifest(o.manifest);
  WeatherGrid grid = load_grid(o.grid);
  LabeledDataset ds = build_dataset(entries, grid);

  fs::create_directories(o.out);
  fs::path manifest_dir = fs::absolute(fs::path(o.manifest)).parent_path();
  fs::path out_dir = fs::absolute(o.out);
  for (LabeledClip& clip : ds.clips) {
    fs::path p(clip.wav_path);
    if (!p.is_absolute()) {
      clip.wav_path =
          fs::relative(manifest_dir / p, out_dir).generic_string();
    }
  }
  save_labeled((fs::path(o.out) / "labeled.csv").string(), ds.clips);

  std::string rej = "clip_id,reason\n";
  for (const RejectedClip& r : ds.rejects) {
    rej += r.clip_id + "," + sanitize_field(r.reason) + "\n";
  }
  write_text_file((fs::path(o.out) / "rejects.csv").string(), rej);
  std::cout << "align: labeled " << ds.clips.size() << " clips, rejected "
            << ds.rejects.size() << " -> " << o.out << "/labeled.csv\n";
}

// ---------------------------------------------------------------- split

struct SplitOpts {
  std::string labeled;
  std::string out;
  std::uint64_t seed = 0;
  double train_frac = 0.6;
  double val_frac = 0.2;
  double test_frac = 0.2;
};

void add_split(CLI::App& app, SplitOpts& o) {
  auto* c = app.add_subcommand(
      "split", "assign whole sites to train/val/test partitions");
  c->add_option("--labeled", o.labeled, "labeled clip CSV")->required();
  c->add_option("--out", o.out, "output split CSV path")->required();
  c->add_option("--seed", o.seed, "rng seed");
  c->add_option("--train-frac", o.train_frac, "target train clip fraction");
  c->add_option("--val-frac", o.val_frac, "target val clip fraction");
  c->add_option("--test-frac", o.test_frac, "target test clip fraction");
}

void run_split(const SplitOpts& o) {
  std::vector<LabeledClip> clips = load_labeled(o.labeled);
  SplitSpec split = site_exclusive_split(
      clips, {o.train_frac, o.val_frac, o.test_frac}, o.seed);
  if (fs::path(o.out).has_parent_path()) {
    fs::create_directories(fs::path(o.out).parent_path());
  }
  save_split(o.out, split);
  std::cout << "split:";
  for (Partition p : {Partition::kTrain, Partition::kVal, Partition::kTest}) {
    std::size_t n_sites = 0;
    for (const auto& [site, part] : split.assignment) {
      if (part == p) ++n_sites;
    }
    std::cout << " " << partition_name(p) << " " << n_sites << " sites/"
              << partition_indices(clips, split, p).size() << " clips";
  }
  std::cout << " -> " << o.out << "\n";
}

// ------------------------------------------------------------- baseline

struct BaselineOpts {
  std::string labeled;
  std::string split;
  std::string variable = "rain";
  std::string out;
  double step = 0.001;
};

void add_baseline(CLI::App& app, BaselineOpts& o) {
  auto* c = app.add_subcommand(
      "baseline",
      "sweep a weak-label threshold on train, score it on test truth");
  c->add_option("--labeled", o.labeled, "labeled clip CSV")->required();
  c->add_option("--split", o.split, "split CSV")->required();
  c->add_option("--variable", o.variable, "rain or wind");
  c->add_option("--step", o.step, "threshold sweep step");
  c->add_option("--out", o.out, "optional result CSV path");
}

// Weak values and strong labels for one partition; throws if any strong
// label is missing.
void gather_weak_strong(const std::vector<LabeledClip>& clips,
                        const std::vector<std::size_t>& idx,
                        const std::string& head, std::vector<double>* values,
                        std::vector<bool>* labels) {
  values->clear();
  labels->clear();
  for (std::size_t i : idx) {
    std::optional<bool> s = strong_value(clips[i], head);
    if (!s) {
      throw std::invalid_argument("clip " + clips[i].clip_id + " has no " +
                                  head +
                                  "_strong label; reference labels are "
                                  "required here");
    }
    values->push_back(weak_value(clips[i], head));
    labels->push_back(*s);
  }
}

void run_baseline(const BaselineOpts& o) {
  WeatherVar var = weather_var_from_name(o.variable);
  std::string head = weather_var_name(var);
  std::vector<LabeledClip> clips = load_labeled(o.labeled);
  SplitSpec split = load_split(o.split);
  std::vector<std::size_t> train_idx =
      partition_indices(clips, split, Partition::kTrain);
  std::vector<std::size_t> test_idx =
      partition_indices(clips, split, Partition::kTest);

  std::vector<double> train_v, test_v;
  std::vector<bool> train_y, test_y;
  gather_weak_strong(clips, train_idx, head, &train_v, &train_y);
  gather_weak_strong(clips, test_idx, head, &test_v, &test_y);

  SweepResult sweep = threshold_sweep(train_v, train_y, o.step);
  BaselineResult res = baseline_evaluate(sweep, test_v, test_y);

  if (!o.out.empty()) {
    std::string csv = "variable,threshold,train_f1,test_f1,test_auc\n";
    csv += head + "," + format_double(res.best_threshold) + "," +
           format_double(res.train_f1) + "," + format_double(res.test_f1) +
           "," + format_double(res.test_auc) + "\n";
    if (fs::path(o.out).has_parent_path()) {
      fs::create_directories(fs::path(o.out).parent_path());
    }
    write_text_file(o.out, csv);
  }
  std::cout << "baseline " << head << ": threshold="
            << format_double(res.best_threshold)
            << " train_f1=" << fmt4(res.train_f1)
            << " test_f1=" << fmt4(res.test_f1)
            << " test_auc=" << fmt4(res.test_auc) << "\n";
}

// ---------------------------------------------------------------- train

struct TrainOpts {
  std::string labeled;
  std::string split;
  std::string out;
  std::string features_dir;
  std::string task = "classification";
  std::vector<std::string> heads = {"rain"};
  std::vector<std::string> thresholds;
  std::vector<int> conv_channels = {32, 32, 64, 64};
  int fc_hidden = 256;
  int n_mels = 128;
  StftConfig stft;
  TrainConfig tcfg;
};

void add_train(CLI::App& app, TrainOpts& o) {
  auto* c = app.add_subcommand(
      "train", "train a CNN on weak hourly labels with early stopping");
  c->add_option("--labeled", o.labeled, "labeled clip CSV")->required();
  c->add_option("--split", o.split, "split CSV")->required();
  c->add_option("--out", o.out, "output directory")->required();
  c->add_option("--features", o.features_dir,
                "precomputed spectrogram directory (else computed from wavs)");
  c->add_option("--task", o.task, "classification or regression");
  c->add_option("--heads", o.heads,
                "output heads: rain,wind,temperature,humidity")
      ->delimiter(',');
  c->add_option("--threshold", o.thresholds,
                "per-head binarization, e.g. rain=0.1 (classification)")
      ->delimiter(',');
  c->add_option("--conv-channels", o.conv_channels,
                "channels of the four conv blocks")
      ->delimiter(',');
  c->add_option("--fc-hidden", o.fc_hidden, "hidden units after pooling");
  c->add_option("--n-mels", o.n_mels, "mel bands");
  c->add_option("--frame-len", o.stft.frame_len_s, "analysis window, seconds");
  c->add_option("--frame-hop", o.stft.frame_hop_s, "hop, seconds");
  c->add_option("--seed", o.tcfg.seed, "rng seed");
  c->add_option("--batch-size", o.tcfg.batch_size, "minibatch size");
  c->add_option("--lr", o.tcfg.learning_rate, "Adam learning rate");
  c->add_option("--max-epochs", o.tcfg.max_epochs, "epoch cap");
  c->add_option("--patience", o.tcfg.patience,
                "epochs without improvement before stopping");
  c->add_option("--aug-prob", o.tcfg.augment.apply_prob,
                "per-clip augmentation probability");
  c->add_option("--freq-masks", o.tcfg.augment.n_freq_masks,
                "frequency masks per augmented clip");
  c->add_option("--freq-width", o.tcfg.augment.max_freq_mask_bins,
                "max mel bands per frequency mask");
  c->add_option("--time-masks", o.tcfg.augment.n_time_masks,
                "time masks per augmented clip");
  c->add_option("--time-width", o.tcfg.augment.max_time_mask_frames,
                "max frames per time mask");
  c->add_option("--noise-frac", o.tcfg.augment.noise_std_frac,
                "gaussian noise std as a fraction of spectrogram std");
}

std::map<std::string, double> parse_thresholds(
    const std::vector<std::string>& items) {
  std::map<std::string, double> out;
  for (const std::string& item : items) {
    std::size_t eq = item.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
      throw std::invalid_argument("--threshold wants HEAD=VALUE, got: " +
                                  item);
    }
    out[item.substr(0, eq)] =
        parse_double(item.substr(eq + 1), "threshold value");
  }
  return out;
}

void run_train(const TrainOpts& o) {
  ModelConfig mcfg;
  if (o.conv_channels.size() != 4) {
    throw std::invalid_argument("--conv-channels wants exactly 4 values");
  }
  std::copy(o.conv_channels.begin(), o.conv_channels.end(),
            mcfg.conv_channels.begin());
  mcfg.fc_hidden = o.fc_hidden;
  mcfg.n_mels = o.n_mels;
  mcfg.heads = o.heads;
  mcfg.task = task_from_name(o.task);
  validate_model_config(mcfg);

  std::map<std::string, double> thresholds = parse_thresholds(o.thresholds);
  for (const auto& [head, v] : thresholds) {
    if (std::find(o.heads.begin(), o.heads.end(), head) == o.heads.end()) {
      throw std::invalid_argument("--threshold names head '" + head +
                                  "' which is not in --heads");
    }
    (void)v;
  }
  if (mcfg.task == Task::kClassification) {
    thresholds.try_emplace("rain", 0.1);
    thresholds.try_emplace("wind", 3.0);
    for (const std::string& head : o.heads) {
      if (thresholds.find(head) == thresholds.end()) {
        throw std::invalid_argument("classification head '" + head +
                                    "' needs --threshold " + head + "=VALUE");
      }
    }
  }

  std::vector<LabeledClip> clips = load_labeled(o.labeled);
  SplitSpec split = load_split(o.split);
  std::vector<std::size_t> train_idx =
      partition_indices(clips, split, Partition::kTrain);
  std::vector<std::size_t> val_idx =
      partition_indices(clips, split, Partition::kVal);
  if (train_idx.empty() || val_idx.empty()) {
    throw std::invalid_argument("train or val partition is empty");
  }

  std::vector<std::size_t> wanted = train_idx;
  wanted.insert(wanted.end(), val_idx.begin(), val_idx.end());
  std::vector<LogMelSpectrogram> specs = materialize_features(
      clips, wanted, o.labeled, o.features_dir, o.stft, o.n_mels);

  auto make_examples = [&](const std::vector<std::size_t>& idx) {
    std::vector<TrainExample> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) {
      TrainExample ex;
      ex.spec = &specs[i];
      for (const std::string& head : o.heads) {
        double v = weak_value(clips[i], head);
        if (mcfg.task == Task::kClassification) {
          ex.targets.push_back(v > thresholds.at(head) ? 1.0 : 0.0);
        } else {
          ex.targets.push_back(v);
        }
      }
      out.push_back(std::move(ex));
    }
    return out;
  };
  std::vector<TrainExample> train_set = make_examples(train_idx);
  std::vector<TrainExample> val_set = make_examples(val_idx);

  TrainResult result = train(mcfg, train_set, val_set, o.tcfg);

  result.best.extra.emplace_back("frame_len_s",
                                 format_double(o.stft.frame_len_s));
  result.best.extra.emplace_back("frame_hop_s",
                                 format_double(o.stft.frame_hop_s));
  if (mcfg.task == Task::kClassification) {
    for (const std::string& head : o.heads) {
      result.best.extra.emplace_back("bin_" + head,
                                     format_double(thresholds.at(head)));
    }
  }

  fs::create_directories(o.out);
  save_checkpoint((fs::path(o.out) / "model.gwx").string(), result.best);

  std::string hist = "# seed=" + std::to_string(o.tcfg.seed) + "\n";
  hist += "epoch,train_loss,val_metric,improved\n";
  for (const EpochStats& s : result.history) {
    hist += std::to_string(s.epoch) + "," + format_double(s.train_loss) + "," +
            format_double(s.val_metric) + "," + (s.improved ? "1" : "0") +
            "\n";
  }
  write_text_file((fs::path(o.out) / "history.csv").string(), hist);

  std::cout << "train: " << result.history.size() << " epochs, best epoch "
            << result.best.best_epoch << " (" << result.best.selection_metric
            << "=" << fmt4(result.best.metric_value) << ") -> " << o.out
            << "/model.gwx\n";
}

// ------------------------------------------------------------- evaluate

struct EvalOpts {
  std::string checkpoint;
  std::string labeled;
  std::string split;
  std::string out;
  std::string features_dir;
  std::string partition = "test";
  bool with_baseline = false;
  double step = 0.001;
};

void add_evaluate(CLI::App& app, EvalOpts& o) {
  auto* c = app.add_subcommand(
      "evaluate", "score a checkpoint against reference labels");
  c->add_option("--checkpoint", o.checkpoint, "model checkpoint")->required();
  c->add_option("--labeled", o.labeled, "labeled clip CSV")->required();
  c->add_option("--split", o.split, "split CSV")->required();
  c->add_option("--out", o.out, "output directory")->required();
  c->add_option("--features", o.features_dir,
                "precomputed spectrogram directory");
  c->add_option("--partition", o.partition, "partition to score");
  c->add_flag("--with-baseline", o.with_baseline,
              "also score the swept weak-label threshold baseline");
  c->add_option("--step", o.step, "baseline sweep step");
}

double extra_double(const Checkpoint& ckpt, const std::string& key,
                    double fallback) {
  for (const auto& [k, v] : ckpt.extra) {
    if (k == key) return parse_double(v, key.c_str());
  }
  return fallback;
}

void run_evaluate(const EvalOpts& o) {
  Checkpoint ckpt = load_checkpoint(o.checkpoint);
  std::vector<LabeledClip> clips = load_labeled(o.labeled);
  SplitSpec split = load_split(o.split);
  Partition part = partition_from_name(o.partition);
  std::vector<std::size_t> idx = partition_indices(clips, split, part);
  std::vector<std::size_t> train_idx =
      partition_indices(clips, split, Partition::kTrain);
  if (idx.empty()) {
    throw std::invalid_argument("partition " + o.partition + " is empty");
  }

  StftConfig stft;
  stft.frame_len_s = extra_double(ckpt, "frame_len_s", stft.frame_len_s);
  stft.frame_hop_s = extra_double(ckpt, "frame_hop_s", stft.frame_hop_s);
  std::vector<LogMelSpectrogram> specs = materialize_features(
      clips, idx, o.labeled, o.features_dir, stft, ckpt.config.n_mels);

  std::vector<std::vector<double>> standardized(idx.size());
  std::vector<InputView> views(idx.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t k = 0; k < static_cast<std::int64_t>(idx.size()); ++k) {
    const LogMelSpectrogram& spec = specs[idx[k]];
    standardized[k] = standardize(spec);
    views[k] = {standardized[k].data(), spec.n_mels, spec.n_frames};
  }
  std::vector<std::vector<double>> preds = predict(ckpt, views);

  fs::create_directories(o.out);
  const std::string kind =
      ckpt.config.heads.size() > 1 ? "shared" : "individual";
  std::string csv, table;
  if (ckpt.config.task == Task::kClassification) {
    std::vector<ClassificationRow> rows;
    for (std::size_t h = 0; h < ckpt.config.heads.size(); ++h) {
      const std::string& head = ckpt.config.heads[h];
      if (!strong_value(clips[idx[0]], head)) {
        std::cout << "evaluate: no reference labels for head '" << head
                  << "', skipping\n";
        continue;
      }
      std::vector<bool> truth;
      std::vector<double> scores;
      std::vector<bool> hard;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        std::optional<bool> s = strong_value(clips[idx[k]], head);
        if (!s) {
          throw std::invalid_argument("clip " + clips[idx[k]].clip_id +
                                      " has no " + head + "_strong label");
        }
        truth.push_back(*s);
        scores.push_back(preds[k][h]);
        hard.push_back(preds[k][h] > 0.5);
      }
      if (o.with_baseline) {
        std::vector<double> train_v, test_v;
        std::vector<bool> train_y;
        gather_weak_strong(clips, train_idx, head, &train_v, &train_y);
        for (std::size_t k : idx) test_v.push_back(weak_value(clips[k], head));
        SweepResult sweep = threshold_sweep(train_v, train_y, o.step);
        BaselineResult base = baseline_evaluate(sweep, test_v, truth);
        rows.push_back({head, "baseline", base.best_threshold, base.test_auc,
                        base.test_f1});
      }
      ClassificationRow row;
      row.class_name = head;
      row.model_kind = kind;
      double bin = extra_double(ckpt, "bin_" + head, -1.0);
      if (bin >= 0.0) row.threshold = bin;
      row.auc = auc_score(scores, truth);
      row.f1 = f1_score(hard, truth);
      rows.push_back(std::move(row));
    }
    csv = classification_csv(rows);
    table = classification_table(rows);
  } else {
    std::vector<RegressionRow> rows;
    for (std::size_t h = 0; h < ckpt.config.heads.size(); ++h) {
      const std::string& head = ckpt.config.heads[h];
      std::vector<double> targets, model_preds, train_targets;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        targets.push_back(weak_value(clips[idx[k]], head));
        model_preds.push_back(preds[k][h]);
      }
      for (std::size_t i : train_idx) {
        train_targets.push_back(weak_value(clips[i], head));
      }
      RegressionRow row;
      row.variable = head;
      row.model_kind = kind;
      row.model_rmse = rmse(model_preds, targets);
      row.baseline_rmse = constant_baseline_rmse(train_targets, targets);
      row.change_pct = change_pct(row.model_rmse, row.baseline_rmse);
      rows.push_back(std::move(row));
    }
    csv = regression_csv(rows);
    table = regression_table(rows);
  }
  write_text_file((fs::path(o.out) / "report.csv").string(), csv);
  write_text_file((fs::path(o.out) / "report.txt").string(), table);
  std::cout << "evaluate: " << o.partition << " partition, " << idx.size()
            << " clips\n"
            << table;
}

// ---------------------------------------------------------- attenuation

struct AttenOpts {
  double temp_c = 20.0;
  double rh_pct = 50.0;
  double pressure_kpa = 101.325;
  double distance_km = 0.0;
  std::vector<double> freqs;
};

void add_attenuation(CLI::App& app, AttenOpts& o) {
  auto* c = app.add_subcommand(
      "attenuation", "print atmospheric absorption for pure tones");
  c->add_option("--temp", o.temp_c, "air temperature, deg C")->required();
  c->add_option("--rh", o.rh_pct, "relative humidity, percent")->required();
  c->add_option("--pressure", o.pressure_kpa, "ambient pressure, kPa");
  c->add_option("--distance", o.distance_km,
                "optional path length for a total-loss column, km");
  c->add_option("--freq", o.freqs, "frequencies in Hz")->delimiter(',');
}

void run_attenuation(const AttenOpts& o) {
  std::vector<double> freqs = o.freqs;
  if (freqs.empty()) {
    freqs = {125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0};
  }
  AtmosphereState atm{o.temp_c, o.rh_pct, o.pressure_kpa};
  std::cout << "atmosphere: " << format_double(o.temp_c) << " C, "
            << format_double(o.rh_pct) << "% rh, "
            << format_double(o.pressure_kpa) << " kPa\n";
  char buf[128];
  for (double f : freqs) {
    double a = absorption_db_per_km(f, atm);
    if (o.distance_km > 0.0) {
      std::snprintf(buf, sizeof(buf), "%9.1f Hz %12.4f dB/km %12.4f dB\n", f,
                    a, a * o.distance_km);
    } else {
      std::snprintf(buf, sizeof(buf), "%9.1f Hz %12.4f dB/km\n", f, a);
    }
    std::cout << buf;
  }
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"weak-label acoustic weather toolkit"};
  app.set_config("--config", "", "read options from an INI file");
  int workers = 0;
  app.add_option("--workers", workers,
                 "worker threads (0 keeps the library default)");
  app.require_subcommand(0, 1);

  SynthOpts synth_o;
  IngestOpts ingest_o;
  FeaturesOpts features_o;
  AlignOpts align_o;
  SplitOpts split_o;
  BaselineOpts baseline_o;
  TrainOpts train_o;
  EvalOpts eval_o;
  AttenOpts atten_o;
  add_synth(app, synth_o);
  add_ingest(app, ingest_o);
  add_features(app, features_o);
  add_align(app, align_o);
  add_split(app, split_o);
  add_baseline(app, baseline_o);
  add_train(app, train_o);
  add_evaluate(app, eval_o);
  add_attenuation(app, atten_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (workers > 0) {
#ifdef _OPENMP
    omp_set_num_threads(workers);
#endif
  }

  try {
    if (app.got_subcommand("synth")) {
      run_synth(synth_o);
    } else if (app.got_subcommand("ingest")) {
      run_ingest(ingest_o);
    } else if (app.got_subcommand("features")) {
      run_features(features_o);
    } else if (app.got_subcommand("align")) {
      run_align(align_o);
    } else if (app.got_subcommand("split")) {
      run_split(split_o);
    } else if (app.got_subcommand("baseline")) {
      run_baseline(baseline_o);
    } else if (app.got_subcommand("train")) {
      run_train(train_o);
    } else if (app.got_subcommand("evaluate")) {
      run_evaluate(eval_o);
    } else if (app.got_subcommand("attenuation")) {
      run_attenuation(atten_o);
    } else {
      std::cout << app.help();
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

int dispatch(const std::vector<std::string>& args) {
  std::vector<std::string> full;
  full.reserve(args.size() + 1);
  full.emplace_back("geowx");
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  argv.reserve(full.size());
  for (const std::string& s : full) argv.push_back(s.c_str());
  return dispatch(static_cast<int>(argv.size()), argv.data());
}

}  // namespace geowx::cli

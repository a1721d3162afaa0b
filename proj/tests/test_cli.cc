// tests/test_cli.cc

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

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "geowx/cli.hpp"
#include "geowx/datasets.hpp"
#include "geowx/nn.hpp"
#include "test_util.hpp"

using namespace geowx;
using geowx::testing::TempDir;
using geowx::testing::read_bytes;
using geowx::testing::write_bytes;

namespace fs = std::filesystem;

namespace {

// Redirects a stream into a buffer for the lifetime of the object.
struct Capture {
  explicit Capture(std::ostream& os) : os_(os), old_(os.rdbuf(buf_.rdbuf())) {}
  ~Capture() { os_.rdbuf(old_); }
  std::string str() const { return buf_.str(); }

 private:
  std::ostream& os_;
  std::ostringstream buf_;
  std::streambuf* old_;
};

int run(const std::vector<std::string>& args) { return cli::dispatch(args); }

// Runs with both streams muted and returns the exit code.
int run_quiet(const std::vector<std::string>& args) {
  Capture out(std::cout);
  Capture err(std::cerr);
  return cli::dispatch(args);
}

bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

std::size_t count_files(const fs::path& dir, const std::string& ext) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ext) ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("help exits zero and lists every subcommand") {
  Capture out(std::cout);
  Capture err(std::cerr);
  CHECK(run({"--help"}) == 0);
  std::string text = out.str();
  for (const char* sub : {"synth", "ingest", "features", "align", "split",
                          "baseline", "train", "evaluate", "attenuation"}) {
    CHECK_MESSAGE(contains(text, sub), "help is missing: " << sub);
  }
}

TEST_CASE("no arguments prints help and succeeds") {
  Capture out(std::cout);
  Capture err(std::cerr);
  CHECK(run({}) == 0);
  CHECK(contains(out.str(), "baseline"));
}

TEST_CASE("bad invocations exit 1") {
  CHECK(run_quiet({"frobnicate"}) == 1);         // unknown subcommand
  CHECK(run_quiet({"--bogus-flag"}) == 1);       // unknown option
  CHECK(run_quiet({"synth"}) == 1);              // missing required --out
  CHECK(run_quiet({"attenuation", "--temp", "9.3"}) == 1);  // missing --rh
}

TEST_CASE("attenuation prints a coefficient table") {
  Capture out(std::cout);
  CHECK(run({"attenuation", "--temp", "9.3", "--rh", "77"}) == 0);
  std::string text = out.str();
  CHECK(contains(text, "dB/km"));
  CHECK(contains(text, "125.0 Hz"));
  CHECK(contains(text, "4000.0 Hz"));
  CHECK(contains(text, "31.08"));  // 4 kHz cell for this atmosphere

  Capture out2(std::cout);
  CHECK(run({"attenuation", "--temp", "9.3", "--rh", "77", "--distance", "2",
             "--freq", "500,4000"}) == 0);
  std::string text2 = out2.str();
  CHECK(contains(text2, "500.0 Hz"));
  CHECK_FALSE(contains(text2, "125.0 Hz"));
  CHECK(contains(text2, " dB\n"));  // total-loss column present
}

TEST_CASE("attenuation rejects an impossible atmosphere with exit 1") {
  CHECK(run_quiet({"attenuation", "--temp", "-300", "--rh", "50"}) == 1);
  CHECK(run_quiet({"attenuation", "--temp", "10", "--rh", "140"}) == 1);
}

TEST_CASE("config file supplies option values") {
  TempDir td;
  std::string ini = td.file("geowx.ini");
  write_bytes(ini,
              "[attenuation]\n"
              "temp=9.3\n"
              "rh=77\n");
  Capture out(std::cout);
  Capture err(std::cerr);
  CHECK(run({"--config", ini, "attenuation"}) == 0);
  CHECK(contains(out.str(), "31.08"));
}

TEST_CASE("pipeline runs end to end through the dispatcher") {
  TempDir td;
  std::string corpus = td.file("corpus");
  std::string feats = td.file("feats");
  std::string aligned = td.file("aligned");
  std::string split_csv = td.file("split.csv");
  std::string labeled = aligned + "/labeled.csv";

  REQUIRE(run_quiet({"synth", "--out", corpus, "--sites", "4", "--hours", "8",
                     "--seed", "11"}) == 0);
  CHECK(fs::exists(corpus + "/manifest.csv"));
  CHECK(fs::exists(corpus + "/grid.csv"));
  CHECK(count_files(corpus + "/wavs", ".wav") == 4 * 8 * 8);

  REQUIRE(run_quiet({"features", "--manifest", corpus + "/manifest.csv",
                     "--out", feats, "--n-mels", "16"}) == 0);
  CHECK(fs::exists(feats + "/features.csv"));
  CHECK(count_files(feats, ".spec") == 4 * 8 * 8);

  REQUIRE(run_quiet({"align", "--manifest", corpus + "/manifest.csv", "--grid",
                     corpus + "/grid.csv", "--out", aligned}) == 0);
  CHECK(fs::exists(labeled));
  CHECK(fs::exists(aligned + "/rejects.csv"));
  std::vector<LabeledClip> clips = load_labeled(labeled);
  CHECK(clips.size() == 4 * 8 * 8);

  {
    Capture out(std::cout);
    REQUIRE(run({"split", "--labeled", labeled, "--out", split_csv}) == 0);
    CHECK(contains(out.str(), "train"));
  }
  CHECK(fs::exists(split_csv));

  {
    Capture out(std::cout);
    std::string bl_csv = td.file("baseline.csv");
    REQUIRE(run({"baseline", "--labeled", labeled, "--split", split_csv,
                 "--variable", "rain", "--out", bl_csv}) == 0);
    CHECK(contains(out.str(), "baseline rain:"));
    CHECK(contains(read_bytes(bl_csv),
                   "variable,threshold,train_f1,test_f1,test_auc"));
  }

  // Tiny classifier: enough to prove the plumbing, not to learn anything.
  std::string model_dir = td.file("model");
  REQUIRE(run_quiet({"train", "--labeled", labeled, "--split", split_csv,
                     "--out", model_dir, "--features", feats, "--heads",
                     "rain", "--conv-channels", "2,2,2,2", "--fc-hidden", "8",
                     "--n-mels", "16", "--max-epochs", "2", "--patience", "1",
                     "--batch-size", "8", "--seed", "7"}) == 0);
  CHECK(fs::exists(model_dir + "/model.gwx"));
  std::string hist = read_bytes(model_dir + "/history.csv");
  CHECK(contains(hist, "# seed=7"));
  CHECK(contains(hist, "epoch,train_loss,val_metric,improved"));

  Checkpoint ckpt = load_checkpoint(model_dir + "/model.gwx");
  CHECK(ckpt.config.heads == std::vector<std::string>{"rain"});
  bool saw_default_threshold = false;
  for (const auto& [k, v] : ckpt.extra) {
    if (k == "bin_rain") saw_default_threshold = (v == "0.1");
  }
  CHECK(saw_default_threshold);

  std::string rep_dir = td.file("report");
  {
    Capture out(std::cout);
    REQUIRE(run({"evaluate", "--checkpoint", model_dir + "/model.gwx",
                 "--labeled", labeled, "--split", split_csv, "--out", rep_dir,
                 "--features", feats, "--partition", "test",
                 "--with-baseline"}) == 0);
    CHECK(contains(out.str(), "rain"));
  }
  std::string report = read_bytes(rep_dir + "/report.csv");
  CHECK(contains(report, "rain,baseline,"));
  CHECK(contains(report, "rain,individual,"));
  CHECK(fs::exists(rep_dir + "/report.txt"));

  // Regression heads share one trunk and get a constant-baseline column.
  std::string reg_dir = td.file("reg_model");
  REQUIRE(run_quiet({"train", "--labeled", labeled, "--split", split_csv,
                     "--out", reg_dir, "--features", feats, "--task",
                     "regression", "--heads", "temperature,humidity",
                     "--conv-channels", "2,2,2,2", "--fc-hidden", "8",
                     "--n-mels", "16", "--max-epochs", "2", "--patience", "1",
                     "--batch-size", "8"}) == 0);
  std::string reg_rep = td.file("reg_report");
  REQUIRE(run_quiet({"evaluate", "--checkpoint", reg_dir + "/model.gwx",
                     "--labeled", labeled, "--split", split_csv, "--out",
                     reg_rep, "--features", feats}) == 0);
  std::string reg_csv = read_bytes(reg_rep + "/report.csv");
  CHECK(contains(reg_csv, "temperature,shared,"));
  CHECK(contains(reg_csv, "humidity,shared,"));

  // Argument validation surfaces as exit 1, runtime damage as exit 2.
  CHECK(run_quiet({"train", "--labeled", labeled, "--split", split_csv,
                   "--out", td.file("bad"), "--conv-channels", "1,2"}) == 1);
  std::string garbage = td.file("garbage.gwx");
  write_bytes(garbage, "not a checkpoint");
  CHECK(run_quiet({"evaluate", "--checkpoint", garbage, "--labeled", labeled,
                   "--split", split_csv, "--out", td.file("g")}) == 2);
}

TEST_CASE("worker count option is accepted") {
  Capture out(std::cout);
  CHECK(run({"--workers", "1", "attenuation", "--temp", "0", "--rh", "50"}) ==
        0);
  CHECK(contains(out.str(), "dB/km"));
}

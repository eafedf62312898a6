/* Copyright 2026 The mespot Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Drives the mespot binary end to end on a tiny dataset.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "mespot/mefs.h"
#include "test_util.h"

namespace mespot {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

RunResult RunCli(const std::string& args) {
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path() / "mespot_cli_io";
  fs::create_directories(dir);
  const fs::path out = dir / ("out" + std::to_string(counter) + ".txt");
  const fs::path err = dir / ("err" + std::to_string(counter) + ".txt");
  ++counter;
  const std::string cmd = std::string("\"") + MESPOT_CLI_PATH + "\" " + args + " >\"" +
                          out.string() + "\" 2>\"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = Slurp(out);
  r.err = Slurp(err);
  return r;
}

// Every regular file under `root`, keyed by relative path.
std::map<std::string, std::string> Snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) {
      files[fs::relative(e.path(), root).string()] = Slurp(e.path());
    }
  }
  return files;
}

const char* kTinySynth =
    "--set synth.num_videos=3 --set synth.num_subjects=3 "
    "--set synth.frames_per_video=120 --set synth.rng_seed=4";
const char* kTinyTrain = "--set train.epochs=2 --set train.max_lr=0.003";

fs::path TinyDataset(const std::string& name) {
  const fs::path dir = testing::TempDir(name);
  const RunResult r = RunCli("synth " + std::string(kTinySynth) + " --out \"" +
                             (dir / "data").string() + "\"");
  REQUIRE(r.code == 0);
  return dir;
}

TEST_CASE("cli synth: manifest, determinism and emotion range") {
  const fs::path dir = testing::TempDir("cli_synth");
  const RunResult a = RunCli("synth --set synth.num_videos=6 --set synth.num_subjects=3 "
                             "--out \"" + (dir / "a").string() + "\"");
  REQUIRE(a.code == 0);
  CHECK(a.out.find("videos 6") != std::string::npos);
  CHECK(a.out.find("blinks") != std::string::npos);
  const json manifest = json::parse(Slurp(dir / "a" / "manifest.json"));
  CHECK(manifest.at("videos").size() == 6);

  const RunResult b = RunCli("synth --set synth.num_videos=6 --set synth.num_subjects=3 "
                             "--out \"" + (dir / "b").string() + "\"");
  REQUIRE(b.code == 0);
  CHECK(Snapshot(dir / "a") == Snapshot(dir / "b"));

  std::set<int> emotions;
  for (const AnnotatedVideo& v : LoadDataset(dir / "a" / "manifest.json")) {
    for (const auto& iv : v.intervals) {
      if (iv.kind == ExpressionKind::kMicro) emotions.insert(iv.emotion);
    }
  }
  REQUIRE_FALSE(emotions.empty());
  CHECK(*emotions.begin() >= 1);
  CHECK(*emotions.rbegin() <= 4);
}

TEST_CASE("cli train: one checkpoint per subject, reproducible") {
  const fs::path dir = TinyDataset("cli_train");
  const std::string data = (dir / "data" / "manifest.json").string();
  const RunResult a = RunCli("train " + std::string(kTinyTrain) + " --data \"" + data +
                             "\" --out \"" + (dir / "run_a").string() + "\"");
  REQUIRE(a.code == 0);
  int checkpoints = 0;
  for (const auto& e : fs::directory_iterator(dir / "run_a" / "folds")) {
    CHECK(fs::exists(e.path() / "model.ckpt"));
    CHECK(fs::exists(e.path() / "loss.csv"));
    ++checkpoints;
  }
  CHECK(checkpoints == 3);
  const json prov = json::parse(Slurp(dir / "run_a" / "run.json"));
  CHECK(prov.contains("config_hash"));
  CHECK(prov.contains("versions"));

  const RunResult b = RunCli("train " + std::string(kTinyTrain) + " --jobs 2 --data \"" +
                             data + "\" --out \"" + (dir / "run_b").string() + "\"");
  REQUIRE(b.code == 0);
  for (const auto& e : fs::directory_iterator(dir / "run_a" / "folds")) {
    const fs::path other = dir / "run_b" / "folds" / e.path().filename();
    CHECK(Slurp(e.path() / "model.ckpt") == Slurp(other / "model.ckpt"));
  }
  CHECK(Snapshot(dir / "run_a" / "results") == Snapshot(dir / "run_b" / "results"));
}

TEST_CASE("cli train: truncated flow payload reports the file") {
  const fs::path dir = TinyDataset("cli_corrupt");
  fs::path victim;
  for (const auto& e : fs::recursive_directory_iterator(dir / "data")) {
    if (e.path().filename() == "flow.bin") {
      victim = e.path();
      break;
    }
  }
  REQUIRE_FALSE(victim.empty());
  fs::resize_file(victim, fs::file_size(victim) - 7);
  const RunResult r = RunCli("train " + std::string(kTinyTrain) + " --data \"" +
                             (dir / "data" / "manifest.json").string() + "\" --out \"" +
                             (dir / "run").string() + "\"");
  CHECK(r.code == 1);
  CHECK(r.err.find(victim.parent_path().filename().string()) != std::string::npos);
}

TEST_CASE("cli infer: zero-flow video, streaming and curves") {
  const fs::path dir = TinyDataset("cli_infer");
  REQUIRE(RunCli("train " + std::string(kTinyTrain) + " --data \"" +
                 (dir / "data" / "manifest.json").string() + "\" --out \"" +
                 (dir / "run").string() + "\"")
              .code == 0);
  const fs::path ckpt = fs::directory_iterator(dir / "run" / "folds")->path() / "model.ckpt";

  AnnotatedVideo zero = testing::SmallVideo(90, 12, 1);
  zero.video_id = "zero";
  zero.flow.values.setZero();
  SaveMefs(zero, dir / "zero");
  const std::string base =
      "infer --checkpoint \"" + ckpt.string() + "\" --video \"" + (dir / "zero").string() + "\"";
  const RunResult z = RunCli(base);
  REQUIRE(z.code == 0);
  const json zj = json::parse(z.out);
  CHECK(zj.at("video_id") == "zero");
  CHECK(zj.at("intervals").is_array());

  const fs::path video = dir / "data" / LoadManifest(dir / "data" / "manifest.json").at(0).dir;
  const std::string args = "infer --checkpoint \"" + ckpt.string() + "\" --video \"" +
                           video.string() + "\"";
  const RunResult batch = RunCli(args + " --emit-curves \"" + (dir / "curves.csv").string() + "\"");
  const RunResult stream = RunCli(args + " --stream");
  REQUIRE(batch.code == 0);
  REQUIRE(stream.code == 0);
  CHECK(batch.out == stream.out);

  std::istringstream csv(Slurp(dir / "curves.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line.rfind("frame,spot,p0", 0) == 0);
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == LoadMefs(video).flow.num_frames());

  AnnotatedVideo narrow = testing::SmallVideo(20, 3, 2);
  SaveMefs(narrow, dir / "narrow");
  const RunResult bad = RunCli("infer --checkpoint \"" + ckpt.string() + "\" --video \"" +
                               (dir / "narrow").string() + "\"");
  CHECK(bad.code == 1);
}

TEST_CASE("cli eval and report") {
  const fs::path dir = TinyDataset("cli_eval");
  const fs::path run = dir / "run";
  REQUIRE(RunCli("train " + std::string(kTinyTrain) + " --data \"" +
                 (dir / "data" / "manifest.json").string() + "\" --out \"" + run.string() + "\"")
              .code == 0);
  const RunResult a = RunCli("eval --run \"" + run.string() + "\"");
  REQUIRE(a.code == 0);
  const std::string first = Slurp(run / "eval" / "scoreboard.json");
  const RunResult b = RunCli("eval --run \"" + run.string() + "\"");
  REQUIRE(b.code == 0);
  CHECK(Snapshot(run / "eval").at("scoreboard.json") == first);
  CHECK(a.out == b.out);
  CHECK(fs::exists(run / "eval" / "confusion.csv"));
  CHECK(json::parse(first).at("num_videos") == 3);

  REQUIRE(RunCli("eval --no-synergy --run \"" + run.string() + "\"").code == 0);
  CHECK(fs::exists(run / "eval_no_synergy" / "scoreboard.txt"));

  const RunResult rep = RunCli("report --run \"" + run.string() + "\"");
  REQUIRE(rep.code == 0);
  const std::string md = Slurp(run / "report.md");
  CHECK(md.find("config hash") != std::string::npos);
  CHECK(md.find("## Scores (eval)") != std::string::npos);
  CHECK(md.find("## Scores (eval_no_synergy)") != std::string::npos);

  // Empty every prediction: the scoreboard zeroes out and flags emptiness.
  for (const auto& e : fs::directory_iterator(run / "results")) {
    if (e.path().extension() != ".json") continue;
    json r = json::parse(Slurp(e.path()));
    r["intervals"] = json::array();
    std::ofstream(e.path()) << r.dump();
  }
  REQUIRE(RunCli("eval --run \"" + run.string() + "\" --out \"" + (dir / "empty").string() + "\"")
              .code == 0);
  const json empty = json::parse(Slurp(dir / "empty" / "scoreboard.json"));
  CHECK(empty.at("spotting").at("tp") == 0);
  CHECK(empty.at("spotting").at("f1") == 0.0);
  CHECK(empty.at("recognition").at("empty") == true);
  CHECK(empty.at("strs") == 0.0);

  fs::remove(fs::directory_iterator(run / "results")->path());
  CHECK(RunCli("eval --run \"" + run.string() + "\"").code == 1);
}

TEST_CASE("cli exit codes for usage and validation errors") {
  CHECK(RunCli("").code == 1);
  CHECK(RunCli("frobnicate").code == 1);
  CHECK(RunCli("--version").code == 0);
  const fs::path dir = testing::TempDir("cli_codes");
  CHECK(RunCli("synth --set synth.fps=-1 --out \"" + (dir / "x").string() + "\"").code == 1);
  CHECK(RunCli("synth --set synth.bogus=1 --out \"" + (dir / "x").string() + "\"").code == 1);
  CHECK(RunCli("train --data \"" + (dir / "missing.json").string() + "\" --out \"" +
               (dir / "r").string() + "\"")
            .code == 1);
}

}  // namespace
}  // namespace mespot

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

#include "commands.h"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "mespot/analysis.h"
#include "mespot/checkpoint.h"
#include "mespot/config.h"
#include "mespot/error.h"
#include "mespot/mefs.h"
#include "mespot/metrics.h"
#include "mespot/stream.h"
#include "mespot/synth.h"
#include "mespot/trainer.h"
#include "mespot/version.h"

namespace mespot::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kStreamTolerance = 1e-6;

std::string ReadText(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void WriteText(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

json ReadJson(const fs::path& path) {
  try {
    return json::parse(ReadText(path));
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

json LoadConfigDoc(const ConfigOptions& opts) {
  json doc = json::object();
  if (!opts.config_path.empty()) {
    try {
      doc = ReadJson(opts.config_path);
    } catch (const FormatError& e) {
      throw InvalidArgument(e.what());
    }
  }
  for (const auto& o : opts.overrides) ApplyOverride(doc, o);
  return doc;
}

RunConfig LoadRunConfig(const ConfigOptions& opts) {
  RunConfig cfg = RunConfig::FromJson(LoadConfigDoc(opts));
  cfg.Validate();
  return cfg;
}

json Provenance(const std::string& command, const RunConfig& cfg) {
  const json config = cfg.ToJson();
  return {{"tool", "mespot"},
          {"command", command},
          {"version", kVersion},
          {"config_hash", ConfigHash(config)},
          {"seeds", {{"train", cfg.train.rng_seed}, {"synth", cfg.synth.rng_seed}}},
          {"versions",
           {{"mespot", kVersion},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                          std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
            {"compiler", __VERSION__}}},
          {"config", config}};
}

// Scores are written at 1e-9 resolution so that batch and streamed runs,
// which agree far below that, serialize identically.
double Round9(double x) { return std::round(x * 1e9) / 1e9; }

json ResultJson(const std::string& video_id, const AnalysisResult& result) {
  json entries = json::array();
  for (const auto& a : result.audit) {
    json scores = json::array();
    for (Eigen::Index k = 0; k < a.mean_probs.size(); ++k) {
      scores.push_back(Round9(a.mean_probs[k]));
    }
    entries.push_back({{"onset", a.interval.onset},
                       {"offset", a.interval.offset},
                       {"peak", a.interval.peak},
                       {"peak_score", Round9(a.interval.peak_score)},
                       {"emotion", a.emotion},
                       {"mode_emotion", a.mode_emotion},
                       {"scores", scores},
                       {"synergy", SynergyDecisionName(a.decision)},
                       {"motion", Round9(a.motion)},
                       {"threshold", Round9(a.threshold)}});
  }
  return {{"video_id", video_id}, {"intervals", entries}};
}

std::string CurvesCsv(const ForwardOutput& out) {
  std::ostringstream os;
  os << "frame,spot";
  for (Eigen::Index k = 0; k < out.recog.cols(); ++k) os << ",p" << k;
  os << '\n' << std::setprecision(9);
  for (int t = 0; t < out.num_frames(); ++t) {
    os << t << ',' << out.spot[t];
    for (Eigen::Index k = 0; k < out.recog.cols(); ++k) os << ',' << out.recog(t, k);
    os << '\n';
  }
  return os.str();
}

void CheckChannels(const AnnotatedVideo& v, const ModelConfig& model) {
  if (v.flow.num_channels() != model.in_channels) {
    throw InvalidArgument("video " + v.video_id + " has " +
                          std::to_string(v.flow.num_channels()) +
                          " channels but the model expects " +
                          std::to_string(model.in_channels));
  }
}

std::string Fixed(double x, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << x;
  return os.str();
}

}  // namespace

int Synth(const SynthOptions& opts) {
  const RunConfig cfg = LoadRunConfig(opts.config);
  if (opts.out_dir.empty()) throw InvalidArgument("synth needs --out");
  const SynthDataset data = SynthGenerateDetailed(cfg.synth);
  SaveDataset(data.videos, opts.out_dir);
  WriteText(fs::path(opts.out_dir) / "run.json", Provenance("synth", cfg).dump(2) + "\n");

  int mes = 0, maes = 0, blinks = 0;
  for (size_t i = 0; i < data.videos.size(); ++i) {
    for (const auto& iv : data.videos[i].intervals) {
      (iv.kind == ExpressionKind::kMicro ? mes : maes) += 1;
    }
    blinks += static_cast<int>(data.blinks[i].size());
  }
  std::cout << "videos " << data.videos.size() << ", subjects "
            << std::min(cfg.synth.num_subjects, cfg.synth.num_videos) << ", MEs "
            << mes << ", MaEs " << maes << ", blinks " << blinks << "\n"
            << "manifest " << (fs::path(opts.out_dir) / "manifest.json").string()
            << "\n";
  return 0;
}

int Train(const TrainOptions& opts) {
  RunConfig cfg = LoadRunConfig(opts.config);
  const std::string data_path = opts.data.empty() ? cfg.dataset : opts.data;
  const std::string out_dir = opts.out_dir.empty() ? cfg.output_dir : opts.out_dir;
  if (data_path.empty()) throw InvalidArgument("train needs --data or dataset in the config");
  if (out_dir.empty()) throw InvalidArgument("train needs --out or output_dir in the config");
  if (opts.jobs) cfg.jobs = *opts.jobs;
  if (cfg.jobs < 1) throw InvalidArgument("--jobs must be >= 1");
  cfg.dataset = fs::absolute(data_path).lexically_normal().string();
  cfg.output_dir = out_dir;

  const std::vector<AnnotatedVideo> dataset = LoadDataset(cfg.dataset);
  for (const auto& v : dataset) CheckChannels(v, cfg.model);

  const LosoResult loso = RunLoso(dataset, cfg.model, cfg.train, cfg.jobs);

  const fs::path run(out_dir);
  json folds = json::array();
  for (size_t f = 0; f < loso.splits.size(); ++f) {
    const auto& split = loso.splits[f];
    const auto& fold = loso.folds[f];
    const fs::path dir = run / "folds" / split.held_out_subject;
    fs::create_directories(dir);
    SaveCheckpoint(fold.params, dir / "model.ckpt");
    WriteText(dir / "loss.csv", LossLogCsv(fold.log));
    folds.push_back({{"subject", split.held_out_subject},
                     {"steps", fold.steps},
                     {"test_videos", split.test_videos},
                     {"final_loss", fold.log.empty() ? 0.0 : fold.log.back().loss.total}});
    std::cout << "fold " << split.held_out_subject << ": " << fold.steps
              << " steps, loss " << Fixed(fold.log.front().loss.total) << " -> "
              << Fixed(fold.log.back().loss.total) << "\n";
  }
  for (const auto& v : dataset) {
    const ForwardOutput& out = loso.outputs.at(v.video_id);
    const AnalysisResult result = Analyze(out, v.flow, cfg.post);
    WriteText(run / "results" / (v.video_id + ".json"),
              ResultJson(v.video_id, result).dump(2) + "\n");
    if (opts.emit_curves) {
      WriteText(run / "results" / (v.video_id + ".curves.csv"), CurvesCsv(out));
    }
  }
  json prov = Provenance("train", cfg);
  prov["folds"] = folds;
  WriteText(run / "run.json", prov.dump(2) + "\n");
  std::cout << "run written to " << run.string() << "\n";
  return 0;
}

int Infer(const InferOptions& opts) {
  const json doc = LoadConfigDoc(opts.config);
  const PostConfig post =
      doc.contains("post") ? PostConfigFromJson(doc["post"]) : PostConfig{};
  post.Validate();
  const ModelParams params = LoadCheckpoint(opts.checkpoint);
  const AnnotatedVideo video = LoadMefs(opts.video_dir);
  CheckChannels(video, params.config);

  ForwardOutput out = ModelForward(video.flow, params, /*train_mode=*/false);
  if (opts.stream) {
    ForwardOutput streamed = StreamReplay(params, video.flow.values);
    const double diff = std::max((streamed.spot - out.spot).cwiseAbs().maxCoeff(),
                                 (streamed.recog - out.recog).cwiseAbs().maxCoeff());
    if (!(diff <= kStreamTolerance)) {
      throw NumericalError("streamed outputs differ from batch outputs by " +
                           std::to_string(diff));
    }
    out = std::move(streamed);
  }
  const AnalysisResult result = Analyze(out, video.flow, post);
  const std::string text = ResultJson(video.video_id, result).dump(2) + "\n";
  if (opts.out.empty()) {
    std::cout << text;
  } else {
    WriteText(opts.out, text);
  }
  if (!opts.curves_path.empty()) WriteText(opts.curves_path, CurvesCsv(out));
  return 0;
}

int Eval(const EvalOptions& opts) {
  const fs::path run(opts.run_dir);
  const json prov = ReadJson(run / "run.json");
  if (!prov.contains("config")) throw FormatError((run / "run.json").string() + ": no config");
  const RunConfig cfg = RunConfig::FromJson(prov["config"]);
  const std::string data_path = opts.data.empty() ? cfg.dataset : opts.data;
  const std::vector<AnnotatedVideo> dataset = LoadDataset(data_path);

  std::vector<VideoPrediction> predictions;
  for (const auto& v : dataset) {
    const fs::path file = run / "results" / (v.video_id + ".json");
    if (!fs::exists(file)) {
      throw InvalidArgument("missing predictions for video " + v.video_id + " (" +
                            file.string() + ")");
    }
    const json r = ReadJson(file);
    VideoPrediction p;
    p.video_id = v.video_id;
    try {
      for (const auto& e : r.at("intervals")) {
        const auto decision = ParseSynergyDecision(e.at("synergy").get<std::string>());
        const bool use = decision == SynergyDecision::kKept ||
                         (!opts.no_synergy && decision == SynergyDecision::kRelabeled);
        if (!use) continue;
        p.intervals.push_back({e.at("onset").get<int>(), e.at("offset").get<int>(),
                               e.at("peak_score").get<double>(),
                               e.at("emotion").get<int>()});
      }
    } catch (const json::exception& ex) {
      throw FormatError(file.string() + ": " + ex.what());
    }
    predictions.push_back(std::move(p));
  }
  const ScoreBoard board = EvaluateLoso(predictions, dataset, cfg.model.num_emotions);
  const fs::path out = opts.out_dir.empty()
                           ? run / (opts.no_synergy ? "eval_no_synergy" : "eval")
                           : fs::path(opts.out_dir);
  WriteText(out / "scoreboard.json", board.ToJson());
  WriteText(out / "scoreboard.txt", board.ToTable());
  WriteText(out / "confusion.csv", board.ConfusionCsv());
  std::cout << board.ToTable();
  return 0;
}

int Report(const ReportOptions& opts) {
  const fs::path run(opts.run_dir);
  const json prov = ReadJson(run / "run.json");
  std::ostringstream md;
  md << "# mespot run report\n\n"
     << "- version: " << prov.value("version", "?") << "\n"
     << "- config hash: " << prov.value("config_hash", "?") << "\n";
  if (prov.contains("config")) {
    const auto& c = prov["config"];
    md << "- dataset: " << c.value("dataset", "") << "\n"
       << "- epochs: " << c["train"].value("epochs", 0)
       << ", max_lr: " << c["train"].value("max_lr", 0.0)
       << ", seed: " << c["train"].value("rng_seed", 0) << "\n";
  }

  md << "\n## Folds\n\n| subject | steps | first epoch loss | last epoch loss |\n"
     << "|---|---|---|---|\n";
  const fs::path folds_dir = run / "folds";
  if (fs::exists(folds_dir)) {
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(folds_dir)) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
      std::istringstream csv(ReadText(dir / "loss.csv"));
      std::string line;
      std::getline(csv, line);  // header
      std::map<int, std::pair<double, int>> per_epoch;
      int steps = 0;
      while (std::getline(csv, line)) {
        std::vector<std::string> cols;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
        if (cols.size() != 6) throw FormatError((dir / "loss.csv").string() + ": bad row");
        auto& acc = per_epoch[std::stoi(cols[1])];
        acc.first += std::stod(cols[5]);
        acc.second += 1;
        ++steps;
      }
      auto mean = [](const std::pair<double, int>& a) { return a.first / a.second; };
      md << "| " << dir.filename().string() << " | " << steps << " | "
         << (per_epoch.empty() ? "-" : Fixed(mean(per_epoch.begin()->second))) << " | "
         << (per_epoch.empty() ? "-" : Fixed(mean(per_epoch.rbegin()->second))) << " |\n";
    }
  }

  std::map<std::string, int> decisions;
  int videos = 0;
  const fs::path results = run / "results";
  if (fs::exists(results)) {
    for (const auto& e : fs::directory_iterator(results)) {
      if (e.path().extension() != ".json") continue;
      ++videos;
      for (const auto& iv : ReadJson(e.path()).at("intervals")) {
        ++decisions[iv.at("synergy").get<std::string>()];
      }
    }
  }
  md << "\n## Candidates\n\n" << videos << " result files; kept " << decisions["kept"]
     << ", relabeled " << decisions["relabeled"] << ", rejected "
     << decisions["rejected"] << "\n";

  for (const char* name : {"eval", "eval_no_synergy"}) {
    const fs::path table = run / name / "scoreboard.txt";
    if (fs::exists(table)) {
      md << "\n## Scores (" << name << ")\n\n```\n" << ReadText(table) << "```\n";
    }
  }
  WriteText(run / "report.md", md.str());
  std::cout << md.str();
  return 0;
}

}  // namespace mespot::cli

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

#ifndef MESPOT_TOOLS_COMMANDS_H_
#define MESPOT_TOOLS_COMMANDS_H_

#include <optional>
#include <string>
#include <vector>

namespace mespot::cli {

// Options shared by every command that reads a run configuration.
struct ConfigOptions {
  std::string config_path;          // optional JSON file
  std::vector<std::string> overrides;  // "a.b=value"
};

struct SynthOptions {
  ConfigOptions config;
  std::string out_dir;
};

struct TrainOptions {
  ConfigOptions config;
  std::string data;     // manifest; falls back to config.dataset
  std::string out_dir;  // run dir; falls back to config.output_dir
  std::optional<int> jobs;
  bool emit_curves = false;
};

struct InferOptions {
  ConfigOptions config;  // only the post section is used
  std::string checkpoint;
  std::string video_dir;
  std::string out;          // result JSON; stdout when empty
  std::string curves_path;  // optional curves CSV
  bool stream = false;
};

struct EvalOptions {
  std::string run_dir;
  std::string data;     // falls back to the run's dataset
  std::string out_dir;  // falls back to <run>/eval or <run>/eval_no_synergy
  bool no_synergy = false;
};

struct ReportOptions {
  std::string run_dir;
};

int Synth(const SynthOptions& opts);
int Train(const TrainOptions& opts);
int Infer(const InferOptions& opts);
int Eval(const EvalOptions& opts);
int Report(const ReportOptions& opts);

}  // namespace mespot::cli

#endif  // MESPOT_TOOLS_COMMANDS_H_

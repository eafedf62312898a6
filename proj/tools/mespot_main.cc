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

// mespot: synthesize data, train LOSO folds, run inference, score results.

#include <iostream>

#include "CLI11.hpp"
#include "commands.h"
#include "mespot/error.h"
#include "mespot/version.h"

namespace {

void AddConfigFlags(CLI::App* cmd, mespot::cli::ConfigOptions& c) {
  cmd->add_option("--config", c.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.overrides, "override a config entry, e.g. train.epochs=5");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace mespot::cli;
  CLI::App app{"Micro-expression spotting and recognition"};
  app.set_version_flag("--version", mespot::kVersion);
  app.require_subcommand(1);

  SynthOptions synth;
  auto* s = app.add_subcommand("synth", "generate a synthetic MEFS dataset");
  AddConfigFlags(s, synth.config);
  s->add_option("--out", synth.out_dir, "output dataset directory")->required();

  TrainOptions train;
  auto* t = app.add_subcommand("train", "leave-one-subject-out training");
  AddConfigFlags(t, train.config);
  t->add_option("--data", train.data, "dataset manifest.json");
  t->add_option("--out", train.out_dir, "run directory");
  t->add_option("--jobs", train.jobs, "folds trained concurrently");
  t->add_flag("--emit-curves", train.emit_curves, "write per-frame curves for held-out videos");

  InferOptions infer;
  auto* i = app.add_subcommand("infer", "analyze one MEFS video with a checkpoint");
  AddConfigFlags(i, infer.config);
  i->add_option("--checkpoint", infer.checkpoint)->required();
  i->add_option("--video", infer.video_dir, "MEFS video directory")->required();
  i->add_option("--out", infer.out, "result JSON (stdout if omitted)");
  i->add_option("--emit-curves", infer.curves_path, "per-frame curves CSV");
  i->add_flag("--stream", infer.stream, "frame-by-frame inference, checked against batch");

  EvalOptions eval;
  auto* e = app.add_subcommand("eval", "score a training run's held-out results");
  e->add_option("--run", eval.run_dir, "run directory")->required();
  e->add_option("--data", eval.data, "dataset manifest (default: the run's)");
  e->add_option("--out", eval.out_dir, "output directory");
  e->add_flag("--no-synergy", eval.no_synergy, "drop relabeled candidates");

  ReportOptions report;
  auto* r = app.add_subcommand("report", "summarize a run directory");
  r->add_option("--run", report.run_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& ok) {
    return app.exit(ok);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return 1;
  }

  try {
    if (*s) return Synth(synth);
    if (*t) return Train(train);
    if (*i) return Infer(infer);
    if (*e) return Eval(eval);
    if (*r) return Report(report);
  } catch (const mespot::NumericalError& err) {
    std::cerr << "numerical failure: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 1;
}

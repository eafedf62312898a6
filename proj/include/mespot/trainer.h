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

#ifndef MESPOT_TRAINER_H_
#define MESPOT_TRAINER_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mespot/flow_data.h"
#include "mespot/model.h"
#include "mespot/optim.h"

namespace mespot {

struct TrainConfig {
  int epochs = 30;
  double max_lr = 1e-4;
  AdamConfig adam;
  double warmup_fraction = 0.3;
  // emo + 1 entries, index 0 is the neutral class. Empty means all ones.
  // Setting entry 0 to zero reproduces the no-synergy ablation.
  std::vector<double> class_weights;
  double spot_weight = 1.0;
  double clip_grad_norm = 0.0;  // 0 disables clipping
  // Final fraction of steps that normalize with the running statistics
  // (which then stay fixed) instead of per-video batch statistics.
  double frozen_norm_fraction = 0.0;
  uint64_t rng_seed = 0;

  void Validate() const;
};

// Weights actually used for `num_emotions`: class_weights, or all ones.
std::vector<double> EffectiveClassWeights(const TrainConfig& cfg,
                                          int num_emotions);

struct FoldSplit {
  std::string held_out_subject;
  std::vector<std::string> train_videos;
  std::vector<std::string> test_videos;
};

struct LossLogRow {
  int64_t step = 0;
  int epoch = 0;
  double lr = 0.0;
  LossValue loss;
};

struct FoldResult {
  ModelParams params;
  std::vector<LossLogRow> log;
  int64_t steps = 0;
};

// One fold: epochs x (shuffled) training videos, one Adam step per video.
FoldResult TrainFold(const FoldSplit& split,
                     const std::vector<AnnotatedVideo>& dataset,
                     const ModelConfig& model_cfg, const TrainConfig& train_cfg);

// One fold per subject, sorted by subject id; video ids sorted within a fold.
std::vector<FoldSplit> LosoSplit(const std::vector<AnnotatedVideo>& dataset);

struct SubjectVideo {
  std::string subject_id;
  std::string video_id;
};
std::vector<FoldSplit> LosoSplit(const std::vector<SubjectVideo>& videos);

struct LosoResult {
  std::vector<FoldSplit> splits;
  std::vector<FoldResult> folds;                 // parallel to splits
  std::map<std::string, ForwardOutput> outputs;  // eval-mode, by video id
};

// Trains every fold (up to `jobs` concurrently) and runs each fold's model on
// its held-out videos. Parameters are rounded to checkpoint precision
// (float32) before evaluation.
LosoResult RunLoso(const std::vector<AnnotatedVideo>& dataset,
                   const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                   int jobs = 1);

// Rounds every tensor to float32, i.e. what a checkpoint round-trip yields.
void RoundToCheckpointPrecision(ModelParams& params);

std::string LossLogCsv(const std::vector<LossLogRow>& log);

}  // namespace mespot

#endif  // MESPOT_TRAINER_H_

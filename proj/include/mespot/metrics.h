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

#ifndef MESPOT_METRICS_H_
#define MESPOT_METRICS_H_

// Spot-then-recognize evaluation. A prediction is a true positive when its
// frame IoU with an unmatched ground-truth ME is strictly greater than 0.5.

#include <string>
#include <vector>

#include "mespot/flow_data.h"

namespace mespot {

inline constexpr double kIouThreshold = 0.5;

struct FrameSpan {
  int onset = 0;
  int offset = 0;  // inclusive
};

// Inclusive frame-count IoU. Throws InvalidArgument when onset > offset.
double IntervalIou(const FrameSpan& a, const FrameSpan& b);

struct PredictedInterval {
  int onset = 0;
  int offset = 0;
  double score = 0.0;
  int emotion = kNeutral;
};

struct PredictionMatch {
  int prediction = 0;  // index into the prediction list
  int truth = -1;      // index into the ground-truth list, -1 if unmatched
  double iou = 0.0;
};

struct MatchReport {
  std::vector<PredictionMatch> matches;  // in processing order
  int tp = 0;
  int fp = 0;
  int fn = 0;
};

// Greedy one-to-one matching in descending score order (stable on ties).
MatchReport MatchIntervals(const std::vector<PredictedInterval>& predictions,
                           const std::vector<FrameSpan>& truths);

struct F1Score {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

F1Score F1FromCounts(int tp, int fp, int fn);

struct RecognitionScores {
  double f1 = 0.0;   // micro F1 over TP intervals (= accuracy)
  double uf1 = 0.0;  // mean per-class F1 over classes present in the truth
  double uar = 0.0;  // mean per-class recall over classes present
  std::vector<std::vector<int>> confusion;  // [truth - 1][pred - 1]
  bool empty = true;
};

// `pairs` holds (predicted, true) emotion ids in 1..num_emotions for every
// TP-matched interval.
RecognitionScores RecognitionMetrics(
    const std::vector<std::pair<int, int>>& pairs, int num_emotions);

// From a confusion matrix [truth][pred].
RecognitionScores RecognitionFromConfusion(
    const std::vector<std::vector<int>>& confusion);

double Strs(double spot_f1, double recog_f1);

struct VideoPrediction {
  std::string video_id;
  std::vector<PredictedInterval> intervals;
};

struct ScoreBoard {
  int num_videos = 0;
  int tp = 0;
  int fp = 0;
  int fn = 0;
  F1Score spot;
  RecognitionScores recog;
  double strs = 0.0;

  std::string ToJson() const;
  std::string ToTable() const;
  std::string ConfusionCsv() const;
};

// Counts are pooled over all videos (and thus all folds) before computing
// F1. Throws InvalidArgument when a video has no prediction entry.
ScoreBoard EvaluateLoso(const std::vector<VideoPrediction>& predictions,
                        const std::vector<AnnotatedVideo>& dataset,
                        int num_emotions);

}  // namespace mespot

#endif  // MESPOT_METRICS_H_

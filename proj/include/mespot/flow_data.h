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

#ifndef MESPOT_FLOW_DATA_H_
#define MESPOT_FLOW_DATA_H_

#include <string>
#include <vector>

#include "mespot/tensor.h"

namespace mespot {

// Per-ROI inter-frame optical flow of one video, already calibrated against
// global face motion. `values` is T x C, frame-major; column 2k holds the
// horizontal and column 2k+1 the vertical component of ROI k (pixels/frame).
struct FlowSequence {
  double fps = 30.0;
  std::vector<std::string> roi_names;
  Mat values;

  int num_frames() const { return static_cast<int>(values.rows()); }
  int num_channels() const { return static_cast<int>(values.cols()); }

  // Throws InvalidArgument unless C == 2 * |roi_names|, T > 0, fps > 0 and all
  // values are finite.
  void Validate() const;
};

enum class ExpressionKind { kMicro, kMacro };

inline constexpr int kNeutral = 0;

// Ground-truth expression. Frame indices are 0-based and inclusive.
struct ExpressionInterval {
  int onset = 0;
  int apex = 0;
  int offset = 0;
  int emotion = kNeutral;  // 1..emo for MEs; 0 reserved for neutral.
  ExpressionKind kind = ExpressionKind::kMicro;

  bool operator==(const ExpressionInterval&) const = default;
};

struct AnnotatedVideo {
  std::string subject_id;
  std::string video_id;
  FlowSequence flow;
  std::vector<ExpressionInterval> intervals;

  // Micro-expression intervals only, in onset order.
  std::vector<ExpressionInterval> MicroIntervals() const;

  // Checks flow invariants, interval ordering/range and same-kind overlap.
  void Validate() const;
};

struct TargetSignals {
  Vec spot;                // T, in [0, 1]
  std::vector<int> label;  // T, in {0..emo}
};

// Subtracts the global (face-reference) flow from every ROI's (u, v) pair.
// `raw_roi_flow` is T x C with C even, `global_flow` is T x 2.
FlowSequence CalibrateGlobal(const Mat& raw_roi_flow, const Mat& global_flow,
                             double fps = 30.0,
                             std::vector<std::string> roi_names = {});

// Builds per-frame regression and classification targets. Each ME
// contributes a triangle 0 -> 1 -> 0 over onset/apex/offset; MaEs contribute
// nothing.
TargetSignals MakeTargets(const AnnotatedVideo& video, int num_emotions);

// Triangle value of a single ME at frame t (0 outside the interval).
double RampValue(const ExpressionInterval& interval, int t);

// The default 12-ROI face layout (24 flow channels).
const std::vector<std::string>& DefaultRoiNames();

}  // namespace mespot

#endif  // MESPOT_FLOW_DATA_H_

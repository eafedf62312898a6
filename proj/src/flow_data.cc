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

#include "mespot/flow_data.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "mespot/error.h"

namespace mespot {

void FlowSequence::Validate() const {
  if (values.rows() <= 0) throw InvalidArgument("flow has no frames");
  if (values.cols() <= 0 || values.cols() % 2 != 0) {
    throw InvalidArgument("flow channel count must be positive and even, got " +
                          std::to_string(values.cols()));
  }
  if (static_cast<size_t>(values.cols()) != 2 * roi_names.size()) {
    throw InvalidArgument("flow has " + std::to_string(values.cols()) +
                          " channels but " + std::to_string(roi_names.size()) +
                          " ROI names");
  }
  if (!(fps > 0.0) || !std::isfinite(fps)) {
    throw InvalidArgument("fps must be positive");
  }
  if (!values.allFinite()) throw InvalidArgument("flow has non-finite values");
}

std::vector<ExpressionInterval> AnnotatedVideo::MicroIntervals() const {
  std::vector<ExpressionInterval> out;
  for (const auto& iv : intervals) {
    if (iv.kind == ExpressionKind::kMicro) out.push_back(iv);
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.onset < b.onset; });
  return out;
}

void AnnotatedVideo::Validate() const {
  flow.Validate();
  const int T = flow.num_frames();
  for (const auto& iv : intervals) {
    if (iv.onset < 0 || iv.onset > iv.apex || iv.apex > iv.offset ||
        iv.offset >= T) {
      throw InvalidArgument("interval [" + std::to_string(iv.onset) + "," +
                            std::to_string(iv.apex) + "," +
                            std::to_string(iv.offset) + "] out of range for " +
                            std::to_string(T) + " frames");
    }
    if (iv.kind == ExpressionKind::kMicro && iv.emotion == kNeutral) {
      throw InvalidArgument("micro-expression labeled neutral");
    }
    if (iv.emotion < 0) throw InvalidArgument("negative emotion id");
  }
  for (auto kind : {ExpressionKind::kMicro, ExpressionKind::kMacro}) {
    std::vector<ExpressionInterval> same;
    for (const auto& iv : intervals) {
      if (iv.kind == kind) same.push_back(iv);
    }
    std::sort(same.begin(), same.end(),
              [](const auto& a, const auto& b) { return a.onset < b.onset; });
    for (size_t i = 1; i < same.size(); ++i) {
      if (same[i].onset <= same[i - 1].offset) {
        throw InvalidArgument("overlapping intervals of the same kind");
      }
    }
  }
}

FlowSequence CalibrateGlobal(const Mat& raw_roi_flow, const Mat& global_flow,
                             double fps, std::vector<std::string> roi_names) {
  if (raw_roi_flow.rows() != global_flow.rows()) {
    throw InvalidArgument("raw and global flow have different frame counts");
  }
  if (global_flow.cols() != 2) {
    throw InvalidArgument("global flow must have 2 columns");
  }
  if (raw_roi_flow.cols() % 2 != 0) {
    throw InvalidArgument("raw ROI flow must have an even column count");
  }
  if (!global_flow.allFinite()) {
    throw InvalidArgument("global flow has non-finite values");
  }
  FlowSequence out;
  out.fps = fps;
  const Eigen::Index rois = raw_roi_flow.cols() / 2;
  if (roi_names.empty()) {
    for (Eigen::Index k = 0; k < rois; ++k) {
      roi_names.push_back("roi" + std::to_string(k));
    }
  }
  out.roi_names = std::move(roi_names);
  out.values = raw_roi_flow;
  for (Eigen::Index k = 0; k < rois; ++k) {
    out.values.col(2 * k) -= global_flow.col(0);
    out.values.col(2 * k + 1) -= global_flow.col(1);
  }
  return out;
}

double RampValue(const ExpressionInterval& iv, int t) {
  if (t < iv.onset || t > iv.offset) return 0.0;
  if (t == iv.apex) return 1.0;
  if (t < iv.apex) {
    return static_cast<double>(t - iv.onset) / (iv.apex - iv.onset);
  }
  return static_cast<double>(iv.offset - t) / (iv.offset - iv.apex);
}

TargetSignals MakeTargets(const AnnotatedVideo& video, int num_emotions) {
  const int T = video.flow.num_frames();
  TargetSignals out;
  out.spot = Vec::Zero(T);
  out.label.assign(T, kNeutral);
  for (const auto& iv : video.intervals) {
    if (iv.kind != ExpressionKind::kMicro) continue;
    if (iv.emotion < 1 || iv.emotion > num_emotions) {
      throw InvalidArgument("emotion id " + std::to_string(iv.emotion) +
                            " outside 1.." + std::to_string(num_emotions));
    }
    if (iv.onset < 0 || iv.onset > iv.apex || iv.apex > iv.offset ||
        iv.offset >= T) {
      throw InvalidArgument("ME interval out of range");
    }
    for (int t = iv.onset; t <= iv.offset; ++t) {
      out.spot[t] = std::max(out.spot[t], RampValue(iv, t));
      out.label[t] = iv.emotion;
    }
  }
  return out;
}

const std::vector<std::string>& DefaultRoiNames() {
  static const std::vector<std::string> kNames = {
      "left_brow_inner",  "left_brow_outer",  "right_brow_inner",
      "right_brow_outer", "left_eye",         "right_eye",
      "nose",             "left_mouth_corner", "right_mouth_corner",
      "chin",             "left_cheek",       "right_cheek"};
  return kNames;
}

}  // namespace mespot

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

#ifndef MESPOT_ANALYSIS_H_
#define MESPOT_ANALYSIS_H_

// Turns per-frame network outputs into ME intervals with emotions:
// dual-threshold peak detection on the spotting curve, per-interval mode of
// the recognition argmax, and result-level synergy between the two.

#include <string>
#include <vector>

#include "mespot/flow_data.h"
#include "mespot/model.h"

namespace mespot {

struct PostConfig {
  double peak_threshold = 0.5;
  double low_threshold = 0.3;
  int min_separation = -1;  // frames; -1 means 0.2 s worth of frames
  int min_duration = 3;     // frames
  int max_duration = -1;    // frames; -1 means 0.5 s worth of frames
  double noise_percentile = 95.0;
  bool synergy = true;

  // Copy with the fps-dependent defaults filled in.
  PostConfig Resolved(double fps) const;
  void Validate() const;
};

struct SpottedInterval {
  int onset = 0;
  int offset = 0;
  int peak = 0;
  double peak_score = 0.0;

  int length() const { return offset - onset + 1; }
  bool operator==(const SpottedInterval&) const = default;
};

// `cfg` must be resolved (no -1 entries).
std::vector<SpottedInterval> DetectPeaks(const Vec& curve, const PostConfig& cfg);

struct EmotionVote {
  int emotion = kNeutral;
  Vec mean_probs;  // emo + 1
};

EmotionVote IntervalEmotionMode(const Mat& recog, const SpottedInterval& interval);

enum class SynergyDecision { kKept, kRelabeled, kRejected };
const char* SynergyDecisionName(SynergyDecision d);
SynergyDecision ParseSynergyDecision(const std::string& name);

struct Candidate {
  SpottedInterval interval;
  EmotionVote vote;
};

struct AuditEntry {
  SpottedInterval interval;
  int mode_emotion = kNeutral;
  int emotion = kNeutral;  // final emotion; neutral when rejected
  Vec mean_probs;
  SynergyDecision decision = SynergyDecision::kKept;
  double motion = 0.0;     // mean per-frame flow magnitude over the interval
  double threshold = 0.0;  // video's noise percentile of frame magnitudes
};

struct AnalyzedInterval {
  SpottedInterval interval;
  int emotion = kNeutral;
  Vec mean_probs;
};

struct AnalysisResult {
  std::vector<AnalyzedInterval> intervals;  // accepted, sorted by onset
  std::vector<AuditEntry> audit;            // one per candidate
};

// Per-frame L2 norm of the flow over all channels.
Vec FrameMotion(const Mat& flow);

// Linear-interpolation percentile (p in [0, 100]) of `values`.
double Percentile(std::vector<double> values, double p);

AnalysisResult SynergyResolve(const std::vector<Candidate>& candidates,
                              const Mat& flow, const PostConfig& cfg);

AnalysisResult Analyze(const ForwardOutput& outputs, const FlowSequence& flow,
                       const PostConfig& cfg);

}  // namespace mespot

#endif  // MESPOT_ANALYSIS_H_

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

#include "mespot/analysis.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "mespot/error.h"

namespace mespot {

PostConfig PostConfig::Resolved(double fps) const {
  PostConfig out = *this;
  if (out.min_separation < 0) {
    out.min_separation = std::max(1, static_cast<int>(std::lround(0.2 * fps)));
  }
  if (out.max_duration < 0) {
    out.max_duration = std::max(1, static_cast<int>(std::lround(0.5 * fps)));
  }
  return out;
}

void PostConfig::Validate() const {
  if (!(low_threshold > 0 && low_threshold <= peak_threshold &&
        peak_threshold < 1)) {
    throw InvalidArgument("post config: need 0 < low_threshold <= "
                          "peak_threshold < 1");
  }
  if (min_duration < 1) throw InvalidArgument("post config: min_duration < 1");
  if (max_duration >= 0 && min_duration > max_duration) {
    throw InvalidArgument("post config: min_duration > max_duration");
  }
  if (noise_percentile < 0 || noise_percentile > 100) {
    throw InvalidArgument("post config: noise_percentile outside [0, 100]");
  }
}

std::vector<SpottedInterval> DetectPeaks(const Vec& curve,
                                         const PostConfig& cfg) {
  if (cfg.min_separation < 0 || cfg.max_duration < 0) {
    throw InvalidArgument("DetectPeaks needs a resolved PostConfig");
  }
  cfg.Validate();
  const int T = static_cast<int>(curve.size());
  std::vector<int> maxima;
  for (int t = 0; t < T; ++t) {
    if (curve[t] < cfg.peak_threshold) continue;
    const bool rises = t == 0 || curve[t] > curve[t - 1];
    const bool falls = t == T - 1 || curve[t] >= curve[t + 1];
    if (rises && falls) maxima.push_back(t);
  }
  std::stable_sort(maxima.begin(), maxima.end(),
                   [&curve](int a, int b) { return curve[a] > curve[b]; });
  std::vector<int> peaks;
  for (int t : maxima) {
    const bool clear = std::all_of(peaks.begin(), peaks.end(), [&](int p) {
      return std::abs(p - t) >= cfg.min_separation;
    });
    if (clear) peaks.push_back(t);
  }

  std::vector<SpottedInterval> out;
  for (int p : peaks) {
    int lo = p;
    int hi = p;
    while (lo > 0 && curve[lo - 1] >= cfg.low_threshold) --lo;
    while (hi < T - 1 && curve[hi + 1] >= cfg.low_threshold) ++hi;
    int len = hi - lo + 1;
    if (len > cfg.max_duration) {
      lo = p - (cfg.max_duration - 1) / 2;
      hi = lo + cfg.max_duration - 1;
    } else if (len < cfg.min_duration) {
      const int need = cfg.min_duration - len;
      lo -= need / 2;
      hi += need - need / 2;
    }
    // Shift back inside the video, then clip.
    if (lo < 0) {
      hi = std::min(T - 1, hi - lo);
      lo = 0;
    }
    if (hi > T - 1) {
      lo = std::max(0, lo - (hi - (T - 1)));
      hi = T - 1;
    }
    out.push_back({lo, hi, p, curve[p]});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.onset != b.onset ? a.onset < b.onset : a.peak < b.peak;
  });

  std::vector<SpottedInterval> disjoint;
  for (auto iv : out) {
    if (!disjoint.empty() && iv.onset <= disjoint.back().offset) {
      iv.onset = disjoint.back().offset + 1;
      if (iv.onset > iv.peak || iv.length() < cfg.min_duration) continue;
    }
    disjoint.push_back(iv);
  }
  return disjoint;
}

EmotionVote IntervalEmotionMode(const Mat& recog,
                                const SpottedInterval& interval) {
  if (interval.onset < 0 || interval.offset < interval.onset ||
      interval.offset >= recog.rows()) {
    throw InvalidArgument("interval [" + std::to_string(interval.onset) + "," +
                          std::to_string(interval.offset) +
                          "] is empty or outside the video");
  }
  const Eigen::Index K = recog.cols();
  std::vector<int> votes(K, 0);
  EmotionVote out;
  out.mean_probs = Vec::Zero(K);
  for (int t = interval.onset; t <= interval.offset; ++t) {
    Eigen::Index best;
    recog.row(t).maxCoeff(&best);
    ++votes[best];
    out.mean_probs += recog.row(t).transpose();
  }
  out.mean_probs /= static_cast<double>(interval.length());
  int best = 0;
  for (int k = 1; k < K; ++k) {
    if (votes[k] > votes[best] ||
        (votes[k] == votes[best] && out.mean_probs[k] > out.mean_probs[best])) {
      best = k;
    }
  }
  out.emotion = best;
  return out;
}

const char* SynergyDecisionName(SynergyDecision d) {
  switch (d) {
    case SynergyDecision::kKept:
      return "kept";
    case SynergyDecision::kRelabeled:
      return "relabeled";
    case SynergyDecision::kRejected:
      return "rejected";
  }
  return "kept";
}

SynergyDecision ParseSynergyDecision(const std::string& name) {
  if (name == "kept") return SynergyDecision::kKept;
  if (name == "relabeled") return SynergyDecision::kRelabeled;
  if (name == "rejected") return SynergyDecision::kRejected;
  throw InvalidArgument("unknown synergy decision '" + name + "'");
}

Vec FrameMotion(const Mat& flow) { return flow.rowwise().norm(); }

double Percentile(std::vector<double> values, double p) {
  if (values.empty()) throw InvalidArgument("percentile of empty set");
  std::sort(values.begin(), values.end());
  const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(rank));
  const size_t hi = std::min(values.size() - 1, lo + 1);
  const double frac = rank - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

AnalysisResult SynergyResolve(const std::vector<Candidate>& candidates,
                              const Mat& flow, const PostConfig& cfg) {
  AnalysisResult result;
  if (candidates.empty()) return result;
  const Vec motion = FrameMotion(flow);
  const double threshold = Percentile(
      std::vector<double>(motion.data(), motion.data() + motion.size()),
      cfg.noise_percentile);
  for (const auto& c : candidates) {
    AuditEntry entry;
    entry.interval = c.interval;
    entry.mode_emotion = c.vote.emotion;
    entry.mean_probs = c.vote.mean_probs;
    entry.threshold = threshold;
    entry.motion =
        motion.segment(c.interval.onset, c.interval.length()).mean();
    if (c.vote.emotion != kNeutral) {
      entry.decision = SynergyDecision::kKept;
      entry.emotion = c.vote.emotion;
    } else if (cfg.synergy && !(entry.motion > threshold)) {
      Eigen::Index best;
      c.vote.mean_probs.tail(c.vote.mean_probs.size() - 1).maxCoeff(&best);
      entry.decision = SynergyDecision::kRelabeled;
      entry.emotion = static_cast<int>(best) + 1;
    } else {
      entry.decision = SynergyDecision::kRejected;
      entry.emotion = kNeutral;
    }
    if (entry.decision != SynergyDecision::kRejected) {
      result.intervals.push_back(
          {entry.interval, entry.emotion, entry.mean_probs});
    }
    result.audit.push_back(std::move(entry));
  }
  std::sort(result.intervals.begin(), result.intervals.end(),
            [](const auto& a, const auto& b) {
              return a.interval.onset < b.interval.onset;
            });
  return result;
}

AnalysisResult Analyze(const ForwardOutput& outputs, const FlowSequence& flow,
                       const PostConfig& cfg) {
  if (outputs.num_frames() != flow.num_frames() ||
      outputs.recog.rows() != flow.num_frames()) {
    throw InvalidArgument("outputs cover " +
                          std::to_string(outputs.num_frames()) +
                          " frames, flow has " +
                          std::to_string(flow.num_frames()));
  }
  const PostConfig resolved = cfg.Resolved(flow.fps);
  std::vector<Candidate> candidates;
  for (const auto& iv : DetectPeaks(outputs.spot, resolved)) {
    candidates.push_back({iv, IntervalEmotionMode(outputs.recog, iv)});
  }
  return SynergyResolve(candidates, flow.values, resolved);
}

}  // namespace mespot

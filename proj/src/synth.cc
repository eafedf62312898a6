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

#include "mespot/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>

#include "mespot/error.h"
#include "mespot/mefs.h"

namespace mespot {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752;
constexpr double kSpill = 0.3;

enum class EventType { kMicro, kMacro, kBlink };

struct Event {
  EventType type;
  int length;
  int emotion;
  double amplitude;
  int onset = 0;
  int apex = 0;
};

std::string Pad2(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%02d", i);
  return buf;
}

void Stamp(Mat& flow, const ExpressionInterval& shape, double amplitude,
           const std::vector<RoiDirection>& rois) {
  for (int t = shape.onset; t <= shape.offset; ++t) {
    const double a = amplitude * RampValue(shape, t);
    for (const auto& r : rois) {
      flow(t, 2 * r.roi) += a * r.u;
      flow(t, 2 * r.roi + 1) += a * r.v;
    }
  }
}

}  // namespace

void SynthConfig::Validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw InvalidArgument(std::string("synth config: ") + what);
  };
  need(num_videos >= 0, "num_videos must be >= 0");
  need(frames_per_video > 0, "frames_per_video must be positive");
  need(fps > 0, "fps must be positive");
  need(num_subjects > 0, "num_subjects must be positive");
  need(num_emotions >= 1 && num_emotions <= kMaxSynthEmotions,
       "num_emotions must be in 1..7");
  need(noise_std >= 0, "noise_std must be >= 0");
  need(me_duration_min > 0 && me_duration_min <= me_duration_max,
       "bad ME duration range");
  need(me_duration_max <= 0.5 * fps, "ME durations must not exceed 0.5 s");
  need(mae_duration_min > 0 && mae_duration_min <= mae_duration_max,
       "bad MaE duration range");
  need(blink_duration_min > 0 && blink_duration_min <= blink_duration_max,
       "bad blink duration range");
  need(blink_rate >= 0, "blink_rate must be >= 0");
  need(mes_per_video >= 0 && maes_per_video >= 0, "event counts must be >= 0");
  need(me_amplitude > 0, "me_amplitude must be positive");
  need(mae_amplitude_factor >= 2.0, "MaE amplitude must be >= 2x ME");
  need(blink_amplitude_factor > 0, "blink amplitude must be positive");
}

const std::vector<RoiDirection>& EmotionRoiMask(int emotion) {
  static const std::vector<std::vector<RoiDirection>> kTable = {
      // 1 negative
      {{0, 0.6, 0.8}, {2, -0.6, 0.8}, {6, 0.0, -1.0}},
      // 2 positive
      {{7, -kInvSqrt2, -kInvSqrt2},
       {8, kInvSqrt2, -kInvSqrt2},
       {10, 0.0, -1.0},
       {11, 0.0, -1.0}},
      // 3 surprise
      {{0, 0.0, -1.0}, {1, 0.0, -1.0}, {2, 0.0, -1.0}, {3, 0.0, -1.0},
       {9, 0.0, 1.0}},
      // 4 others
      {{7, 0.6, 0.8}, {8, -0.6, 0.8}, {9, 0.0, -1.0}},
      // 5 disgust
      {{6, 0.0, -1.0}, {10, 0.0, -1.0}, {0, 0.0, 1.0}},
      // 6 fear
      {{0, 0.0, -1.0}, {2, 0.0, -1.0}, {7, -1.0, 0.0}, {8, 1.0, 0.0}},
      // 7 sadness
      {{0, 0.6, -0.8}, {2, -0.6, -0.8}, {7, 0.0, 1.0}, {8, 0.0, 1.0}},
  };
  if (emotion < 1 || emotion > kMaxSynthEmotions) {
    throw InvalidArgument("no ROI mask for emotion " + std::to_string(emotion));
  }
  return kTable[emotion - 1];
}

SynthDataset SynthGenerateDetailed(const SynthConfig& cfg) {
  cfg.Validate();
  std::mt19937_64 rng(cfg.rng_seed);
  auto uniform_int = [&rng](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  auto uniform = [&rng](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };

  std::vector<double> subject_gain(cfg.num_subjects);
  for (auto& g : subject_gain) g = uniform(0.8, 1.25);

  const int T = cfg.frames_per_video;
  const int C = 2 * static_cast<int>(DefaultRoiNames().size());
  const int gap = std::max(2, static_cast<int>(std::ceil(0.2 * cfg.fps)));
  const std::vector<RoiDirection> blink_rois = {{kLeftEyeRoi, 0.0, 1.0},
                                                {kRightEyeRoi, 0.0, 1.0},
                                                {1, 0.0, kSpill},
                                                {3, 0.0, kSpill}};

  SynthDataset out;
  for (int i = 0; i < cfg.num_videos; ++i) {
    const int subject = i % cfg.num_subjects;
    const double gain = subject_gain[subject];

    std::vector<Event> events;
    for (int k = 0; k < cfg.mes_per_video; ++k) {
      events.push_back({EventType::kMicro,
                        uniform_int(cfg.me_duration_min, cfg.me_duration_max),
                        uniform_int(1, cfg.num_emotions),
                        cfg.me_amplitude * gain * uniform(0.8, 1.2)});
    }
    for (int k = 0; k < cfg.maes_per_video; ++k) {
      events.push_back({EventType::kMacro,
                        uniform_int(cfg.mae_duration_min, cfg.mae_duration_max),
                        uniform_int(1, cfg.num_emotions),
                        cfg.mae_amplitude_factor * cfg.me_amplitude * gain *
                            uniform(1.0, 1.2)});
    }
    const int blinks = std::poisson_distribution<int>(
        cfg.blink_rate * T / cfg.fps)(rng);
    for (int k = 0; k < blinks; ++k) {
      events.push_back(
          {EventType::kBlink,
           uniform_int(cfg.blink_duration_min, cfg.blink_duration_max), 0,
           cfg.blink_amplitude_factor * cfg.me_amplitude * uniform(0.8, 1.2)});
    }
    std::shuffle(events.begin(), events.end(), rng);

    // Random non-overlapping placement: distribute the slack over n+1 gaps.
    const int n = static_cast<int>(events.size());
    long slack = T - static_cast<long>(gap) * (n + 1);
    for (const auto& e : events) slack -= e.length;
    if (slack < 0) {
      throw GenerationError("cannot fit " + std::to_string(n) +
                            " events into " + std::to_string(T) + " frames");
    }
    std::vector<long> cuts(n);
    for (auto& c : cuts) {
      c = std::uniform_int_distribution<long>(0, slack)(rng);
    }
    std::sort(cuts.begin(), cuts.end());
    long cursor = 0;
    long prev_cut = 0;
    for (int k = 0; k < n; ++k) {
      cursor += gap + (cuts[k] - prev_cut);
      prev_cut = cuts[k];
      Event& e = events[k];
      e.onset = static_cast<int>(cursor);
      const int span = e.length - 1;
      e.apex = e.onset + static_cast<int>(std::lround(uniform(0.3, 0.6) * span));
      cursor += e.length;
    }

    AnnotatedVideo video;
    video.subject_id = "s" + Pad2(subject + 1);
    video.video_id = video.subject_id + "_v" + Pad2(i / cfg.num_subjects);
    video.flow.fps = cfg.fps;
    video.flow.roi_names = DefaultRoiNames();
    video.flow.values.resize(T, C);
    if (cfg.noise_std > 0) {
      std::normal_distribution<double> noise(0.0, cfg.noise_std);
      for (Eigen::Index j = 0; j < video.flow.values.size(); ++j) {
        video.flow.values.data()[j] = noise(rng);
      }
    } else {
      video.flow.values.setZero();
    }

    std::vector<PlantedBlink> planted;
    for (const auto& e : events) {
      const ExpressionInterval shape{e.onset, e.apex, e.onset + e.length - 1,
                                     e.emotion,
                                     e.type == EventType::kMacro
                                         ? ExpressionKind::kMacro
                                         : ExpressionKind::kMicro};
      if (e.type == EventType::kBlink) {
        Stamp(video.flow.values, shape, e.amplitude, blink_rois);
        planted.push_back({shape.onset, shape.offset});
      } else {
        Stamp(video.flow.values, shape, e.amplitude, EmotionRoiMask(e.emotion));
        video.intervals.push_back(shape);
      }
    }
    std::sort(video.intervals.begin(), video.intervals.end(),
              [](const auto& a, const auto& b) { return a.onset < b.onset; });
    std::sort(planted.begin(), planted.end(),
              [](const auto& a, const auto& b) { return a.onset < b.onset; });
    QuantizeToFloat(video.flow.values);
    out.videos.push_back(std::move(video));
    out.blinks.push_back(std::move(planted));
  }
  return out;
}

std::vector<AnnotatedVideo> SynthGenerate(const SynthConfig& config) {
  return SynthGenerateDetailed(config).videos;
}

}  // namespace mespot

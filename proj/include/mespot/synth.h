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

#ifndef MESPOT_SYNTH_H_
#define MESPOT_SYNTH_H_

// Synthetic ROI-flow videos with planted micro-expressions (annotated),
// macro-expressions (annotated as MaE) and blinks (not annotated).
//
// Every ME of emotion e writes a triangular pulse, peaking at the apex, onto
// the ROIs of EmotionRoiMask(e), moving each ROI along a fixed unit
// direction:
//
//   e  name       ROIs (direction u,v)
//   1  negative   brow inners drawn together and down, nose up
//   2  positive   mouth corners up and out, cheeks up
//   3  surprise   all four brow points up, chin down
//   4  others     mouth corners down and in, chin up
//   5  disgust    nose up, left cheek up, left brow inner down
//   6  fear       brow inners up, mouth corners pulled sideways
//   7  sadness    brow inners up and in, mouth corners down
//
// MaEs reuse the same table with longer durations and at least twice the
// amplitude. Blinks are short vertical pulses on the two eye ROIs with a weak
// spill-over onto the outer brows.

#include <cstdint>
#include <vector>

#include "mespot/flow_data.h"

namespace mespot {

struct SynthConfig {
  int num_videos = 20;
  int frames_per_video = 300;
  double fps = 30.0;
  int num_subjects = 5;
  int num_emotions = 4;
  double noise_std = 0.05;
  int me_duration_min = 6;   // frames
  int me_duration_max = 15;  // frames, at most 0.5 s
  int mae_duration_min = 24;
  int mae_duration_max = 60;
  int blink_duration_min = 3;
  int blink_duration_max = 6;
  double blink_rate = 0.2;  // expected blinks per second
  int mes_per_video = 2;
  int maes_per_video = 1;
  double me_amplitude = 1.0;   // peak px/frame before subject/event jitter
  double mae_amplitude_factor = 2.5;
  double blink_amplitude_factor = 4.0;
  uint64_t rng_seed = 1;

  void Validate() const;
};

struct RoiDirection {
  int roi;
  double u;
  double v;
};

inline constexpr int kMaxSynthEmotions = 7;
inline constexpr int kLeftEyeRoi = 4;
inline constexpr int kRightEyeRoi = 5;

// ROI/direction pattern for emotion 1..kMaxSynthEmotions (unit directions).
const std::vector<RoiDirection>& EmotionRoiMask(int emotion);

struct PlantedBlink {
  int onset;
  int offset;
};

struct SynthDataset {
  std::vector<AnnotatedVideo> videos;
  std::vector<std::vector<PlantedBlink>> blinks;  // per video
};

SynthDataset SynthGenerateDetailed(const SynthConfig& config);
std::vector<AnnotatedVideo> SynthGenerate(const SynthConfig& config);

}  // namespace mespot

#endif  // MESPOT_SYNTH_H_

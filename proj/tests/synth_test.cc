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

#include <cmath>
#include <cstring>
#include <set>

#include "doctest.h"
#include "mespot/error.h"

namespace mespot {
namespace {

bool Bitwise(const Mat& a, const Mat& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

TEST_CASE("zero videos gives an empty dataset") {
  SynthConfig cfg;
  cfg.num_videos = 0;
  CHECK(SynthGenerate(cfg).empty());
}

TEST_CASE("generation is deterministic in the seed") {
  SynthConfig cfg;
  cfg.num_videos = 4;
  const auto a = SynthGenerate(cfg);
  const auto b = SynthGenerate(cfg);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(Bitwise(a[i].flow.values, b[i].flow.values));
    CHECK(a[i].intervals == b[i].intervals);
    CHECK(a[i].video_id == b[i].video_id);
  }
  cfg.rng_seed = 2;
  const auto c = SynthGenerate(cfg);
  CHECK_FALSE(Bitwise(a[0].flow.values, c[0].flow.values));
}

TEST_CASE("layout: subjects, ids, channels, label ranges") {
  SynthConfig cfg;
  const auto videos = SynthGenerate(cfg);
  REQUIRE(videos.size() == 20);
  std::set<std::string> subjects, ids;
  for (const auto& v : videos) {
    subjects.insert(v.subject_id);
    ids.insert(v.video_id);
    CHECK(v.flow.num_channels() == 24);
    CHECK(v.flow.num_frames() == 300);
    CHECK_NOTHROW(v.Validate());
    int mes = 0, maes = 0;
    for (const auto& iv : v.intervals) {
      CHECK(iv.emotion >= 1);
      CHECK(iv.emotion <= 4);
      if (iv.kind == ExpressionKind::kMicro) {
        ++mes;
        CHECK(iv.offset - iv.onset + 1 <= 15);
      } else {
        ++maes;
        CHECK(iv.offset - iv.onset + 1 >= 24);
      }
    }
    CHECK(mes == 2);
    CHECK(maes == 1);
  }
  CHECK(subjects.size() == 5);
  CHECK(ids.size() == 20);
}

TEST_CASE("planted MEs stand out from the background by 3 noise std") {
  SynthConfig cfg;
  cfg.rng_seed = 1;
  cfg.num_videos = 1;
  cfg.num_subjects = 1;
  cfg.frames_per_video = 300;
  cfg.mes_per_video = 2;
  const auto data = SynthGenerateDetailed(cfg);
  const AnnotatedVideo& v = data.videos[0];
  const Mat& flow = v.flow.values;

  // Background: frames not covered by any planted event.
  std::vector<bool> busy(flow.rows(), false);
  for (const auto& iv : v.intervals) {
    for (int t = iv.onset; t <= iv.offset; ++t) busy[t] = true;
  }
  for (const auto& b : data.blinks[0]) {
    for (int t = b.onset; t <= b.offset; ++t) busy[t] = true;
  }
  double bg = 0.0;
  long n = 0;
  for (Eigen::Index t = 0; t < flow.rows(); ++t) {
    if (busy[t]) continue;
    bg += flow.row(t).cwiseAbs().sum();
    n += flow.cols();
  }
  bg /= n;

  int mes = 0;
  for (const auto& iv : v.intervals) {
    if (iv.kind != ExpressionKind::kMicro) continue;
    ++mes;
    double sum = 0.0;
    long count = 0;
    for (int t = iv.onset; t <= iv.offset; ++t) {
      for (const auto& r : EmotionRoiMask(iv.emotion)) {
        sum += std::abs(flow(t, 2 * r.roi)) + std::abs(flow(t, 2 * r.roi + 1));
        count += 2;
      }
    }
    CHECK(sum / count - bg >= 3.0 * cfg.noise_std);
  }
  CHECK(mes == 2);
}

TEST_CASE("noise-free, blink-free flow is exactly zero outside events") {
  SynthConfig cfg;
  cfg.num_videos = 3;
  cfg.noise_std = 0.0;
  cfg.blink_rate = 0.0;
  for (const auto& v : SynthGenerate(cfg)) {
    std::vector<bool> busy(v.flow.num_frames(), false);
    for (const auto& iv : v.intervals) {
      for (int t = iv.onset; t <= iv.offset; ++t) busy[t] = true;
    }
    for (int t = 0; t < v.flow.num_frames(); ++t) {
      if (!busy[t]) REQUIRE(v.flow.values.row(t).isZero(0.0));
    }
  }
}

TEST_CASE("blinks touch only eye ROIs and the outer brows, unannotated") {
  SynthConfig cfg;
  cfg.num_videos = 2;
  cfg.noise_std = 0.0;
  cfg.mes_per_video = 0;
  cfg.maes_per_video = 0;
  cfg.blink_rate = 1.0;
  const auto data = SynthGenerateDetailed(cfg);
  int blinks = 0;
  const std::set<int> allowed = {kLeftEyeRoi, kRightEyeRoi, 1, 3};
  for (size_t i = 0; i < data.videos.size(); ++i) {
    CHECK(data.videos[i].intervals.empty());
    blinks += static_cast<int>(data.blinks[i].size());
    const Mat& f = data.videos[i].flow.values;
    for (int roi = 0; roi < 12; ++roi) {
      if (allowed.count(roi)) continue;
      CHECK(f.col(2 * roi).isZero(0.0));
      CHECK(f.col(2 * roi + 1).isZero(0.0));
    }
    // Eye channels dominate.
    if (!data.blinks[i].empty()) {
      CHECK(f.col(2 * kLeftEyeRoi + 1).cwiseAbs().maxCoeff() >
            2.0 * f.col(2 * 1 + 1).cwiseAbs().maxCoeff());
    }
  }
  CHECK(blinks > 0);
}

TEST_CASE("MaE amplitude is at least twice the ME amplitude range") {
  SynthConfig cfg;
  cfg.num_videos = 10;
  cfg.noise_std = 0.0;
  cfg.blink_rate = 0.0;
  for (const auto& v : SynthGenerate(cfg)) {
    double me_peak = 0.0, mae_peak = 0.0;
    for (const auto& iv : v.intervals) {
      const double peak = v.flow.values.row(iv.apex).norm();
      (iv.kind == ExpressionKind::kMicro ? me_peak : mae_peak) =
          std::max(iv.kind == ExpressionKind::kMicro ? me_peak : mae_peak, peak);
    }
    CHECK(mae_peak > me_peak);
  }
}

TEST_CASE("config validation and packing errors") {
  SynthConfig cfg;
  cfg.me_duration_max = 16;  // > 0.5 s at 30 fps
  CHECK_THROWS_AS(cfg.Validate(), InvalidArgument);
  cfg = SynthConfig{};
  cfg.num_emotions = 8;
  CHECK_THROWS_AS(cfg.Validate(), InvalidArgument);
  cfg = SynthConfig{};
  cfg.frames_per_video = 40;
  cfg.maes_per_video = 2;
  CHECK_THROWS_AS(SynthGenerate(cfg), GenerationError);
}

}  // namespace
}  // namespace mespot

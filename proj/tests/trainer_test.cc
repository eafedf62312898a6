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

#include "mespot/trainer.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "mespot/checkpoint.h"
#include "mespot/error.h"
#include "mespot/losses.h"
#include "mespot/optim.h"
#include "mespot/synth.h"
#include "oracles.h"
#include "test_util.h"

namespace mespot {
namespace {

using doctest::Approx;

// ---- losses ----

TEST_CASE("mse loss") {
  Vec a(2), b(2);
  a << 1, 0;
  b << 0, 0;
  const MseResult r = MseLoss(a, b);
  CHECK(r.loss == 0.5);
  CHECK(r.grad[0] == 1.0);
  CHECK(r.grad[1] == 0.0);

  const MseResult same = MseLoss(a, a);
  CHECK(same.loss == 0.0);
  CHECK(same.grad.isZero(0.0));

  std::mt19937_64 rng(1);
  const Vec p = testing::RandomVec(rng, 17), t = testing::RandomVec(rng, 17);
  double acc = 0.0;
  for (int i = 0; i < 17; ++i) acc += (p[i] - t[i]) * (p[i] - t[i]);
  const MseResult rr = MseLoss(p, t);
  CHECK(rr.loss == Approx(acc / 17).epsilon(1e-15));
  for (int i = 0; i < 17; ++i) CHECK(rr.grad[i] == Approx(2 * (p[i] - t[i]) / 17).epsilon(1e-15));

  CHECK_THROWS_AS(MseLoss(Vec::Zero(2), Vec::Zero(3)), InvalidArgument);
}

TEST_CASE("cross-entropy loss") {
  SUBCASE("uniform rows give ln K") {
    for (int K : {2, 5, 8}) {
      const Mat probs = Mat::Constant(4, K, 1.0 / K);
      CHECK(CeLoss(probs, {0, 1, K - 1, 0}, {}).loss == Approx(std::log(K)).epsilon(1e-14));
    }
  }
  SUBCASE("all-neutral labels with zero neutral weight are degenerate") {
    CHECK_THROWS_AS(CeLoss(Mat::Constant(3, 3, 1.0 / 3), {0, 0, 0}, {0.0, 1.0, 1.0}),
                    InvalidArgument);
  }
  SUBCASE("three-frame weighted toy by hand") {
    Mat probs(3, 3);
    probs << 0.5, 0.25, 0.25,  //
        0.2, 0.6, 0.2,         //
        0.1, 0.3, 0.6;
    const std::vector<int> labels = {0, 1, 2};
    const CeResult r = CeLoss(probs, labels, {0.5, 1.0, 1.0});
    const double wsum = 2.5;
    const double want = (0.5 * -std::log(0.5) - std::log(0.6) - std::log(0.6)) / wsum;
    CHECK(std::abs(r.loss - want) < 1e-12);
    Mat g(3, 3);
    g << 0.5 * (0.5 - 1) / wsum, 0.5 * 0.25 / wsum, 0.5 * 0.25 / wsum,  //
        0.2 / wsum, (0.6 - 1) / wsum, 0.2 / wsum,                        //
        0.1 / wsum, 0.3 / wsum, (0.6 - 1) / wsum;
    CHECK((r.grad - g).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("neutral rows carry no gradient when the neutral weight is zero") {
    std::mt19937_64 rng(2);
    Mat probs = testing::RandomMat(rng, 20, 4, 0.1, 1.0);
    for (int t = 0; t < 20; ++t) probs.row(t) /= probs.row(t).sum();
    std::vector<int> labels(20);
    for (int t = 0; t < 20; ++t) labels[t] = t % 4;
    const CeResult r = CeLoss(probs, labels, {0.0, 1.0, 2.0, 0.5});
    for (int t = 0; t < 20; ++t) {
      if (labels[t] == 0) {
        CHECK(r.grad.row(t).isZero(0.0));
      } else {
        CHECK_FALSE(r.grad.row(t).isZero(0.0));
      }
    }
  }
  SUBCASE("label out of range") {
    CHECK_THROWS_AS(CeLoss(Mat::Constant(2, 3, 1.0 / 3), {0, 3}, {}), InvalidArgument);
  }
}

// ---- optimizer ----

ModelConfig TinyConfig() {
  ModelConfig c;
  c.in_channels = 4;
  c.stem_dim = 4;
  c.state_size = 2;
  c.num_emotions = 2;
  return c;
}

TEST_CASE("adam: zero gradients leave params unchanged") {
  ModelParams p = InitParams(TinyConfig(), 1);
  const ModelParams orig = p;
  OptimizerState s = AdamInit(p);
  AdamStep(p, ZerosLike(p), s, 0.1);
  CHECK(p.stem_conv1 == orig.stem_conv1);
  CHECK(p.recog_blocks[0].a_log == orig.recog_blocks[0].a_log);
  CHECK(s.step == 1);
}

TEST_CASE("adam: one unit-gradient step moves each entry by lr/(1+eps)") {
  ModelParams p = InitParams(TinyConfig(), 2);
  const ModelParams orig = p;
  ModelParams g = ZerosLike(p);
  g.spot_bias.setConstant(1.0);
  g.recog_head.setConstant(-1.0);
  OptimizerState s = AdamInit(p);
  AdamStep(p, g, s, 0.1);
  CHECK(orig.spot_bias[0] - p.spot_bias[0] == Approx(0.1 / (1 + 1e-8)).epsilon(1e-12));
  CHECK((p.recog_head - orig.recog_head).array().abs().maxCoeff() ==
        Approx(0.1).epsilon(1e-7));
  CHECK((p.recog_head - orig.recog_head).minCoeff() > 0.0);
}

TEST_CASE("adam: non-finite gradient rejects the step") {
  ModelParams p = InitParams(TinyConfig(), 3);
  const ModelParams orig = p;
  ModelParams g = ZerosLike(p);
  g.spot_bias.setConstant(1.0);
  g.stem_conv2(0, 0) = std::nan("");
  OptimizerState s = AdamInit(p);
  CHECK_THROWS_AS(AdamStep(p, g, s, 0.1), NumericalError);
  CHECK(p.spot_bias == orig.spot_bias);
  CHECK(s.step == 0);
  CHECK(s.m.spot_bias.isZero(0.0));
}

TEST_CASE("adam: matches a scalar reference over several steps") {
  ModelParams p = InitParams(TinyConfig(), 4);
  double theta = p.spot_bias[0], m = 0, v = 0;
  OptimizerState s = AdamInit(p);
  const double grads[] = {0.3, -1.2, 0.05, 2.0, -0.7};
  for (int k = 0; k < 5; ++k) {
    ModelParams g = ZerosLike(p);
    g.spot_bias[0] = grads[k];
    AdamStep(p, g, s, 0.01);
    m = 0.9 * m + 0.1 * grads[k];
    v = 0.999 * v + 0.001 * grads[k] * grads[k];
    const double mh = m / (1 - std::pow(0.9, k + 1));
    const double vh = v / (1 - std::pow(0.999, k + 1));
    theta -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    CHECK(p.spot_bias[0] == Approx(theta).epsilon(1e-13));
  }
}

TEST_CASE("one-cycle schedule") {
  const double max_lr = 1e-3;
  CHECK(OneCycleLr(0, 100, max_lr) == Approx(max_lr / 25).epsilon(1e-15));
  CHECK(OneCycleLr(29, 100, max_lr) == max_lr);
  // cosine branch: progress through the 70 decay steps
  for (int64_t step : {40, 64, 99}) {
    const double frac = static_cast<double>(step - 29) / (99 - 29);
    const double want =
        max_lr / 1e4 + (max_lr - max_lr / 1e4) * 0.5 * (1 + std::cos(M_PI * frac));
    CHECK(OneCycleLr(step, 100, max_lr) == Approx(want).epsilon(1e-13));
  }
  CHECK(OneCycleLr(99, 100, max_lr) == Approx(max_lr / 1e4).epsilon(1e-12));
  double prev = 0;
  for (int64_t s = 0; s <= 29; ++s) {
    const double lr = OneCycleLr(s, 100, max_lr);
    CHECK(lr > prev);
    prev = lr;
  }
  CHECK(OneCycleLr(0, 1, max_lr) == max_lr);
  CHECK_THROWS_AS(OneCycleLr(100, 100, max_lr), InvalidArgument);
  CHECK_THROWS_AS(OneCycleLr(-1, 100, max_lr), InvalidArgument);
}

TEST_CASE("gradient norm and scaling") {
  ModelParams g = ZerosLike(InitParams(TinyConfig(), 1));
  g.spot_bias[0] = 3.0;
  g.stem_conv1(0, 0) = 4.0;
  CHECK(GradNorm(g) == Approx(5.0));
  ScaleGrads(g, 0.5);
  CHECK(GradNorm(g) == Approx(2.5));
}

// ---- LOSO ----

std::vector<SubjectVideo> Sv(std::initializer_list<std::pair<const char*, const char*>> l) {
  std::vector<SubjectVideo> out;
  for (auto& [s, v] : l) out.push_back({s, v});
  return out;
}

TEST_CASE("loso split examples") {
  const auto folds = LosoSplit(Sv({{"a", "v1"}, {"a", "v2"}, {"b", "v3"}}));
  REQUIRE(folds.size() == 2);
  CHECK(folds[0].held_out_subject == "a");
  CHECK(folds[0].test_videos == std::vector<std::string>{"v1", "v2"});
  CHECK(folds[0].train_videos == std::vector<std::string>{"v3"});
  CHECK(folds[1].test_videos == std::vector<std::string>{"v3"});

  CHECK_THROWS_AS(LosoSplit(Sv({{"a", "v1"}, {"a", "v2"}})), InvalidArgument);
  CHECK_THROWS_AS(LosoSplit(Sv({{"a", "v1"}, {"b", "v1"}})), InvalidArgument);
}

TEST_CASE("loso split partitions and ignores input order") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int subjects = std::uniform_int_distribution<int>(2, 6)(rng);
    const int videos = std::uniform_int_distribution<int>(subjects, 20)(rng);
    std::vector<SubjectVideo> items;
    for (int i = 0; i < videos; ++i) {
      const int s = i < subjects ? i : std::uniform_int_distribution<int>(0, subjects - 1)(rng);
      items.push_back({"s" + std::to_string(s), "v" + std::to_string(i)});
    }
    const auto folds = LosoSplit(items);
    CHECK(folds.size() == static_cast<size_t>(subjects));
    std::multiset<std::string> seen;
    for (const auto& f : folds) {
      seen.insert(f.test_videos.begin(), f.test_videos.end());
      CHECK(f.test_videos.size() + f.train_videos.size() == items.size());
      for (const auto& v : f.test_videos) {
        CHECK(std::find(f.train_videos.begin(), f.train_videos.end(), v) == f.train_videos.end());
      }
    }
    CHECK(seen.size() == items.size());
    CHECK(std::set<std::string>(seen.begin(), seen.end()).size() == items.size());

    // sorted oracle: group by subject, ids sorted lexicographically
    std::map<std::string, std::vector<std::string>> oracle;
    for (const auto& it : items) oracle[it.subject_id].push_back(it.video_id);
    for (auto& [s, v] : oracle) std::sort(v.begin(), v.end());
    std::shuffle(items.begin(), items.end(), rng);
    const auto shuffled = LosoSplit(items);
    size_t k = 0;
    for (const auto& [s, v] : oracle) {
      CHECK(shuffled[k].held_out_subject == s);
      CHECK(shuffled[k].test_videos == v);
      CHECK(shuffled[k].train_videos == folds[k].train_videos);
      ++k;
    }
  }
}

// ---- training ----

std::vector<AnnotatedVideo> SmallSet(int videos, int subjects, int frames) {
  SynthConfig sc;
  sc.num_videos = videos;
  sc.num_subjects = subjects;
  sc.frames_per_video = frames;
  sc.rng_seed = 7;
  return SynthGenerate(sc);
}

TEST_CASE("train fold: step counting, finiteness and determinism") {
  const auto data = SmallSet(3, 3, 120);
  FoldSplit split{"x", {data[0].video_id}, {}};
  TrainConfig tc;
  tc.epochs = 1;
  const FoldResult one = TrainFold(split, data, ModelConfig{}, tc);
  CHECK(one.steps == 1);
  CHECK(one.log.size() == 1);

  split.train_videos = {data[0].video_id, data[1].video_id, data[2].video_id};
  tc.epochs = 3;
  tc.max_lr = 3e-3;
  const FoldResult a = TrainFold(split, data, ModelConfig{}, tc);
  CHECK(a.steps == 9);
  for (const auto& row : a.log) {
    CHECK(std::isfinite(row.loss.total));
    CHECK(row.lr > 0.0);
  }
  for (size_t i = 1; i < a.log.size(); ++i) CHECK(a.log[i].step == a.log[i - 1].step + 1);
  const FoldResult b = TrainFold(split, data, ModelConfig{}, tc);
  CHECK(SerializeCheckpoint(a.params) == SerializeCheckpoint(b.params));
}

TEST_CASE("train fold: frozen normalization keeps the recalibrated statistics") {
  const auto data = SmallSet(3, 3, 120);
  FoldSplit split{"x", {data[0].video_id, data[1].video_id, data[2].video_id}, {}};
  TrainConfig tc;
  tc.epochs = 2;
  tc.max_lr = 3e-3;
  tc.rng_seed = 4;
  tc.frozen_norm_fraction = 1.0;
  const FoldResult frozen = TrainFold(split, data, ModelConfig{}, tc);

  ModelParams expected = InitParams(ModelConfig{}, tc.rng_seed);
  RecalibrateNormStats(expected, {&data[0].flow.values, &data[1].flow.values,
                                  &data[2].flow.values});
  CHECK((frozen.params.bn1.running_mean - expected.bn1.running_mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((frozen.params.bn1.running_var - expected.bn1.running_var).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((frozen.params.bn2.running_mean - expected.bn2.running_mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((frozen.params.bn2.running_var - expected.bn2.running_var).cwiseAbs().maxCoeff() < 1e-12);
  // The learnable tensors did train.
  CHECK(frozen.params.stem_conv1 != expected.stem_conv1);

  tc.frozen_norm_fraction = 0.0;
  const FoldResult free = TrainFold(split, data, ModelConfig{}, tc);
  CHECK((free.params.bn1.running_mean - expected.bn1.running_mean).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("train fold: empty training set and unknown ids") {
  const auto data = SmallSet(2, 2, 120);
  CHECK_THROWS_AS(TrainFold(FoldSplit{"x", {}, {}}, data, ModelConfig{}, TrainConfig{}),
                  InvalidArgument);
  CHECK_THROWS_AS(TrainFold(FoldSplit{"x", {"nope"}, {}}, data, ModelConfig{}, TrainConfig{}),
                  InvalidArgument);
}

TEST_CASE("train fold: loss decreases on a five-video synthetic set") {
  const auto data = SmallSet(5, 5, 300);
  FoldSplit split;
  for (const auto& v : data) split.train_videos.push_back(v.video_id);
  TrainConfig tc;
  tc.epochs = 30;
  tc.max_lr = 5e-3;
  tc.rng_seed = 3;
  const FoldResult r = TrainFold(split, data, ModelConfig{}, tc);
  CHECK(r.steps == 150);
  auto epoch_mean = [&](int e) {
    double s = 0;
    int n = 0;
    for (const auto& row : r.log) {
      if (row.epoch == e) {
        s += row.loss.total;
        ++n;
      }
    }
    return s / n;
  };
  INFO("first " << epoch_mean(0) << " last " << epoch_mean(29));
  CHECK(epoch_mean(29) < 0.5 * epoch_mean(0));
}

TEST_CASE("loss log csv") {
  std::vector<LossLogRow> log(1);
  log[0].step = 3;
  log[0].epoch = 1;
  log[0].lr = 0.5;
  log[0].loss = {0.25, 1.5, 1.75};
  const std::string csv = LossLogCsv(log);
  CHECK(csv.rfind("step,epoch,lr,mse,ce,total\n", 0) == 0);
  CHECK(csv.find("3,1,0.5,0.25,1.5,1.75") != std::string::npos);
}

}  // namespace
}  // namespace mespot

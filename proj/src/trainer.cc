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
#include <exception>
#include <iomanip>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "mespot/error.h"
#include "mespot/losses.h"

namespace mespot {

void TrainConfig::Validate() const {
  if (epochs < 1) throw InvalidArgument("train config: epochs must be >= 1");
  if (!(max_lr > 0)) throw InvalidArgument("train config: max_lr must be > 0");
  if (warmup_fraction < 0 || warmup_fraction > 1) {
    throw InvalidArgument("train config: warmup_fraction must be in [0, 1]");
  }
  if (spot_weight < 0) throw InvalidArgument("train config: spot_weight < 0");
  if (clip_grad_norm < 0) throw InvalidArgument("train config: clip < 0");
  if (!(frozen_norm_fraction >= 0 && frozen_norm_fraction <= 1)) {
    throw InvalidArgument("train config: frozen_norm_fraction outside [0, 1]");
  }
  for (double w : class_weights) {
    if (!(w >= 0)) throw InvalidArgument("train config: negative class weight");
  }
}

std::vector<double> EffectiveClassWeights(const TrainConfig& cfg,
                                          int num_emotions) {
  if (cfg.class_weights.empty()) {
    return std::vector<double>(num_emotions + 1, 1.0);
  }
  if (static_cast<int>(cfg.class_weights.size()) != num_emotions + 1) {
    throw InvalidArgument("train config: expected " +
                          std::to_string(num_emotions + 1) + " class weights");
  }
  return cfg.class_weights;
}

FoldResult TrainFold(const FoldSplit& split,
                     const std::vector<AnnotatedVideo>& dataset,
                     const ModelConfig& model_cfg,
                     const TrainConfig& train_cfg) {
  train_cfg.Validate();
  std::unordered_map<std::string, const AnnotatedVideo*> by_id;
  for (const auto& v : dataset) by_id[v.video_id] = &v;

  std::vector<const AnnotatedVideo*> videos;
  std::vector<TargetSignals> targets;
  for (const auto& id : split.train_videos) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw InvalidArgument("unknown video " + id);
    if (it->second->flow.num_channels() != model_cfg.in_channels) {
      throw InvalidArgument("video " + id + " has " +
                            std::to_string(it->second->flow.num_channels()) +
                            " channels, model expects " +
                            std::to_string(model_cfg.in_channels));
    }
    videos.push_back(it->second);
    targets.push_back(MakeTargets(*it->second, model_cfg.num_emotions));
  }
  if (videos.empty()) throw InvalidArgument("empty training set");

  LossWeights weights;
  weights.spot_weight = train_cfg.spot_weight;
  weights.class_weights = EffectiveClassWeights(train_cfg, model_cfg.num_emotions);

  FoldResult result;
  result.params = InitParams(model_cfg, train_cfg.rng_seed);
  OptimizerState opt = AdamInit(result.params);
  std::mt19937_64 rng(train_cfg.rng_seed + 0x9e3779b97f4a7c15ull);
  const int64_t total = static_cast<int64_t>(train_cfg.epochs) * videos.size();
  const auto frozen_from = static_cast<int64_t>(
      std::ceil((1.0 - train_cfg.frozen_norm_fraction) * static_cast<double>(total)));
  std::vector<size_t> order(videos.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t idx : order) {
      const bool frozen = result.steps >= frozen_from;
      if (result.steps == frozen_from) {
        std::vector<const Mat*> flows;
        for (const AnnotatedVideo* v : videos) flows.push_back(&v->flow.values);
        RecalibrateNormStats(result.params, flows);
      }
      const ForwardOutput out =
          frozen ? ModelForwardFrozenNorm(videos[idx]->flow.values, result.params)
                 : ModelForward(videos[idx]->flow, result.params, /*train_mode=*/true);
      const TargetSignals& target = targets[idx];
      const bool any_class_weight = std::any_of(
          target.label.begin(), target.label.end(),
          [&weights](int y) { return weights.class_weights[y] > 0.0; });
      LossValue loss;
      ModelParams grads;
      if (any_class_weight) {
        LossAndGrads lg = ModelLossBackward(result.params, out, target, weights);
        loss = lg.loss;
        grads = std::move(lg.grads);
      } else {
        // Every frame has zero class weight (a neutral-only video with the
        // neutral weight at 0): only the spotting term contributes.
        const MseResult mse = MseLoss(out.spot, target.spot);
        const Vec dspot =
            weights.spot_weight *
            mse.grad.cwiseProduct(
                out.spot.unaryExpr([](double p) { return p * (1.0 - p); }));
        loss.mse = mse.loss;
        loss.total = weights.spot_weight * mse.loss;
        grads = ModelBackward(result.params, out, dspot,
                              Mat::Zero(out.recog.rows(), out.recog.cols()));
      }
      if (!std::isfinite(loss.total)) {
        throw NumericalError("non-finite loss at step " +
                             std::to_string(result.steps) + " (video " +
                             videos[idx]->video_id + ")");
      }
      if (train_cfg.clip_grad_norm > 0) {
        const double norm = GradNorm(grads);
        if (norm > train_cfg.clip_grad_norm) {
          ScaleGrads(grads, train_cfg.clip_grad_norm / norm);
        }
      }
      const double lr = OneCycleLr(result.steps, total, train_cfg.max_lr,
                                   train_cfg.warmup_fraction);
      AdamStep(result.params, grads, opt, lr, train_cfg.adam);
      UpdateRunningStats(result.params, out.batch_stats);
      result.log.push_back({result.steps, epoch, lr, loss});
      ++result.steps;
    }
  }
  return result;
}

std::vector<FoldSplit> LosoSplit(const std::vector<SubjectVideo>& videos) {
  std::map<std::string, std::vector<std::string>> by_subject;
  std::set<std::string> seen;
  for (const auto& v : videos) {
    if (!seen.insert(v.video_id).second) {
      throw InvalidArgument("duplicate video id " + v.video_id);
    }
    by_subject[v.subject_id].push_back(v.video_id);
  }
  if (by_subject.size() < 2) {
    throw InvalidArgument("leave-one-subject-out needs at least 2 subjects");
  }
  std::vector<FoldSplit> folds;
  for (auto& [subject, ids] : by_subject) {
    FoldSplit f;
    f.held_out_subject = subject;
    f.test_videos = ids;
    std::sort(f.test_videos.begin(), f.test_videos.end());
    for (const auto& [other, other_ids] : by_subject) {
      if (other == subject) continue;
      f.train_videos.insert(f.train_videos.end(), other_ids.begin(),
                            other_ids.end());
    }
    std::sort(f.train_videos.begin(), f.train_videos.end());
    folds.push_back(std::move(f));
  }
  return folds;
}

std::vector<FoldSplit> LosoSplit(const std::vector<AnnotatedVideo>& dataset) {
  std::vector<SubjectVideo> ids;
  for (const auto& v : dataset) ids.push_back({v.subject_id, v.video_id});
  return LosoSplit(ids);
}

void RoundToCheckpointPrecision(ModelParams& params) {
  ForEachTensor(params, [](const std::string&, auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      t.data()[i] = static_cast<double>(static_cast<float>(t.data()[i]));
    }
  });
}

LosoResult RunLoso(const std::vector<AnnotatedVideo>& dataset,
                   const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                   int jobs) {
  LosoResult result;
  result.splits = LosoSplit(dataset);
  result.folds.resize(result.splits.size());
  std::vector<std::map<std::string, ForwardOutput>> fold_outputs(
      result.splits.size());
  std::unordered_map<std::string, const AnnotatedVideo*> by_id;
  for (const auto& v : dataset) by_id[v.video_id] = &v;

  auto run_fold = [&](size_t i) {
    FoldResult fold =
        TrainFold(result.splits[i], dataset, model_cfg, train_cfg);
    RoundToCheckpointPrecision(fold.params);
    for (const auto& id : result.splits[i].test_videos) {
      fold_outputs[i][id] =
          ModelForward(by_id.at(id)->flow, fold.params, /*train_mode=*/false);
    }
    result.folds[i] = std::move(fold);
  };

  jobs = std::max(1, jobs);
  if (jobs == 1) {
    for (size_t i = 0; i < result.splits.size(); ++i) run_fold(i);
  } else {
    std::mutex mu;
    size_t next = 0;
    std::exception_ptr error;
    std::vector<std::thread> workers;
    for (int w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        while (true) {
          size_t i;
          {
            std::lock_guard<std::mutex> lock(mu);
            if (next >= result.splits.size() || error) return;
            i = next++;
          }
          try {
            run_fold(i);
          } catch (...) {
            std::lock_guard<std::mutex> lock(mu);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
    for (auto& t : workers) t.join();
    if (error) std::rethrow_exception(error);
  }
  for (auto& m : fold_outputs) {
    for (auto& [id, out] : m) result.outputs[id] = std::move(out);
  }
  return result;
}

std::string LossLogCsv(const std::vector<LossLogRow>& log) {
  std::ostringstream os;
  os << "step,epoch,lr,mse,ce,total\n";
  os << std::setprecision(10);
  for (const auto& r : log) {
    os << r.step << ',' << r.epoch << ',' << r.lr << ',' << r.loss.mse << ','
       << r.loss.ce << ',' << r.loss.total << '\n';
  }
  return os.str();
}

}  // namespace mespot

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

#include "mespot/optim.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "mespot/error.h"

namespace mespot {

namespace {

// Flat views over the learnable tensors, in ForEachLearnable order.
std::vector<Eigen::Map<Eigen::ArrayXd>> Views(ModelParams& p) {
  std::vector<Eigen::Map<Eigen::ArrayXd>> out;
  ForEachLearnable(p, [&out](const std::string&, auto& t) {
    out.emplace_back(t.data(), t.size());
  });
  return out;
}

std::vector<Eigen::Map<const Eigen::ArrayXd>> Views(const ModelParams& p) {
  std::vector<Eigen::Map<const Eigen::ArrayXd>> out;
  ForEachLearnable(p, [&out](const std::string&, const auto& t) {
    out.emplace_back(t.data(), t.size());
  });
  return out;
}

}  // namespace

OptimizerState AdamInit(const ModelParams& params) {
  return {ZerosLike(params), ZerosLike(params), 0};
}

void AdamStep(ModelParams& params, const ModelParams& grads,
              OptimizerState& state, double lr, const AdamConfig& cfg) {
  auto pv = Views(params);
  auto gv = Views(grads);
  auto mv = Views(state.m);
  auto vv = Views(state.v);
  if (pv.size() != gv.size() || pv.size() != mv.size()) {
    throw InvalidArgument("adam: parameter/gradient structure mismatch");
  }
  for (size_t i = 0; i < pv.size(); ++i) {
    if (pv[i].size() != gv[i].size() || pv[i].size() != mv[i].size()) {
      throw InvalidArgument("adam: tensor shape mismatch");
    }
    if (!gv[i].isFinite().all()) {
      throw NumericalError("adam: non-finite gradient, step rejected");
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < pv.size(); ++i) {
    mv[i] = cfg.beta1 * mv[i] + (1.0 - cfg.beta1) * gv[i];
    vv[i] = cfg.beta2 * vv[i] + (1.0 - cfg.beta2) * gv[i].square();
    pv[i] -= lr * (mv[i] / bc1) / ((vv[i] / bc2).sqrt() + cfg.eps);
  }
}

double OneCycleLr(int64_t step, int64_t total_steps, double max_lr,
                  double warmup_fraction) {
  if (total_steps <= 0 || step < 0 || step >= total_steps) {
    throw InvalidArgument("1cycle: step " + std::to_string(step) +
                          " outside [0, " + std::to_string(total_steps) + ")");
  }
  const double initial = max_lr / 25.0;
  const double final_lr = max_lr / 1e4;
  const double peak =
      std::max(0.0, warmup_fraction * static_cast<double>(total_steps) - 1.0);
  const double last = static_cast<double>(total_steps - 1);
  const double s = static_cast<double>(step);
  if (s <= peak) {
    if (peak == 0.0) return max_lr;
    return max_lr - (max_lr - initial) * (1.0 - s / peak);
  }
  const double progress = (s - peak) / (last - peak);
  return final_lr +
         (max_lr - final_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

double GradNorm(const ModelParams& grads) {
  double sum = 0.0;
  ForEachLearnable(grads, [&sum](const std::string&, const auto& t) {
    sum += t.squaredNorm();
  });
  return std::sqrt(sum);
}

void ScaleGrads(ModelParams& grads, double factor) {
  ForEachLearnable(grads, [factor](const std::string&, auto& t) { t *= factor; });
}

}  // namespace mespot

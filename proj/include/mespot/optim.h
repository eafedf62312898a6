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

#ifndef MESPOT_OPTIM_H_
#define MESPOT_OPTIM_H_

#include <cstdint>

#include "mespot/model.h"

namespace mespot {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moments mirror the parameter tensors (running BN stats are
// carried along but never touched).
struct OptimizerState {
  ModelParams m;
  ModelParams v;
  int64_t step = 0;
};

OptimizerState AdamInit(const ModelParams& params);

// Bias-corrected Adam update of every learnable tensor. A non-finite gradient
// rejects the whole step with NumericalError and leaves params/state intact.
void AdamStep(ModelParams& params, const ModelParams& grads,
              OptimizerState& state, double lr, const AdamConfig& cfg = {});

// 1cycle schedule: linear warm-up from max_lr/25 to max_lr, then cosine decay
// to max_lr/1e4. The peak sits at step warmup_fraction * total_steps - 1
// (clamped at 0).
double OneCycleLr(int64_t step, int64_t total_steps, double max_lr,
                  double warmup_fraction = 0.3);

// Global L2 norm over every learnable gradient tensor.
double GradNorm(const ModelParams& grads);
void ScaleGrads(ModelParams& grads, double factor);

}  // namespace mespot

#endif  // MESPOT_OPTIM_H_

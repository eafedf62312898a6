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

#ifndef MESPOT_LOSSES_H_
#define MESPOT_LOSSES_H_

#include <vector>

#include "mespot/tensor.h"

namespace mespot {

struct MseResult {
  double loss = 0.0;
  Vec grad;  // d loss / d pred = 2 (pred - target) / T
};

MseResult MseLoss(const Vec& pred, const Vec& target);

struct CeResult {
  double loss = 0.0;
  Mat grad;  // d loss / d logits, T x K
};

// Weighted cross-entropy over frames, normalized by the summed weight of the
// frame labels: sum_t -w[y_t] log p[t][y_t] / sum_t w[y_t]. `probs` are the
// softmax rows. Empty `class_weights` means all ones. Throws InvalidArgument
// when the total weight is zero.
CeResult CeLoss(const Mat& probs, const std::vector<int>& labels,
                const std::vector<double>& class_weights);

}  // namespace mespot

#endif  // MESPOT_LOSSES_H_

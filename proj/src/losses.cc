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

#include "mespot/losses.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mespot/error.h"

namespace mespot {

MseResult MseLoss(const Vec& pred, const Vec& target) {
  if (pred.size() != target.size()) {
    throw InvalidArgument("mse: length mismatch " +
                          std::to_string(pred.size()) + " vs " +
                          std::to_string(target.size()));
  }
  MseResult out;
  const Eigen::Index T = pred.size();
  out.grad = Vec::Zero(T);
  if (T == 0) return out;
  double sum = 0.0;
  for (Eigen::Index t = 0; t < T; ++t) {
    const double diff = pred[t] - target[t];
    sum += diff * diff;
    out.grad[t] = 2.0 * diff / static_cast<double>(T);
  }
  out.loss = sum / static_cast<double>(T);
  return out;
}

CeResult CeLoss(const Mat& probs, const std::vector<int>& labels,
                const std::vector<double>& class_weights) {
  const Eigen::Index T = probs.rows();
  const Eigen::Index K = probs.cols();
  if (static_cast<Eigen::Index>(labels.size()) != T) {
    throw InvalidArgument("ce: label count does not match frames");
  }
  if (!class_weights.empty() &&
      static_cast<Eigen::Index>(class_weights.size()) != K) {
    throw InvalidArgument("ce: expected " + std::to_string(K) +
                          " class weights");
  }
  auto weight = [&class_weights](int label) {
    return class_weights.empty() ? 1.0 : class_weights[label];
  };
  double total_weight = 0.0;
  for (int y : labels) {
    if (y < 0 || y >= K) throw InvalidArgument("ce: label out of range");
    total_weight += weight(y);
  }
  if (!(total_weight > 0.0)) {
    throw InvalidArgument("ce: degenerate weighting, total label weight is 0");
  }
  CeResult out;
  out.grad = Mat::Zero(T, K);
  double loss = 0.0;
  constexpr double kTiny = std::numeric_limits<double>::min();
  for (Eigen::Index t = 0; t < T; ++t) {
    const int y = labels[t];
    const double w = weight(y);
    if (w == 0.0) continue;
    loss -= w * std::log(std::max(probs(t, y), kTiny));
    const double scale = w / total_weight;
    out.grad.row(t) = scale * probs.row(t);
    out.grad(t, y) -= scale;
  }
  out.loss = loss / total_weight;
  return out;
}

}  // namespace mespot

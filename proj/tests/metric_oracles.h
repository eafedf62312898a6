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

#ifndef MESPOT_TESTS_METRIC_ORACLES_H_
#define MESPOT_TESTS_METRIC_ORACLES_H_

// Brute-force reference implementations for the evaluation metrics. They
// enumerate sets and assignments directly instead of reusing any library
// arithmetic.

#include <algorithm>
#include <functional>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "mespot/metrics.h"

namespace mespot::testing {

inline double BruteIou(const FrameSpan& a, const FrameSpan& b) {
  std::set<int> fa, fb, uni;
  for (int t = a.onset; t <= a.offset; ++t) fa.insert(t);
  for (int t = b.onset; t <= b.offset; ++t) fb.insert(t);
  int inter = 0;
  for (int t : fa) inter += fb.count(t) ? 1 : 0;
  uni = fa;
  uni.insert(fb.begin(), fb.end());
  return static_cast<double>(inter) / static_cast<double>(uni.size());
}

// Largest number of one-to-one (prediction, truth) pairs with IoU > 0.5,
// found by trying every assignment.
inline int BruteMaxMatches(const std::vector<PredictedInterval>& preds,
                           const std::vector<FrameSpan>& truths) {
  std::vector<bool> used(truths.size(), false);
  std::function<int(size_t)> go = [&](size_t i) -> int {
    if (i == preds.size()) return 0;
    int best = go(i + 1);
    for (size_t j = 0; j < truths.size(); ++j) {
      if (used[j]) continue;
      if (BruteIou({preds[i].onset, preds[i].offset}, truths[j]) > 0.5) {
        used[j] = true;
        best = std::max(best, 1 + go(i + 1));
        used[j] = false;
      }
    }
    return best;
  };
  return go(0);
}

struct BruteRecognition {
  double f1 = 0.0;
  double uf1 = 0.0;
  double uar = 0.0;
};

// Per-class loops straight over the (pred, truth) list.
inline BruteRecognition BruteRecognitionScores(
    const std::vector<std::pair<int, int>>& pairs, int num_emotions) {
  BruteRecognition r;
  if (pairs.empty()) return r;
  int correct = 0;
  for (const auto& [p, t] : pairs) correct += p == t;
  r.f1 = static_cast<double>(correct) / pairs.size();
  int present = 0;
  double f1_sum = 0.0, recall_sum = 0.0;
  for (int k = 1; k <= num_emotions; ++k) {
    int tp = 0, fp = 0, fn = 0;
    for (const auto& [p, t] : pairs) {
      if (p == k && t == k) ++tp;
      if (p == k && t != k) ++fp;
      if (p != k && t == k) ++fn;
    }
    if (tp + fn == 0) continue;
    ++present;
    recall_sum += static_cast<double>(tp) / (tp + fn);
    f1_sum += 2.0 * tp / (2.0 * tp + fp + fn);
  }
  r.uf1 = f1_sum / present;
  r.uar = recall_sum / present;
  return r;
}

// Random disjoint truths and arbitrary predictions inside [0, T).
struct MatchInstance {
  std::vector<PredictedInterval> preds;
  std::vector<FrameSpan> truths;
};

inline MatchInstance RandomMatchInstance(std::mt19937_64& rng, int max_each) {
  MatchInstance m;
  const int T = 40;
  std::uniform_int_distribution<int> count(0, max_each);
  std::uniform_int_distribution<int> len(1, 8);
  int cursor = std::uniform_int_distribution<int>(0, 3)(rng);
  const int nt = count(rng);
  for (int i = 0; i < nt && cursor < T; ++i) {
    const int l = len(rng);
    const int off = std::min(T - 1, cursor + l - 1);
    m.truths.push_back({cursor, off});
    cursor = off + 1 + std::uniform_int_distribution<int>(0, 4)(rng);
  }
  const int np = count(rng);
  std::uniform_real_distribution<double> score(0, 1);
  for (int i = 0; i < np; ++i) {
    int on, off;
    if (!m.truths.empty() && score(rng) < 0.6) {
      // near some truth so that matches actually occur
      const auto& t = m.truths[std::uniform_int_distribution<size_t>(0, m.truths.size() - 1)(rng)];
      on = std::max(0, t.onset + std::uniform_int_distribution<int>(-2, 2)(rng));
      off = std::max(on, t.offset + std::uniform_int_distribution<int>(-2, 2)(rng));
    } else {
      on = std::uniform_int_distribution<int>(0, T - 1)(rng);
      off = std::min(T - 1, on + len(rng) - 1);
    }
    m.preds.push_back({on, off, score(rng), 1});
  }
  return m;
}

}  // namespace mespot::testing

#endif  // MESPOT_TESTS_METRIC_ORACLES_H_

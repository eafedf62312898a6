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

#include "mespot/metrics.h"

#include <algorithm>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "mespot/error.h"

namespace mespot {

double IntervalIou(const FrameSpan& a, const FrameSpan& b) {
  if (a.onset > a.offset || b.onset > b.offset) {
    throw InvalidArgument("malformed interval: onset after offset");
  }
  const int inter =
      std::max(0, std::min(a.offset, b.offset) - std::max(a.onset, b.onset) + 1);
  const int uni = (a.offset - a.onset + 1) + (b.offset - b.onset + 1) - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

MatchReport MatchIntervals(const std::vector<PredictedInterval>& predictions,
                           const std::vector<FrameSpan>& truths) {
  std::vector<int> order(predictions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return predictions[a].score > predictions[b].score;
  });
  std::vector<bool> used(truths.size(), false);
  MatchReport report;
  for (int i : order) {
    const FrameSpan p{predictions[i].onset, predictions[i].offset};
    int best = -1;
    double best_iou = 0.0;
    for (size_t g = 0; g < truths.size(); ++g) {
      if (used[g]) continue;
      const double iou = IntervalIou(p, truths[g]);
      if (iou > best_iou) {
        best_iou = iou;
        best = static_cast<int>(g);
      }
    }
    PredictionMatch m{i, -1, best_iou};
    if (best >= 0 && best_iou > kIouThreshold) {
      m.truth = best;
      used[best] = true;
      ++report.tp;
    } else {
      ++report.fp;
    }
    report.matches.push_back(m);
  }
  report.fn = static_cast<int>(std::count(used.begin(), used.end(), false));
  return report;
}

F1Score F1FromCounts(int tp, int fp, int fn) {
  if (tp < 0 || fp < 0 || fn < 0) throw InvalidArgument("negative counts");
  F1Score s;
  s.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  s.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  s.f1 = s.precision + s.recall > 0
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

RecognitionScores RecognitionFromConfusion(
    const std::vector<std::vector<int>>& confusion) {
  RecognitionScores r;
  r.confusion = confusion;
  const size_t K = confusion.size();
  long total = 0;
  long correct = 0;
  std::vector<long> row(K, 0), col(K, 0);
  for (size_t i = 0; i < K; ++i) {
    for (size_t j = 0; j < K; ++j) {
      row[i] += confusion[i][j];
      col[j] += confusion[i][j];
      total += confusion[i][j];
    }
    correct += confusion[i][i];
  }
  if (total == 0) return r;
  r.empty = false;
  r.f1 = static_cast<double>(correct) / static_cast<double>(total);
  double uf1 = 0.0, uar = 0.0;
  int present = 0;
  for (size_t c = 0; c < K; ++c) {
    if (row[c] == 0) continue;
    ++present;
    const double tp = confusion[c][c];
    uar += tp / static_cast<double>(row[c]);
    uf1 += 2.0 * tp / static_cast<double>(row[c] + col[c]);
  }
  r.uf1 = uf1 / present;
  r.uar = uar / present;
  return r;
}

RecognitionScores RecognitionMetrics(
    const std::vector<std::pair<int, int>>& pairs, int num_emotions) {
  std::vector<std::vector<int>> confusion(num_emotions,
                                          std::vector<int>(num_emotions, 0));
  for (const auto& [pred, truth] : pairs) {
    if (pred < 1 || pred > num_emotions || truth < 1 || truth > num_emotions) {
      throw InvalidArgument("emotion id outside 1.." +
                            std::to_string(num_emotions));
    }
    ++confusion[truth - 1][pred - 1];
  }
  return RecognitionFromConfusion(confusion);
}

double Strs(double spot_f1, double recog_f1) { return spot_f1 * recog_f1; }

ScoreBoard EvaluateLoso(const std::vector<VideoPrediction>& predictions,
                        const std::vector<AnnotatedVideo>& dataset,
                        int num_emotions) {
  std::map<std::string, const VideoPrediction*> by_id;
  for (const auto& p : predictions) by_id[p.video_id] = &p;
  std::vector<const AnnotatedVideo*> videos;
  for (const auto& v : dataset) videos.push_back(&v);
  std::sort(videos.begin(), videos.end(),
            [](auto* a, auto* b) { return a->video_id < b->video_id; });

  ScoreBoard board;
  std::vector<std::pair<int, int>> pairs;
  for (const AnnotatedVideo* v : videos) {
    auto it = by_id.find(v->video_id);
    if (it == by_id.end()) {
      throw InvalidArgument("missing predictions for video " + v->video_id);
    }
    const auto truths_iv = v->MicroIntervals();
    std::vector<FrameSpan> truths;
    for (const auto& t : truths_iv) truths.push_back({t.onset, t.offset});
    const auto& preds = it->second->intervals;
    const MatchReport report = MatchIntervals(preds, truths);
    board.tp += report.tp;
    board.fp += report.fp;
    board.fn += report.fn;
    for (const auto& m : report.matches) {
      if (m.truth >= 0) {
        pairs.emplace_back(preds[m.prediction].emotion,
                           truths_iv[m.truth].emotion);
      }
    }
    ++board.num_videos;
  }
  board.spot = F1FromCounts(board.tp, board.fp, board.fn);
  board.recog = RecognitionMetrics(pairs, num_emotions);
  board.strs = Strs(board.spot.f1, board.recog.f1);
  return board;
}

std::string ScoreBoard::ToJson() const {
  nlohmann::json j = {
      {"num_videos", num_videos},
      {"spotting",
       {{"tp", tp},
        {"fp", fp},
        {"fn", fn},
        {"precision", spot.precision},
        {"recall", spot.recall},
        {"f1", spot.f1}}},
      {"recognition",
       {{"f1", recog.f1},
        {"uf1", recog.uf1},
        {"uar", recog.uar},
        {"empty", recog.empty},
        {"confusion", recog.confusion}}},
      {"strs", strs}};
  return j.dump(2) + "\n";
}

std::string ScoreBoard::ToTable() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "videos           " << num_videos << "\n"
     << "TP / FP / FN     " << tp << " / " << fp << " / " << fn << "\n"
     << "spot precision   " << spot.precision << "\n"
     << "spot recall      " << spot.recall << "\n"
     << "spot F1          " << spot.f1 << "\n"
     << "recog F1         " << recog.f1 << (recog.empty ? "  (no TPs)" : "")
     << "\n"
     << "recog UF1        " << recog.uf1 << "\n"
     << "recog UAR        " << recog.uar << "\n"
     << "STRS             " << strs << "\n";
  return os.str();
}

std::string ScoreBoard::ConfusionCsv() const {
  std::ostringstream os;
  os << "truth\\pred";
  for (size_t j = 0; j < recog.confusion.size(); ++j) os << ',' << j + 1;
  os << '\n';
  for (size_t i = 0; i < recog.confusion.size(); ++i) {
    os << i + 1;
    for (int v : recog.confusion[i]) os << ',' << v;
    os << '\n';
  }
  return os.str();
}

}  // namespace mespot

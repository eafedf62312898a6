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

#ifndef MESPOT_STREAM_H_
#define MESPOT_STREAM_H_

// Frame-by-frame inference with constant work per frame. Uses the running
// batch-norm statistics, so outputs match ModelForward(..., train_mode=false)
// on every prefix.

#include <cstdint>
#include <span>
#include <vector>

#include "mespot/model.h"

namespace mespot {

struct BlockStreamState {
  Mat conv_history;  // (k_dw - 1) x ED, oldest first
  Mat h;             // ED x N
  Mat a;             // ED x N, -exp(a_log)
};

struct StreamState {
  Mat stem1_history;  // (k - 1) x C, oldest first
  Mat stem2_history;  // (k - 1) x D
  std::vector<BlockStreamState> spot_blocks;
  std::vector<BlockStreamState> recog_blocks;
  int64_t frames_seen = 0;
};

struct StreamOutput {
  double spot = 0.0;
  RowVec recog;  // emo + 1, sums to 1
};

StreamState StreamOpen(const ModelParams& params);

StreamOutput StreamStep(const ModelParams& params, StreamState& state,
                        std::span<const double> frame);

// Convenience: streams every row of `flow` and stacks the outputs into a
// ForwardOutput (spot/recog only).
ForwardOutput StreamReplay(const ModelParams& params, const Mat& flow);

}  // namespace mespot

#endif  // MESPOT_STREAM_H_

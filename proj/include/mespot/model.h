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

#ifndef MESPOT_MODEL_H_
#define MESPOT_MODEL_H_

// Dual-pathway temporal state transition network.
//
//   flow (T x C) -> stem: [causal conv -> batch norm -> ReLU] x 2 -> (T x D)
//     -> spotting pathway:    gated selective-SSM blocks -> D->1 -> sigmoid
//     -> recognition pathway: gated selective-SSM blocks -> D->emo+1 -> softmax
//
// Everything runs in double precision. Convolutions are causal so a frame's
// outputs depend only on that frame and its past, which is what makes
// streaming inference exact.

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mespot/flow_data.h"
#include "mespot/tensor.h"

namespace mespot {

struct ModelConfig {
  int in_channels = 24;
  int stem_dim = 16;
  int stem_kernel = 3;
  int num_blocks = 1;  // per pathway
  int state_size = 8;
  int expand = 2;
  int conv_kernel = 4;  // depthwise conv inside each block
  int num_emotions = 4;

  int inner_dim() const { return stem_dim * expand; }
  int num_classes() const { return num_emotions + 1; }
  void Validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct BatchNormParams {
  Vec scale;
  Vec shift;
  Vec running_mean;  // not learnable
  Vec running_var;   // not learnable
};

struct BlockParams {
  Mat in_proj;    // ED x D
  Mat gate_proj;  // ED x D
  Mat conv;       // ED x k_dw, causal depthwise
  Mat dt_proj;    // ED x ED
  Vec dt_bias;    // ED
  Mat b_proj;     // N x ED
  Mat c_proj;     // N x ED
  Mat a_log;      // ED x N, A = -exp(a_log)
  Vec d_skip;     // ED
  Mat out_proj;   // D x ED
};

struct ModelParams {
  ModelConfig config;
  Mat stem_conv1;  // D x (C * k), column i * k + j is input channel i, tap j
  Mat stem_conv2;  // D x (D * k)
  BatchNormParams bn1;
  BatchNormParams bn2;
  std::vector<BlockParams> spot_blocks;
  std::vector<BlockParams> recog_blocks;
  Mat spot_head;   // 1 x D
  Vec spot_bias;   // 1
  Mat recog_head;  // (emo + 1) x D
  Vec recog_bias;  // emo + 1
};

inline constexpr double kBatchNormEps = 1e-5;

// Calls fn(name, tensor) for every learnable tensor, in a fixed order.
// `tensor` is a Mat& or Vec& (const when params is const).
template <typename Params, typename Fn>
void ForEachLearnable(Params& p, Fn&& fn) {
  fn("stem.conv1", p.stem_conv1);
  fn("stem.bn1.scale", p.bn1.scale);
  fn("stem.bn1.shift", p.bn1.shift);
  fn("stem.conv2", p.stem_conv2);
  fn("stem.bn2.scale", p.bn2.scale);
  fn("stem.bn2.shift", p.bn2.shift);
  auto blocks = [&fn](auto& list, const std::string& prefix) {
    for (size_t i = 0; i < list.size(); ++i) {
      const std::string b = prefix + std::to_string(i) + ".";
      fn(b + "in_proj", list[i].in_proj);
      fn(b + "gate_proj", list[i].gate_proj);
      fn(b + "conv", list[i].conv);
      fn(b + "dt_proj", list[i].dt_proj);
      fn(b + "dt_bias", list[i].dt_bias);
      fn(b + "b_proj", list[i].b_proj);
      fn(b + "c_proj", list[i].c_proj);
      fn(b + "a_log", list[i].a_log);
      fn(b + "d_skip", list[i].d_skip);
      fn(b + "out_proj", list[i].out_proj);
    }
  };
  blocks(p.spot_blocks, "spot.block");
  blocks(p.recog_blocks, "recog.block");
  fn("spot.head", p.spot_head);
  fn("spot.bias", p.spot_bias);
  fn("recog.head", p.recog_head);
  fn("recog.bias", p.recog_bias);
}

// Learnable tensors plus the batch-norm running statistics.
template <typename Params, typename Fn>
void ForEachTensor(Params& p, Fn&& fn) {
  ForEachLearnable(p, fn);
  fn("stem.bn1.running_mean", p.bn1.running_mean);
  fn("stem.bn1.running_var", p.bn1.running_var);
  fn("stem.bn2.running_mean", p.bn2.running_mean);
  fn("stem.bn2.running_var", p.bn2.running_var);
}

// Seeded initialization: fan-in uniform weights, unit batch norm, A_log =
// log(1..N) per channel, softplus(dt_bias) log-uniform in [1e-3, 1e-1].
ModelParams InitParams(const ModelConfig& config, uint64_t seed);

// Same shapes as `params`, every tensor zero.
ModelParams ZerosLike(const ModelParams& params);

// Throws InvalidArgument if any tensor has the wrong shape for params.config.
void ValidateShapes(const ModelParams& params);

// Throws NumericalError if a tensor is non-finite.
void CheckFinite(const ModelParams& params);

// --- building blocks (exposed for tests and the streaming path) ---

struct StemLayerCache {
  bool batch_stats = true;  // false when running stats were used
  Mat lagged;   // T x (Cin * k)
  Mat xhat;     // T x D
  Vec inv_std;  // D
  Mat out;      // T x D, post-ReLU
};

struct BlockCache {
  Mat x;       // T x D
  Mat u_pre;   // T x ED
  Mat c;       // T x ED, conv output
  Mat u;       // T x ED, SiLU(c)
  Mat z_pre;   // T x ED
  Mat z;       // T x ED
  Mat s;       // T x ED, pre-softplus
  Mat delta;   // T x ED
  Mat b;       // T x N
  Mat c_sel;   // T x N
  Mat a;       // ED x N
  Mat h;       // T x (ED * N), state after each step
  Mat y;       // T x ED
};

// Stacks the k most recent frames: out(t, i*k + j) = x(t - (k-1) + j, i),
// zero before frame 0.
Mat LaggedFrames(const Mat& x, int k);

// One stem layer: causal conv -> batch norm -> ReLU. In train mode the batch
// statistics over the T frames are used and returned through batch_mean /
// batch_var (unbiased); otherwise running statistics are used.
Mat StemLayerForward(const Mat& x, const Mat& weight, const BatchNormParams& bn,
                     int kernel, bool train_mode, StemLayerCache* cache,
                     Vec* batch_mean, Vec* batch_var);

Mat StemForward(const Mat& flow, const ModelParams& params, bool train_mode);

// y(t,d) = <c_sel(t,:), h_t(d,:)> + d_skip(d) u(t,d) with
// h_t(d,:) = exp(delta(t,d) a(d,:)) * h_{t-1}(d,:) + delta(t,d) b(t,:) u(t,d).
// If h_history is given it receives the state after every step (T x ED*N).
Mat SelectiveScan(const Mat& u, const Mat& delta, const Mat& a, const Mat& b,
                  const Mat& c_sel, const Vec& d_skip,
                  Mat* h_history = nullptr);

struct ScanGrads {
  Mat du;
  Mat ddelta;
  Mat da;
  Mat db;
  Mat dc_sel;
  Vec dd_skip;
};

ScanGrads SelectiveScanBackward(const Mat& u, const Mat& delta, const Mat& a,
                                const Mat& b, const Mat& c_sel,
                                const Vec& d_skip, const Mat& h_history,
                                const Mat& dy);

Mat CausalDepthwiseConv(const Mat& x, const Mat& kernel);

Mat BlockForward(const Mat& x, const BlockParams& block,
                 BlockCache* cache = nullptr);

inline double Silu(double x) { return x / (1.0 + std::exp(-x)); }
double Softplus(double x);
double Sigmoid(double x);

// --- whole model ---

struct ForwardCache {
  StemLayerCache stem1;
  StemLayerCache stem2;
  std::vector<BlockCache> spot_blocks;
  std::vector<BlockCache> recog_blocks;
  Mat spot_features;   // T x D
  Mat recog_features;  // T x D
};

struct BatchStats {
  Vec mean1, var1, mean2, var2;
};

struct ForwardOutput {
  Vec spot;              // T, sigmoid output
  Mat recog;             // T x (emo + 1), softmax rows
  Vec spot_logit;        // T
  Mat recog_logits;      // T x (emo + 1)
  std::shared_ptr<const ForwardCache> cache;  // only in train mode
  BatchStats batch_stats;                     // only in train mode

  int num_frames() const { return static_cast<int>(spot.size()); }
};

ForwardOutput ModelForward(const FlowSequence& flow, const ModelParams& params,
                           bool train_mode);
ForwardOutput ModelForward(const Mat& flow, const ModelParams& params,
                           bool train_mode);
// Train-mode forward (caches kept for ModelBackward) that normalizes with the
// running statistics instead of the batch's, so the network adapts to the
// normalization it will see at inference. batch_stats is left empty.
ForwardOutput ModelForwardFrozenNorm(const Mat& flow, const ModelParams& params);

// Replaces the running statistics with population statistics over every frame
// of `flows`: layer 1 first, then layer 2 on the layer-1 output normalized
// with its new statistics.
void RecalibrateNormStats(ModelParams& params, const std::vector<const Mat*>& flows);

// Blends batch statistics from a train-mode forward into the running stats.
void UpdateRunningStats(ModelParams& params, const BatchStats& stats,
                        double momentum = 0.1);

// Reverse-mode gradients given the loss gradient w.r.t. the spot logits (T)
// and the recognition logits (T x (emo+1)).
ModelParams ModelBackward(const ModelParams& params, const ForwardOutput& out,
                          const Vec& dspot_logit, const Mat& drecog_logits);

struct LossWeights {
  double spot_weight = 1.0;           // lambda on the MSE term
  std::vector<double> class_weights;  // emo + 1; empty means all ones
};

struct LossValue {
  double mse = 0.0;
  double ce = 0.0;
  double total = 0.0;
};

// Total loss spot_weight * MSE(spot, target) + weighted CE(recog, label).
LossValue ComputeLoss(const ForwardOutput& out, const TargetSignals& targets,
                      const LossWeights& weights, Vec* dspot_logit = nullptr,
                      Mat* drecog_logits = nullptr);

struct LossAndGrads {
  LossValue loss;
  ModelParams grads;
};

LossAndGrads ModelLossBackward(const ModelParams& params,
                               const ForwardOutput& out,
                               const TargetSignals& targets,
                               const LossWeights& weights);

// --- budget accounting ---

int64_t ParamCount(const ModelConfig& config);

struct MacCount {
  int64_t per_frame = 0;
  int64_t fixed = 0;  // T-independent work (materializing A, folding BN)
  int64_t Total(int64_t frames) const { return fixed + per_frame * frames; }
};

MacCount CountMacs(const ModelConfig& config);

}  // namespace mespot

#endif  // MESPOT_MODEL_H_

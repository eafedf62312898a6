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

#include "mespot/stream.h"

#include <cmath>
#include <string>

#include "mespot/error.h"

namespace mespot {

namespace {

// Pushes `row` as the newest entry of a fixed-length history.
void Push(Mat& history, const RowVec& row) {
  const Eigen::Index n = history.rows();
  if (n == 0) return;
  for (Eigen::Index r = 0; r + 1 < n; ++r) history.row(r) = history.row(r + 1);
  history.row(n - 1) = row;
}

RowVec StemStep(const RowVec& x, Mat& history, const Mat& weight,
                const BatchNormParams& bn, int k) {
  const Eigen::Index C = x.size();
  RowVec lagged(C * k);
  for (Eigen::Index i = 0; i < C; ++i) {
    for (int j = 0; j < k - 1; ++j) lagged[i * k + j] = history(j, i);
    lagged[i * k + k - 1] = x[i];
  }
  Push(history, x);
  const RowVec conv = lagged * weight.transpose();
  RowVec out(conv.size());
  for (Eigen::Index o = 0; o < conv.size(); ++o) {
    const double inv_std = 1.0 / std::sqrt(bn.running_var[o] + kBatchNormEps);
    const double v = (conv[o] - bn.running_mean[o]) * inv_std * bn.scale[o] +
                     bn.shift[o];
    out[o] = v > 0.0 ? v : 0.0;
  }
  return out;
}

RowVec BlockStep(const RowVec& x, const BlockParams& p, BlockStreamState& s) {
  const Eigen::Index E = p.in_proj.rows();
  const Eigen::Index N = p.a_log.cols();
  const int k = static_cast<int>(p.conv.cols());
  const RowVec u_pre = x * p.in_proj.transpose();
  RowVec u(E);
  for (Eigen::Index d = 0; d < E; ++d) {
    double c = p.conv(d, k - 1) * u_pre[d];
    for (int j = 0; j < k - 1; ++j) c += p.conv(d, j) * s.conv_history(j, d);
    u[d] = Silu(c);
  }
  Push(s.conv_history, u_pre);
  const RowVec z_pre = x * p.gate_proj.transpose();
  const RowVec s_pre = u * p.dt_proj.transpose() + p.dt_bias.transpose();
  const RowVec b = u * p.b_proj.transpose();
  const RowVec c_sel = u * p.c_proj.transpose();
  RowVec g(E);
  for (Eigen::Index d = 0; d < E; ++d) {
    const double dt = Softplus(s_pre[d]);
    const double dtu = dt * u[d];
    double acc = 0.0;
    for (Eigen::Index n = 0; n < N; ++n) {
      double& h = s.h(d, n);
      h = std::exp(dt * s.a(d, n)) * h + dtu * b[n];
      acc += c_sel[n] * h;
    }
    const double y = acc + p.d_skip[d] * u[d];
    g[d] = y * Silu(z_pre[d]);
  }
  return x + g * p.out_proj.transpose();
}

std::vector<BlockStreamState> OpenBlocks(const std::vector<BlockParams>& blocks) {
  std::vector<BlockStreamState> out;
  for (const auto& b : blocks) {
    BlockStreamState s;
    s.conv_history = Mat::Zero(b.conv.cols() - 1, b.in_proj.rows());
    s.h = Mat::Zero(b.a_log.rows(), b.a_log.cols());
    s.a = -b.a_log.array().exp().matrix();
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

StreamState StreamOpen(const ModelParams& params) {
  const ModelConfig& cfg = params.config;
  StreamState s;
  s.stem1_history = Mat::Zero(cfg.stem_kernel - 1, cfg.in_channels);
  s.stem2_history = Mat::Zero(cfg.stem_kernel - 1, cfg.stem_dim);
  s.spot_blocks = OpenBlocks(params.spot_blocks);
  s.recog_blocks = OpenBlocks(params.recog_blocks);
  return s;
}

StreamOutput StreamStep(const ModelParams& p, StreamState& state,
                        std::span<const double> frame) {
  const ModelConfig& cfg = p.config;
  if (static_cast<int>(frame.size()) != cfg.in_channels) {
    throw InvalidArgument("stream frame has " + std::to_string(frame.size()) +
                          " channels, model expects " +
                          std::to_string(cfg.in_channels));
  }
  const RowVec x = Eigen::Map<const RowVec>(frame.data(), frame.size());
  const RowVec h1 =
      StemStep(x, state.stem1_history, p.stem_conv1, p.bn1, cfg.stem_kernel);
  const RowVec stem =
      StemStep(h1, state.stem2_history, p.stem_conv2, p.bn2, cfg.stem_kernel);

  RowVec spot_h = stem;
  for (size_t i = 0; i < p.spot_blocks.size(); ++i) {
    spot_h = BlockStep(spot_h, p.spot_blocks[i], state.spot_blocks[i]);
  }
  RowVec recog_h = stem;
  for (size_t i = 0; i < p.recog_blocks.size(); ++i) {
    recog_h = BlockStep(recog_h, p.recog_blocks[i], state.recog_blocks[i]);
  }

  StreamOutput out;
  out.spot = Sigmoid(spot_h.dot(p.spot_head.row(0)) + p.spot_bias[0]);
  RowVec logits = recog_h * p.recog_head.transpose() + p.recog_bias.transpose();
  const double m = logits.maxCoeff();
  out.recog = (logits.array() - m).exp().matrix();
  out.recog /= out.recog.sum();
  ++state.frames_seen;
  return out;
}

ForwardOutput StreamReplay(const ModelParams& params, const Mat& flow) {
  StreamState state = StreamOpen(params);
  ForwardOutput out;
  const Eigen::Index T = flow.rows();
  out.spot.resize(T);
  out.recog.resize(T, params.config.num_classes());
  for (Eigen::Index t = 0; t < T; ++t) {
    const RowVec row = flow.row(t);
    const StreamOutput o =
        StreamStep(params, state, std::span<const double>(row.data(), row.size()));
    out.spot[t] = o.spot;
    out.recog.row(t) = o.recog;
  }
  return out;
}

}  // namespace mespot

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

#include "mespot/model.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "mespot/error.h"
#include "mespot/losses.h"

namespace mespot {

namespace {

double SiluGrad(double x) {
  const double s = Sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

void Fill(std::mt19937_64& rng, Mat& m, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
}

void Fill(std::mt19937_64& rng, Vec& v, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = dist(rng);
}

BatchNormParams InitBatchNorm(int dim) {
  return {Vec::Ones(dim), Vec::Zero(dim), Vec::Zero(dim), Vec::Ones(dim)};
}

BlockParams InitBlock(const ModelConfig& cfg, std::mt19937_64& rng) {
  const int D = cfg.stem_dim;
  const int E = cfg.inner_dim();
  const int N = cfg.state_size;
  BlockParams b;
  b.in_proj.resize(E, D);
  b.gate_proj.resize(E, D);
  b.conv.resize(E, cfg.conv_kernel);
  b.dt_proj.resize(E, E);
  b.dt_bias.resize(E);
  b.b_proj.resize(N, E);
  b.c_proj.resize(N, E);
  b.a_log.resize(E, N);
  b.d_skip = Vec::Ones(E);
  b.out_proj.resize(D, E);
  Fill(rng, b.in_proj, 1.0 / std::sqrt(D));
  Fill(rng, b.gate_proj, 1.0 / std::sqrt(D));
  Fill(rng, b.conv, 1.0 / std::sqrt(cfg.conv_kernel));
  Fill(rng, b.dt_proj, 1.0 / std::sqrt(E));
  Fill(rng, b.b_proj, 1.0 / std::sqrt(E));
  Fill(rng, b.c_proj, 1.0 / std::sqrt(E));
  Fill(rng, b.out_proj, 1.0 / std::sqrt(E));
  std::uniform_real_distribution<double> log_dt(std::log(1e-3), std::log(1e-1));
  for (int d = 0; d < E; ++d) {
    const double dt = std::exp(log_dt(rng));
    b.dt_bias[d] = dt + std::log(-std::expm1(-dt));  // softplus^-1
    for (int n = 0; n < N; ++n) b.a_log(d, n) = std::log(n + 1.0);
  }
  return b;
}

void CheckShape(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                Eigen::Index want_rows, Eigen::Index want_cols) {
  if (rows != want_rows || cols != want_cols) {
    throw InvalidArgument("tensor " + name + " has shape " +
                          std::to_string(rows) + "x" + std::to_string(cols) +
                          ", expected " + std::to_string(want_rows) + "x" +
                          std::to_string(want_cols));
  }
}

// Softmax of each row.
Mat RowSoftmax(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    const double m = logits.row(t).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index k = 0; k < logits.cols(); ++k) {
      out(t, k) = std::exp(logits(t, k) - m);
      sum += out(t, k);
    }
    out.row(t) /= sum;
  }
  return out;
}

// Backward of one stem layer (train mode). Returns d input when need_dx.
Mat StemLayerBackward(const Mat& dout, const Mat& weight,
                      const BatchNormParams& bn, int kernel,
                      const StemLayerCache& cache, Mat* dweight,
                      BatchNormParams* dbn, Eigen::Index in_channels,
                      bool need_dx) {
  const Eigen::Index T = dout.rows();
  const Eigen::Index D = dout.cols();
  Mat dpre = dout;
  for (Eigen::Index i = 0; i < dpre.size(); ++i) {
    if (!(cache.out.data()[i] > 0.0)) dpre.data()[i] = 0.0;
  }
  dbn->scale += (dpre.cwiseProduct(cache.xhat)).colwise().sum().transpose();
  dbn->shift += dpre.colwise().sum().transpose();

  Mat dconv(T, D);
  if (!cache.batch_stats) {
    dconv = dpre * (bn.scale.cwiseProduct(cache.inv_std)).asDiagonal();
  }
  for (Eigen::Index o = 0; cache.batch_stats && o < D; ++o) {
    double sum_dxhat = 0.0;
    double sum_dxhat_xhat = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) {
      const double g = dpre(t, o) * bn.scale[o];
      sum_dxhat += g;
      sum_dxhat_xhat += g * cache.xhat(t, o);
    }
    const double k = cache.inv_std[o] / static_cast<double>(T);
    for (Eigen::Index t = 0; t < T; ++t) {
      const double g = dpre(t, o) * bn.scale[o];
      dconv(t, o) = k * (static_cast<double>(T) * g - sum_dxhat -
                         cache.xhat(t, o) * sum_dxhat_xhat);
    }
  }
  dweight->noalias() += dconv.transpose() * cache.lagged;
  if (!need_dx) return {};
  const Mat dlagged = dconv * weight;
  Mat dx = Mat::Zero(T, in_channels);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index i = 0; i < in_channels; ++i) {
      for (int j = 0; j < kernel; ++j) {
        const Eigen::Index src = t - (kernel - 1) + j;
        if (src >= 0) dx(src, i) += dlagged(t, i * kernel + j);
      }
    }
  }
  return dx;
}

// Backward of one block. Accumulates into *grad and returns d x.
Mat BlockBackward(const Mat& dout, const BlockParams& p, const BlockCache& c,
                  BlockParams* grad) {
  const Eigen::Index T = dout.rows();
  const Eigen::Index E = p.in_proj.rows();
  const Mat g = c.y.cwiseProduct(c.z);
  grad->out_proj.noalias() += dout.transpose() * g;
  const Mat dg = dout * p.out_proj;
  const Mat dy = dg.cwiseProduct(c.z);
  Mat dz_pre = dg.cwiseProduct(c.y);
  for (Eigen::Index i = 0; i < dz_pre.size(); ++i) {
    dz_pre.data()[i] *= SiluGrad(c.z_pre.data()[i]);
  }

  ScanGrads sg = SelectiveScanBackward(c.u, c.delta, c.a, c.b, c.c_sel,
                                       p.d_skip, c.h, dy);
  grad->a_log += sg.da.cwiseProduct(c.a);
  grad->d_skip += sg.dd_skip;

  Mat ds = sg.ddelta;
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    ds.data()[i] *= Sigmoid(c.s.data()[i]);
  }
  grad->dt_proj.noalias() += ds.transpose() * c.u;
  grad->dt_bias += ds.colwise().sum().transpose();
  grad->b_proj.noalias() += sg.db.transpose() * c.u;
  grad->c_proj.noalias() += sg.dc_sel.transpose() * c.u;
  Mat du = sg.du;
  du.noalias() += ds * p.dt_proj;
  du.noalias() += sg.db * p.b_proj;
  du.noalias() += sg.dc_sel * p.c_proj;

  Mat dc = du;
  for (Eigen::Index i = 0; i < dc.size(); ++i) {
    dc.data()[i] *= SiluGrad(c.c.data()[i]);
  }
  const int k = static_cast<int>(p.conv.cols());
  Mat du_pre = Mat::Zero(T, E);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (int j = 0; j < k; ++j) {
      const Eigen::Index src = t - (k - 1) + j;
      if (src < 0) continue;
      for (Eigen::Index d = 0; d < E; ++d) {
        grad->conv(d, j) += dc(t, d) * c.u_pre(src, d);
        du_pre(src, d) += dc(t, d) * p.conv(d, j);
      }
    }
  }
  grad->in_proj.noalias() += du_pre.transpose() * c.x;
  grad->gate_proj.noalias() += dz_pre.transpose() * c.x;
  Mat dx = dout;
  dx.noalias() += du_pre * p.in_proj;
  dx.noalias() += dz_pre * p.gate_proj;
  return dx;
}

}  // namespace

double Softplus(double x) {
  if (x > 30.0) return x;
  return std::log1p(std::exp(x));
}

double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void ModelConfig::Validate() const {
  if (in_channels <= 0 || stem_dim <= 0 || stem_kernel <= 0 ||
      num_blocks <= 0 || state_size <= 0 || expand <= 0 || conv_kernel <= 0 ||
      num_emotions <= 0) {
    throw InvalidArgument("model config: all sizes must be positive");
  }
}

ModelParams InitParams(const ModelConfig& cfg, uint64_t seed) {
  cfg.Validate();
  std::mt19937_64 rng(seed);
  const int C = cfg.in_channels;
  const int D = cfg.stem_dim;
  const int k = cfg.stem_kernel;
  ModelParams p;
  p.config = cfg;
  p.stem_conv1.resize(D, C * k);
  p.stem_conv2.resize(D, D * k);
  Fill(rng, p.stem_conv1, 1.0 / std::sqrt(C * k));
  Fill(rng, p.stem_conv2, 1.0 / std::sqrt(D * k));
  p.bn1 = InitBatchNorm(D);
  p.bn2 = InitBatchNorm(D);
  for (int i = 0; i < cfg.num_blocks; ++i) p.spot_blocks.push_back(InitBlock(cfg, rng));
  for (int i = 0; i < cfg.num_blocks; ++i) p.recog_blocks.push_back(InitBlock(cfg, rng));
  p.spot_head.resize(1, D);
  p.spot_bias.resize(1);
  p.recog_head.resize(cfg.num_classes(), D);
  p.recog_bias.resize(cfg.num_classes());
  Fill(rng, p.spot_head, 1.0 / std::sqrt(D));
  Fill(rng, p.spot_bias, 1.0 / std::sqrt(D));
  Fill(rng, p.recog_head, 1.0 / std::sqrt(D));
  Fill(rng, p.recog_bias, 1.0 / std::sqrt(D));
  return p;
}

ModelParams ZerosLike(const ModelParams& params) {
  ModelParams z = params;
  ForEachTensor(z, [](const std::string&, auto& t) { t.setZero(); });
  return z;
}

void ValidateShapes(const ModelParams& p) {
  const ModelConfig& cfg = p.config;
  cfg.Validate();
  const int C = cfg.in_channels, D = cfg.stem_dim, k = cfg.stem_kernel;
  const int E = cfg.inner_dim(), N = cfg.state_size, K = cfg.num_classes();
  CheckShape("stem.conv1", p.stem_conv1.rows(), p.stem_conv1.cols(), D, C * k);
  CheckShape("stem.conv2", p.stem_conv2.rows(), p.stem_conv2.cols(), D, D * k);
  for (const BatchNormParams* bn : {&p.bn1, &p.bn2}) {
    for (const Vec* v : {&bn->scale, &bn->shift, &bn->running_mean,
                         &bn->running_var}) {
      CheckShape("stem.bn", v->size(), 1, D, 1);
    }
  }
  for (const auto* list : {&p.spot_blocks, &p.recog_blocks}) {
    if (static_cast<int>(list->size()) != cfg.num_blocks) {
      throw InvalidArgument("wrong number of blocks");
    }
    for (const auto& b : *list) {
      CheckShape("in_proj", b.in_proj.rows(), b.in_proj.cols(), E, D);
      CheckShape("gate_proj", b.gate_proj.rows(), b.gate_proj.cols(), E, D);
      CheckShape("conv", b.conv.rows(), b.conv.cols(), E, cfg.conv_kernel);
      CheckShape("dt_proj", b.dt_proj.rows(), b.dt_proj.cols(), E, E);
      CheckShape("dt_bias", b.dt_bias.size(), 1, E, 1);
      CheckShape("b_proj", b.b_proj.rows(), b.b_proj.cols(), N, E);
      CheckShape("c_proj", b.c_proj.rows(), b.c_proj.cols(), N, E);
      CheckShape("a_log", b.a_log.rows(), b.a_log.cols(), E, N);
      CheckShape("d_skip", b.d_skip.size(), 1, E, 1);
      CheckShape("out_proj", b.out_proj.rows(), b.out_proj.cols(), D, E);
    }
  }
  CheckShape("spot.head", p.spot_head.rows(), p.spot_head.cols(), 1, D);
  CheckShape("spot.bias", p.spot_bias.size(), 1, 1, 1);
  CheckShape("recog.head", p.recog_head.rows(), p.recog_head.cols(), K, D);
  CheckShape("recog.bias", p.recog_bias.size(), 1, K, 1);
}

void CheckFinite(const ModelParams& params) {
  ForEachTensor(params, [](const std::string& name, const auto& t) {
    if (!t.allFinite()) throw NumericalError("non-finite values in " + name);
  });
}

Mat LaggedFrames(const Mat& x, int k) {
  const Eigen::Index T = x.rows();
  const Eigen::Index C = x.cols();
  Mat out = Mat::Zero(T, C * k);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (int j = 0; j < k; ++j) {
      const Eigen::Index src = t - (k - 1) + j;
      if (src < 0) continue;
      for (Eigen::Index i = 0; i < C; ++i) out(t, i * k + j) = x(src, i);
    }
  }
  return out;
}

Mat StemLayerForward(const Mat& x, const Mat& weight, const BatchNormParams& bn,
                     int kernel, bool train_mode, StemLayerCache* cache,
                     Vec* batch_mean, Vec* batch_var) {
  const Eigen::Index T = x.rows();
  Mat lagged = LaggedFrames(x, kernel);
  Mat conv = lagged * weight.transpose();
  Vec mean, inv_std;
  if (train_mode) {
    mean = conv.colwise().mean().transpose();
    Vec var = (conv.rowwise() - mean.transpose())
                  .array()
                  .square()
                  .colwise()
                  .mean()
                  .transpose();
    inv_std = (var.array() + kBatchNormEps).rsqrt().matrix();
    if (batch_mean) *batch_mean = mean;
    if (batch_var) {
      *batch_var = T > 1 ? Vec(var * (static_cast<double>(T) / (T - 1))) : var;
    }
  } else {
    mean = bn.running_mean;
    inv_std = (bn.running_var.array() + kBatchNormEps).rsqrt().matrix();
  }
  Mat xhat = (conv.rowwise() - mean.transpose()) * inv_std.asDiagonal();
  Mat out = (xhat * bn.scale.asDiagonal()).rowwise() + bn.shift.transpose();
  out = out.cwiseMax(0.0);
  if (cache) {
    cache->batch_stats = train_mode;
    cache->lagged = std::move(lagged);
    cache->xhat = std::move(xhat);
    cache->inv_std = inv_std;
    cache->out = out;
  }
  return out;
}

Mat StemForward(const Mat& flow, const ModelParams& p, bool train_mode) {
  const int k = p.config.stem_kernel;
  const Mat h = StemLayerForward(flow, p.stem_conv1, p.bn1, k, train_mode,
                                 nullptr, nullptr, nullptr);
  return StemLayerForward(h, p.stem_conv2, p.bn2, k, train_mode, nullptr,
                          nullptr, nullptr);
}

Mat SelectiveScan(const Mat& u, const Mat& delta, const Mat& a, const Mat& b,
                  const Mat& c_sel, const Vec& d_skip, Mat* h_history) {
  const Eigen::Index T = u.rows();
  const Eigen::Index E = u.cols();
  const Eigen::Index N = a.cols();
  if (delta.rows() != T || delta.cols() != E || a.rows() != E ||
      b.rows() != T || b.cols() != N || c_sel.rows() != T ||
      c_sel.cols() != N || d_skip.size() != E) {
    throw InvalidArgument("selective scan: inconsistent shapes");
  }
  if (!u.allFinite() || !delta.allFinite() || !b.allFinite() ||
      !c_sel.allFinite() || !a.allFinite()) {
    throw NumericalError("selective scan: non-finite input");
  }
  if ((delta.array() <= 0.0).any()) {
    throw InvalidArgument("selective scan: delta must be positive");
  }
  if ((a.array() >= 0.0).any()) {
    throw InvalidArgument("selective scan: A must be negative");
  }
  Mat y(T, E);
  Mat h = Mat::Zero(E, N);
  if (h_history) h_history->resize(T, E * N);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index d = 0; d < E; ++d) {
      const double dt = delta(t, d);
      const double dtu = dt * u(t, d);
      double acc = 0.0;
      for (Eigen::Index n = 0; n < N; ++n) {
        double& s = h(d, n);
        s = std::exp(dt * a(d, n)) * s + dtu * b(t, n);
        acc += c_sel(t, n) * s;
      }
      y(t, d) = acc + d_skip[d] * u(t, d);
    }
    if (h_history) {
      h_history->row(t) = Eigen::Map<const RowVec>(h.data(), E * N);
    }
  }
  return y;
}

ScanGrads SelectiveScanBackward(const Mat& u, const Mat& delta, const Mat& a,
                                const Mat& b, const Mat& c_sel,
                                const Vec& d_skip, const Mat& h_history,
                                const Mat& dy) {
  const Eigen::Index T = u.rows();
  const Eigen::Index E = u.cols();
  const Eigen::Index N = a.cols();
  ScanGrads g;
  g.du = Mat::Zero(T, E);
  g.ddelta = Mat::Zero(T, E);
  g.da = Mat::Zero(E, N);
  g.db = Mat::Zero(T, N);
  g.dc_sel = Mat::Zero(T, N);
  g.dd_skip = Vec::Zero(E);
  Mat carry = Mat::Zero(E, N);
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    for (Eigen::Index d = 0; d < E; ++d) {
      const double dt = delta(t, d);
      const double ut = u(t, d);
      const double gy = dy(t, d);
      double ddelta = 0.0;
      double du = gy * d_skip[d];
      for (Eigen::Index n = 0; n < N; ++n) {
        const double h_t = h_history(t, d * N + n);
        const double h_prev = t > 0 ? h_history(t - 1, d * N + n) : 0.0;
        const double abar = std::exp(dt * a(d, n));
        const double dh = carry(d, n) + c_sel(t, n) * gy;
        g.dc_sel(t, n) += gy * h_t;
        const double dabar = dh * h_prev;
        ddelta += dabar * abar * a(d, n) + dh * b(t, n) * ut;
        g.da(d, n) += dabar * abar * dt;
        g.db(t, n) += dh * dt * ut;
        du += dh * dt * b(t, n);
        carry(d, n) = dh * abar;
      }
      g.ddelta(t, d) = ddelta;
      g.du(t, d) = du;
      g.dd_skip[d] += gy * ut;
    }
  }
  return g;
}

Mat CausalDepthwiseConv(const Mat& x, const Mat& kernel) {
  const Eigen::Index T = x.rows();
  const Eigen::Index E = x.cols();
  const int k = static_cast<int>(kernel.cols());
  Mat out = Mat::Zero(T, E);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (int j = 0; j < k; ++j) {
      const Eigen::Index src = t - (k - 1) + j;
      if (src < 0) continue;
      for (Eigen::Index d = 0; d < E; ++d) out(t, d) += kernel(d, j) * x(src, d);
    }
  }
  return out;
}

Mat BlockForward(const Mat& x, const BlockParams& p, BlockCache* cache) {
  Mat u_pre = x * p.in_proj.transpose();
  Mat c = CausalDepthwiseConv(u_pre, p.conv);
  Mat u = c.unaryExpr([](double v) { return Silu(v); });
  Mat z_pre = x * p.gate_proj.transpose();
  Mat z = z_pre.unaryExpr([](double v) { return Silu(v); });
  Mat s = (u * p.dt_proj.transpose()).rowwise() + p.dt_bias.transpose();
  Mat delta = s.unaryExpr([](double v) { return Softplus(v); });
  if (!s.allFinite() || (delta.array() <= 0.0).any()) {
    throw NumericalError("block forward: step size underflowed or is not finite");
  }
  Mat b = u * p.b_proj.transpose();
  Mat c_sel = u * p.c_proj.transpose();
  Mat a = -p.a_log.array().exp().matrix();
  Mat h;
  Mat y = SelectiveScan(u, delta, a, b, c_sel, p.d_skip, cache ? &h : nullptr);
  Mat out = x;
  out.noalias() += y.cwiseProduct(z) * p.out_proj.transpose();
  if (cache) {
    cache->x = x;
    cache->u_pre = std::move(u_pre);
    cache->c = std::move(c);
    cache->u = std::move(u);
    cache->z_pre = std::move(z_pre);
    cache->z = std::move(z);
    cache->s = std::move(s);
    cache->delta = std::move(delta);
    cache->b = std::move(b);
    cache->c_sel = std::move(c_sel);
    cache->a = std::move(a);
    cache->h = std::move(h);
    cache->y = std::move(y);
  }
  return out;
}

ForwardOutput ModelForward(const FlowSequence& flow, const ModelParams& params,
                           bool train_mode) {
  return ModelForward(flow.values, params, train_mode);
}

namespace {

ForwardOutput ForwardImpl(const Mat& flow, const ModelParams& p,
                          bool keep_cache, bool batch_norm_stats) {
  const ModelConfig& cfg = p.config;
  if (flow.cols() != cfg.in_channels) {
    throw InvalidArgument("flow has " + std::to_string(flow.cols()) +
                          " channels, model expects " +
                          std::to_string(cfg.in_channels));
  }
  if (flow.rows() == 0) throw InvalidArgument("flow has no frames");
  ForwardOutput out;
  std::shared_ptr<ForwardCache> cache;
  if (keep_cache) cache = std::make_shared<ForwardCache>();
  const int k = cfg.stem_kernel;
  const Mat h1 = StemLayerForward(
      flow, p.stem_conv1, p.bn1, k, batch_norm_stats,
      cache ? &cache->stem1 : nullptr,
      &out.batch_stats.mean1, &out.batch_stats.var1);
  const Mat stem = StemLayerForward(
      h1, p.stem_conv2, p.bn2, k, batch_norm_stats,
      cache ? &cache->stem2 : nullptr,
      &out.batch_stats.mean2, &out.batch_stats.var2);

  auto pathway = [&](const std::vector<BlockParams>& blocks,
                     std::vector<BlockCache>* caches) {
    Mat h = stem;
    if (caches) caches->resize(blocks.size());
    for (size_t i = 0; i < blocks.size(); ++i) {
      h = BlockForward(h, blocks[i], caches ? &(*caches)[i] : nullptr);
    }
    return h;
  };
  Mat spot_features = pathway(p.spot_blocks, cache ? &cache->spot_blocks : nullptr);
  Mat recog_features =
      pathway(p.recog_blocks, cache ? &cache->recog_blocks : nullptr);

  out.spot_logit = (spot_features * p.spot_head.transpose()).col(0);
  out.spot_logit.array() += p.spot_bias[0];
  out.spot = out.spot_logit.unaryExpr([](double v) { return Sigmoid(v); });
  out.recog_logits = (recog_features * p.recog_head.transpose()).rowwise() +
                     p.recog_bias.transpose();
  out.recog = RowSoftmax(out.recog_logits);
  if (cache) {
    cache->spot_features = std::move(spot_features);
    cache->recog_features = std::move(recog_features);
    out.cache = std::move(cache);
  }
  return out;
}

}  // namespace

ForwardOutput ModelForward(const Mat& flow, const ModelParams& p,
                           bool train_mode) {
  return ForwardImpl(flow, p, train_mode, train_mode);
}

ForwardOutput ModelForwardFrozenNorm(const Mat& flow, const ModelParams& p) {
  return ForwardImpl(flow, p, /*keep_cache=*/true, /*batch_norm_stats=*/false);
}

void RecalibrateNormStats(ModelParams& p, const std::vector<const Mat*>& flows) {
  if (flows.empty()) throw InvalidArgument("no frames to recalibrate with");
  const int k = p.config.stem_kernel;
  auto population = [k](const std::vector<Mat>& inputs, const Mat& weight,
                        BatchNormParams& bn) {
    const Eigen::Index D = weight.rows();
    Vec sum = Vec::Zero(D);
    Vec sum_sq = Vec::Zero(D);
    double n = 0.0;
    for (const Mat& x : inputs) {
      const Mat conv = LaggedFrames(x, k) * weight.transpose();
      sum += conv.colwise().sum().transpose();
      sum_sq += conv.array().square().matrix().colwise().sum().transpose();
      n += static_cast<double>(conv.rows());
    }
    bn.running_mean = sum / n;
    Vec var = (sum_sq / n - bn.running_mean.cwiseAbs2()).cwiseMax(0.0);
    if (n > 1) var *= n / (n - 1);
    bn.running_var = var;
  };
  std::vector<Mat> inputs;
  for (const Mat* f : flows) inputs.push_back(*f);
  population(inputs, p.stem_conv1, p.bn1);
  for (Mat& x : inputs) {
    x = StemLayerForward(x, p.stem_conv1, p.bn1, k, false, nullptr, nullptr, nullptr);
  }
  population(inputs, p.stem_conv2, p.bn2);
}

void UpdateRunningStats(ModelParams& params, const BatchStats& stats,
                        double momentum) {
  if (stats.mean1.size() == 0) return;
  auto blend = [momentum](Vec& running, const Vec& batch) {
    running = (1.0 - momentum) * running + momentum * batch;
  };
  blend(params.bn1.running_mean, stats.mean1);
  blend(params.bn1.running_var, stats.var1);
  blend(params.bn2.running_mean, stats.mean2);
  blend(params.bn2.running_var, stats.var2);
}

ModelParams ModelBackward(const ModelParams& p, const ForwardOutput& out,
                          const Vec& dspot_logit, const Mat& drecog_logits) {
  if (!out.cache) {
    throw InvalidArgument("backward needs a train-mode forward (no caches)");
  }
  const ForwardCache& c = *out.cache;
  const Eigen::Index T = out.num_frames();
  if (dspot_logit.size() != T || drecog_logits.rows() != T ||
      drecog_logits.cols() != p.config.num_classes()) {
    throw InvalidArgument("backward: loss gradient shapes do not match");
  }
  ModelParams g = ZerosLike(p);

  g.spot_head.noalias() += dspot_logit.transpose() * c.spot_features;
  g.spot_bias[0] += dspot_logit.sum();
  Mat dspot = dspot_logit * p.spot_head;
  g.recog_head.noalias() += drecog_logits.transpose() * c.recog_features;
  g.recog_bias += drecog_logits.colwise().sum().transpose();
  Mat drecog = drecog_logits * p.recog_head;

  for (size_t i = p.spot_blocks.size(); i-- > 0;) {
    dspot = BlockBackward(dspot, p.spot_blocks[i], c.spot_blocks[i],
                          &g.spot_blocks[i]);
  }
  for (size_t i = p.recog_blocks.size(); i-- > 0;) {
    drecog = BlockBackward(drecog, p.recog_blocks[i], c.recog_blocks[i],
                           &g.recog_blocks[i]);
  }
  const Mat dstem = dspot + drecog;
  const int k = p.config.stem_kernel;
  const Mat dh1 =
      StemLayerBackward(dstem, p.stem_conv2, p.bn2, k, c.stem2, &g.stem_conv2,
                        &g.bn2, p.config.stem_dim, /*need_dx=*/true);
  StemLayerBackward(dh1, p.stem_conv1, p.bn1, k, c.stem1, &g.stem_conv1, &g.bn1,
                    p.config.in_channels, /*need_dx=*/false);
  return g;
}

LossValue ComputeLoss(const ForwardOutput& out, const TargetSignals& targets,
                      const LossWeights& weights, Vec* dspot_logit,
                      Mat* drecog_logits) {
  const MseResult mse = MseLoss(out.spot, targets.spot);
  const CeResult ce = CeLoss(out.recog, targets.label, weights.class_weights);
  LossValue v;
  v.mse = mse.loss;
  v.ce = ce.loss;
  v.total = weights.spot_weight * mse.loss + ce.loss;
  if (dspot_logit) {
    *dspot_logit = weights.spot_weight *
                   mse.grad.cwiseProduct(
                       out.spot.unaryExpr([](double s) { return s * (1.0 - s); }));
  }
  if (drecog_logits) *drecog_logits = ce.grad;
  return v;
}

LossAndGrads ModelLossBackward(const ModelParams& params,
                               const ForwardOutput& out,
                               const TargetSignals& targets,
                               const LossWeights& weights) {
  Vec dspot;
  Mat drecog;
  LossAndGrads r;
  r.loss = ComputeLoss(out, targets, weights, &dspot, &drecog);
  r.grads = ModelBackward(params, out, dspot, drecog);
  return r;
}

int64_t ParamCount(const ModelConfig& cfg) {
  cfg.Validate();
  const int64_t C = cfg.in_channels, D = cfg.stem_dim, k = cfg.stem_kernel;
  const int64_t E = cfg.inner_dim(), N = cfg.state_size;
  const int64_t K = cfg.num_classes(), kdw = cfg.conv_kernel;
  const int64_t stem = D * C * k + D * D * k + 2 * (2 * D);
  const int64_t block = 2 * E * D  // in/gate projections
                        + E * kdw  // depthwise conv
                        + E * E + E  // delta projection + bias
                        + 2 * N * E  // B and C projections
                        + E * N      // A_log
                        + E          // D skip
                        + D * E;     // out projection
  const int64_t heads = (D + 1) + K * (D + 1);
  return stem + 2 * cfg.num_blocks * block + heads;
}

MacCount CountMacs(const ModelConfig& cfg) {
  cfg.Validate();
  const int64_t C = cfg.in_channels, D = cfg.stem_dim, k = cfg.stem_kernel;
  const int64_t E = cfg.inner_dim(), N = cfg.state_size;
  const int64_t K = cfg.num_classes(), kdw = cfg.conv_kernel;
  // Batch norm folds into one multiply-add per element at inference; the
  // folding itself (scale / sqrt(var + eps), shift - mean * scale) is fixed.
  const int64_t stem_frame = D * C * k + D * D * k + 2 * D;
  // Per frame and block: projections, depthwise conv, delta projection,
  // B/C projections, then per (channel, state) the delta*A product, the
  // state decay, the input injection and the C readout, plus delta*u, skip,
  // gate and the out projection.
  const int64_t block_frame = 2 * E * D + E * kdw + E * E + 2 * E * N +
                              4 * E * N + 3 * E + D * E;
  const int64_t heads_frame = D + K * D;
  MacCount m;
  m.per_frame = stem_frame + 2 * cfg.num_blocks * block_frame + heads_frame;
  m.fixed = 2 * (2 * D) + 2 * cfg.num_blocks * (E * N);
  return m;
}

}  // namespace mespot

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

#include "mespot/config.h"

#include <cstdio>
#include <set>

#include "mespot/error.h"

namespace mespot {
using nlohmann::json;

namespace {

// Reads optional fields into existing defaults and rejects unknown keys.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw InvalidArgument(where_ + ": expected an object");
  }

  template <typename T>
  Reader& Get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return *this;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw InvalidArgument(where_ + "." + key + ": " + e.what());
    }
    return *this;
  }

  void Done() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) {
        throw InvalidArgument(where_ + ": unknown key '" + key + "'");
      }
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace

json ToJson(const ModelConfig& c) {
  return {{"in_channels", c.in_channels}, {"stem_dim", c.stem_dim},
          {"stem_kernel", c.stem_kernel}, {"num_blocks", c.num_blocks},
          {"state_size", c.state_size},   {"expand", c.expand},
          {"conv_kernel", c.conv_kernel}, {"num_emotions", c.num_emotions}};
}

ModelConfig ModelConfigFromJson(const json& j) {
  ModelConfig c;
  Reader(j, "model")
      .Get("in_channels", c.in_channels)
      .Get("stem_dim", c.stem_dim)
      .Get("stem_kernel", c.stem_kernel)
      .Get("num_blocks", c.num_blocks)
      .Get("state_size", c.state_size)
      .Get("expand", c.expand)
      .Get("conv_kernel", c.conv_kernel)
      .Get("num_emotions", c.num_emotions)
      .Done();
  return c;
}

json ToJson(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"max_lr", c.max_lr},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"adam_eps", c.adam.eps},
          {"warmup_fraction", c.warmup_fraction},
          {"class_weights", c.class_weights},
          {"spot_weight", c.spot_weight},
          {"clip_grad_norm", c.clip_grad_norm},
          {"frozen_norm_fraction", c.frozen_norm_fraction},
          {"rng_seed", c.rng_seed}};
}

TrainConfig TrainConfigFromJson(const json& j) {
  TrainConfig c;
  Reader(j, "train")
      .Get("epochs", c.epochs)
      .Get("max_lr", c.max_lr)
      .Get("beta1", c.adam.beta1)
      .Get("beta2", c.adam.beta2)
      .Get("adam_eps", c.adam.eps)
      .Get("warmup_fraction", c.warmup_fraction)
      .Get("class_weights", c.class_weights)
      .Get("spot_weight", c.spot_weight)
      .Get("clip_grad_norm", c.clip_grad_norm)
      .Get("frozen_norm_fraction", c.frozen_norm_fraction)
      .Get("rng_seed", c.rng_seed)
      .Done();
  return c;
}

json ToJson(const PostConfig& c) {
  return {{"peak_threshold", c.peak_threshold},
          {"low_threshold", c.low_threshold},
          {"min_separation", c.min_separation},
          {"min_duration", c.min_duration},
          {"max_duration", c.max_duration},
          {"noise_percentile", c.noise_percentile},
          {"synergy", c.synergy}};
}

PostConfig PostConfigFromJson(const json& j) {
  PostConfig c;
  Reader(j, "post")
      .Get("peak_threshold", c.peak_threshold)
      .Get("low_threshold", c.low_threshold)
      .Get("min_separation", c.min_separation)
      .Get("min_duration", c.min_duration)
      .Get("max_duration", c.max_duration)
      .Get("noise_percentile", c.noise_percentile)
      .Get("synergy", c.synergy)
      .Done();
  return c;
}

json ToJson(const SynthConfig& c) {
  return {{"num_videos", c.num_videos},
          {"frames_per_video", c.frames_per_video},
          {"fps", c.fps},
          {"num_subjects", c.num_subjects},
          {"num_emotions", c.num_emotions},
          {"noise_std", c.noise_std},
          {"me_duration_min", c.me_duration_min},
          {"me_duration_max", c.me_duration_max},
          {"mae_duration_min", c.mae_duration_min},
          {"mae_duration_max", c.mae_duration_max},
          {"blink_duration_min", c.blink_duration_min},
          {"blink_duration_max", c.blink_duration_max},
          {"blink_rate", c.blink_rate},
          {"mes_per_video", c.mes_per_video},
          {"maes_per_video", c.maes_per_video},
          {"me_amplitude", c.me_amplitude},
          {"mae_amplitude_factor", c.mae_amplitude_factor},
          {"blink_amplitude_factor", c.blink_amplitude_factor},
          {"rng_seed", c.rng_seed}};
}

SynthConfig SynthConfigFromJson(const json& j) {
  SynthConfig c;
  Reader(j, "synth")
      .Get("num_videos", c.num_videos)
      .Get("frames_per_video", c.frames_per_video)
      .Get("fps", c.fps)
      .Get("num_subjects", c.num_subjects)
      .Get("num_emotions", c.num_emotions)
      .Get("noise_std", c.noise_std)
      .Get("me_duration_min", c.me_duration_min)
      .Get("me_duration_max", c.me_duration_max)
      .Get("mae_duration_min", c.mae_duration_min)
      .Get("mae_duration_max", c.mae_duration_max)
      .Get("blink_duration_min", c.blink_duration_min)
      .Get("blink_duration_max", c.blink_duration_max)
      .Get("blink_rate", c.blink_rate)
      .Get("mes_per_video", c.mes_per_video)
      .Get("maes_per_video", c.maes_per_video)
      .Get("me_amplitude", c.me_amplitude)
      .Get("mae_amplitude_factor", c.mae_amplitude_factor)
      .Get("blink_amplitude_factor", c.blink_amplitude_factor)
      .Get("rng_seed", c.rng_seed)
      .Done();
  return c;
}

json RunConfig::ToJson() const {
  return {{"model", mespot::ToJson(model)},
          {"train", mespot::ToJson(train)},
          {"post", mespot::ToJson(post)},
          {"synth", mespot::ToJson(synth)},
          {"dataset", dataset},
          {"output_dir", output_dir},
          {"jobs", jobs}};
}

RunConfig RunConfig::FromJson(const json& j) {
  RunConfig c;
  json model = json::object(), train = json::object(), post = json::object(),
       synth = json::object();
  Reader(j, "config")
      .Get("model", model)
      .Get("train", train)
      .Get("post", post)
      .Get("synth", synth)
      .Get("dataset", c.dataset)
      .Get("output_dir", c.output_dir)
      .Get("jobs", c.jobs)
      .Done();
  c.model = ModelConfigFromJson(model);
  c.train = TrainConfigFromJson(train);
  c.post = PostConfigFromJson(post);
  c.synth = SynthConfigFromJson(synth);
  return c;
}

void RunConfig::Validate() const {
  model.Validate();
  train.Validate();
  post.Validate();
  synth.Validate();
  if (jobs < 1) throw InvalidArgument("config: jobs must be >= 1");
  if (synth.num_emotions != model.num_emotions) {
    throw InvalidArgument("config: synth.num_emotions != model.num_emotions");
  }
}

void ApplyOverride(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw InvalidArgument("override '" + assignment + "' is not key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = text;
  json* node = &doc;
  size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) throw InvalidArgument("bad override key '" + key + "'");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

std::string ConfigHash(const json& j) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace mespot

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

#ifndef MESPOT_CONFIG_H_
#define MESPOT_CONFIG_H_

// JSON mapping of every configuration struct, and the unified run config
// used by the command-line tool. Unknown keys are rejected so typos fail
// loudly.

#include <string>

#include "json.hpp"
#include "mespot/analysis.h"
#include "mespot/model.h"
#include "mespot/synth.h"
#include "mespot/trainer.h"

namespace mespot {

nlohmann::json ToJson(const ModelConfig& c);
nlohmann::json ToJson(const TrainConfig& c);
nlohmann::json ToJson(const PostConfig& c);
nlohmann::json ToJson(const SynthConfig& c);

ModelConfig ModelConfigFromJson(const nlohmann::json& j);
TrainConfig TrainConfigFromJson(const nlohmann::json& j);
PostConfig PostConfigFromJson(const nlohmann::json& j);
SynthConfig SynthConfigFromJson(const nlohmann::json& j);

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  PostConfig post;
  SynthConfig synth;
  std::string dataset;     // path to manifest.json
  std::string output_dir;  // run directory
  int jobs = 1;

  nlohmann::json ToJson() const;
  static RunConfig FromJson(const nlohmann::json& j);
  void Validate() const;
};

// Applies "a.b.c=value" to a JSON document. The value is parsed as JSON when
// possible and taken as a string otherwise.
void ApplyOverride(nlohmann::json& doc, const std::string& assignment);

// FNV-1a 64 of the canonical dump, as 16 hex digits.
std::string ConfigHash(const nlohmann::json& j);

}  // namespace mespot

#endif  // MESPOT_CONFIG_H_

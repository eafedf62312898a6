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

#ifndef MESPOT_CHECKPOINT_H_
#define MESPOT_CHECKPOINT_H_

// Binary checkpoint layout (all integers little-endian uint32):
//
//   "MSPTCKPT" | version | config_len | config JSON bytes | tensor_count |
//   per tensor: name_len | name | rows | cols | rows*cols float32 LE
//
// Loading checks every tensor name and shape against the embedded config.

#include <filesystem>
#include <string>

#include "mespot/model.h"

namespace mespot {

inline constexpr uint32_t kCheckpointVersion = 1;

std::string SerializeCheckpoint(const ModelParams& params);
ModelParams DeserializeCheckpoint(const std::string& bytes,
                                  const std::string& source = "<memory>");

void SaveCheckpoint(const ModelParams& params,
                    const std::filesystem::path& path);
ModelParams LoadCheckpoint(const std::filesystem::path& path);

}  // namespace mespot

#endif  // MESPOT_CHECKPOINT_H_

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

#ifndef MESPOT_MEFS_H_
#define MESPOT_MEFS_H_

// MEFS: one directory per video holding meta.json, flow.bin (little-endian
// float32, frame-major, exactly 4*T*C bytes) and labels.json. A dataset is a
// set of such directories listed by manifest.json.

#include <filesystem>
#include <string>
#include <vector>

#include "mespot/flow_data.h"

namespace mespot {

inline constexpr int kMefsVersion = 1;

AnnotatedVideo LoadMefs(const std::filesystem::path& dir);
void SaveMefs(const AnnotatedVideo& video, const std::filesystem::path& dir);

struct ManifestEntry {
  std::string dir;  // relative to the manifest's directory
  std::string subject_id;
  std::string video_id;
};

std::vector<ManifestEntry> LoadManifest(const std::filesystem::path& path);
void SaveManifest(const std::vector<ManifestEntry>& entries,
                  const std::filesystem::path& path);

// Loads every video listed in a manifest. Subject ids in the manifest must
// agree with each video's meta.json.
std::vector<AnnotatedVideo> LoadDataset(const std::filesystem::path& manifest);

// Writes each video to out_dir/<video_id>/ plus out_dir/manifest.json.
void SaveDataset(const std::vector<AnnotatedVideo>& videos,
                 const std::filesystem::path& out_dir);

// Rounds every value to the nearest float32, i.e. what a save/load cycle
// yields.
void QuantizeToFloat(Mat& values);

}  // namespace mespot

#endif  // MESPOT_MEFS_H_

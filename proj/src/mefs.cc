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

#include "mespot/mefs.h"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>

#include "json.hpp"
#include "mespot/error.h"

namespace mespot {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json ReadJson(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw MalformedHeaderError(path.string() + ": " + e.what());
  }
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

template <typename T>
T Field(const json& j, const char* key, const fs::path& path) {
  if (!j.is_object() || !j.contains(key)) {
    throw MalformedHeaderError(path.string() + ": missing field '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw MalformedHeaderError(path.string() + ": bad field '" + key +
                               "': " + e.what());
  }
}

const char* KindName(ExpressionKind kind) {
  return kind == ExpressionKind::kMicro ? "me" : "mae";
}

}  // namespace

void QuantizeToFloat(Mat& values) {
  values = values.cast<float>().cast<double>();
}

AnnotatedVideo LoadMefs(const fs::path& dir) {
  const fs::path meta_path = dir / "meta.json";
  const json meta = ReadJson(meta_path);
  if (Field<int>(meta, "mefs_version", meta_path) != kMefsVersion) {
    throw MalformedHeaderError(meta_path.string() + ": unsupported version");
  }
  AnnotatedVideo video;
  video.flow.fps = Field<double>(meta, "fps", meta_path);
  video.subject_id = Field<std::string>(meta, "subject_id", meta_path);
  video.video_id = Field<std::string>(meta, "video_id", meta_path);
  video.flow.roi_names =
      Field<std::vector<std::string>>(meta, "roi_names", meta_path);
  const int64_t channels = Field<int64_t>(meta, "channels", meta_path);
  const int64_t frames = Field<int64_t>(meta, "frames", meta_path);
  if (channels <= 0 || frames <= 0 ||
      channels != 2 * static_cast<int64_t>(video.flow.roi_names.size())) {
    throw MalformedHeaderError(meta_path.string() +
                               ": channels must equal 2 x roi_names and be "
                               "positive, frames positive");
  }
  if (!(video.flow.fps > 0.0)) {
    throw MalformedHeaderError(meta_path.string() + ": fps must be positive");
  }

  const fs::path flow_path = dir / "flow.bin";
  std::ifstream in(flow_path, std::ios::binary);
  if (!in) throw IoError("cannot open " + flow_path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  const uint64_t expected = 4ull * frames * channels;
  if (bytes.size() != expected) {
    throw FrameCountMismatchError(
        flow_path.string() + ": expected " + std::to_string(frames) +
        " frames (" + std::to_string(expected) + " bytes), found " +
        std::to_string(bytes.size()) + " bytes");
  }
  video.flow.values.resize(frames, channels);
  double* dst = video.flow.values.data();
  for (uint64_t i = 0; i < static_cast<uint64_t>(frames * channels); ++i) {
    const unsigned char* b = &bytes[4 * i];
    const uint32_t word = uint32_t{b[0]} | (uint32_t{b[1]} << 8) |
                          (uint32_t{b[2]} << 16) | (uint32_t{b[3]} << 24);
    const float v = std::bit_cast<float>(word);
    if (!std::isfinite(v)) {
      throw NonFiniteValueError(flow_path.string() + ": non-finite value at frame " +
                                std::to_string(i / channels) + ", channel " +
                                std::to_string(i % channels));
    }
    dst[i] = v;
  }

  const fs::path labels_path = dir / "labels.json";
  const json labels = ReadJson(labels_path);
  if (!labels.is_array()) {
    throw MalformedHeaderError(labels_path.string() + ": expected an array");
  }
  for (const auto& item : labels) {
    ExpressionInterval iv;
    iv.onset = Field<int>(item, "onset", labels_path);
    iv.apex = Field<int>(item, "apex", labels_path);
    iv.offset = Field<int>(item, "offset", labels_path);
    iv.emotion = Field<int>(item, "emotion", labels_path);
    const auto kind = Field<std::string>(item, "kind", labels_path);
    if (kind == "me") {
      iv.kind = ExpressionKind::kMicro;
    } else if (kind == "mae") {
      iv.kind = ExpressionKind::kMacro;
    } else {
      throw MalformedHeaderError(labels_path.string() + ": unknown kind '" +
                                 kind + "'");
    }
    if (iv.onset < 0 || iv.onset > iv.apex || iv.apex > iv.offset ||
        iv.offset >= frames) {
      throw IntervalOutOfRangeError(
          labels_path.string() + ": interval [" + std::to_string(iv.onset) +
          "," + std::to_string(iv.apex) + "," + std::to_string(iv.offset) +
          "] outside 0.." + std::to_string(frames - 1));
    }
    if (iv.emotion < 0 || (iv.kind == ExpressionKind::kMicro && iv.emotion == 0)) {
      throw MalformedHeaderError(labels_path.string() +
                                 ": ME intervals need an emotion id >= 1");
    }
    video.intervals.push_back(iv);
  }
  try {
    video.Validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(dir.string() + ": " + e.what());
  }
  return video;
}

void SaveMefs(const AnnotatedVideo& video, const fs::path& dir) {
  video.Validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  const auto& flow = video.flow;
  json meta = {{"mefs_version", kMefsVersion},
               {"fps", flow.fps},
               {"subject_id", video.subject_id},
               {"video_id", video.video_id},
               {"roi_names", flow.roi_names},
               {"channels", flow.num_channels()},
               {"frames", flow.num_frames()}};
  WriteText(dir / "meta.json", meta.dump(2) + "\n");

  std::string bytes;
  bytes.resize(4ull * flow.values.size());
  const double* src = flow.values.data();
  for (Eigen::Index i = 0; i < flow.values.size(); ++i) {
    const uint32_t word = std::bit_cast<uint32_t>(static_cast<float>(src[i]));
    bytes[4 * i] = static_cast<char>(word & 0xff);
    bytes[4 * i + 1] = static_cast<char>((word >> 8) & 0xff);
    bytes[4 * i + 2] = static_cast<char>((word >> 16) & 0xff);
    bytes[4 * i + 3] = static_cast<char>((word >> 24) & 0xff);
  }
  WriteText(dir / "flow.bin", bytes);

  json labels = json::array();
  for (const auto& iv : video.intervals) {
    labels.push_back({{"onset", iv.onset},
                      {"apex", iv.apex},
                      {"offset", iv.offset},
                      {"emotion", iv.emotion},
                      {"kind", KindName(iv.kind)}});
  }
  WriteText(dir / "labels.json", labels.dump(2) + "\n");
}

std::vector<ManifestEntry> LoadManifest(const fs::path& path) {
  const json j = ReadJson(path);
  if (Field<int>(j, "mefs_version", path) != kMefsVersion) {
    throw MalformedHeaderError(path.string() + ": unsupported version");
  }
  const json& videos = j.contains("videos") ? j["videos"] : json();
  if (!videos.is_array()) {
    throw MalformedHeaderError(path.string() + ": 'videos' must be an array");
  }
  std::vector<ManifestEntry> out;
  for (const auto& v : videos) {
    out.push_back({Field<std::string>(v, "dir", path),
                   Field<std::string>(v, "subject_id", path),
                   Field<std::string>(v, "video_id", path)});
  }
  return out;
}

void SaveManifest(const std::vector<ManifestEntry>& entries,
                  const fs::path& path) {
  json videos = json::array();
  for (const auto& e : entries) {
    videos.push_back(
        {{"dir", e.dir}, {"subject_id", e.subject_id}, {"video_id", e.video_id}});
  }
  const json j = {{"mefs_version", kMefsVersion}, {"videos", videos}};
  WriteText(path, j.dump(2) + "\n");
}

std::vector<AnnotatedVideo> LoadDataset(const fs::path& manifest) {
  const auto entries = LoadManifest(manifest);
  const fs::path root = manifest.parent_path();
  std::vector<AnnotatedVideo> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    AnnotatedVideo v = LoadMefs(root / e.dir);
    if (v.subject_id != e.subject_id || v.video_id != e.video_id) {
      throw FormatError(manifest.string() + ": entry '" + e.dir +
                        "' disagrees with its meta.json ids");
    }
    out.push_back(std::move(v));
  }
  return out;
}

void SaveDataset(const std::vector<AnnotatedVideo>& videos,
                 const fs::path& out_dir) {
  std::vector<ManifestEntry> entries;
  for (const auto& v : videos) {
    SaveMefs(v, out_dir / v.video_id);
    entries.push_back({v.video_id, v.subject_id, v.video_id});
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  SaveManifest(entries, out_dir / "manifest.json");
}

}  // namespace mespot

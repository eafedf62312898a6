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

#include "mespot/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "mespot/config.h"
#include "mespot/error.h"

namespace mespot {

namespace {

constexpr char kMagic[8] = {'M', 'S', 'P', 'T', 'C', 'K', 'P', 'T'};

void PutU32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class ByteReader {
 public:
  ByteReader(const std::string& bytes, const std::string& source)
      : bytes_(bytes), source_(source) {}

  uint32_t U32() {
    Need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= uint32_t{static_cast<unsigned char>(bytes_[pos_ + i])} << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::string Bytes(size_t n) {
    Need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  float F32() { return std::bit_cast<float>(U32()); }

  bool AtEnd() const { return pos_ == bytes_.size(); }

 private:
  void Need(size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(source_ + ": truncated checkpoint");
    }
  }

  const std::string& bytes_;
  std::string source_;
  size_t pos_ = 0;
};

}  // namespace

std::string SerializeCheckpoint(const ModelParams& params) {
  ValidateShapes(params);
  std::string out(kMagic, sizeof(kMagic));
  PutU32(out, kCheckpointVersion);
  const std::string config = ToJson(params.config).dump();
  PutU32(out, static_cast<uint32_t>(config.size()));
  out += config;
  uint32_t count = 0;
  ForEachTensor(params, [&count](const std::string&, const auto&) { ++count; });
  PutU32(out, count);
  ForEachTensor(params, [&out](const std::string& name, const auto& t) {
    PutU32(out, static_cast<uint32_t>(name.size()));
    out += name;
    PutU32(out, static_cast<uint32_t>(t.rows()));
    PutU32(out, static_cast<uint32_t>(t.cols()));
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) {
        PutU32(out, std::bit_cast<uint32_t>(static_cast<float>(t(r, c))));
      }
    }
  });
  return out;
}

ModelParams DeserializeCheckpoint(const std::string& bytes,
                                  const std::string& source) {
  ByteReader in(bytes, source);
  if (in.Bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw MalformedHeaderError(source + ": not a checkpoint (bad magic)");
  }
  if (in.U32() != kCheckpointVersion) {
    throw MalformedHeaderError(source + ": unsupported checkpoint version");
  }
  const std::string config_text = in.Bytes(in.U32());
  const auto config_json = nlohmann::json::parse(config_text, nullptr, false);
  if (config_json.is_discarded()) {
    throw MalformedHeaderError(source + ": embedded config is not JSON");
  }
  ModelConfig config;
  try {
    config = ModelConfigFromJson(config_json);
    config.Validate();
  } catch (const InvalidArgument& e) {
    throw MalformedHeaderError(source + ": " + e.what());
  }
  // Shapes come from a freshly initialized model of the same config.
  ModelParams params = ZerosLike(InitParams(config, 0));
  const uint32_t count = in.U32();
  uint32_t expected = 0;
  ForEachTensor(params, [&expected](const std::string&, const auto&) { ++expected; });
  if (count != expected) {
    throw FormatError(source + ": checkpoint has " + std::to_string(count) +
                      " tensors, config implies " + std::to_string(expected));
  }
  ForEachTensor(params, [&](const std::string& name, auto& t) {
    const std::string got = in.Bytes(in.U32());
    if (got != name) {
      throw FormatError(source + ": expected tensor '" + name + "', found '" +
                        got + "'");
    }
    const uint32_t rows = in.U32();
    const uint32_t cols = in.U32();
    if (rows != t.rows() || cols != t.cols()) {
      throw FormatError(source + ": tensor '" + name + "' has shape " +
                        std::to_string(rows) + "x" + std::to_string(cols) +
                        ", config implies " + std::to_string(t.rows()) + "x" +
                        std::to_string(t.cols()));
    }
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = in.F32();
    }
  });
  if (!in.AtEnd()) throw FormatError(source + ": trailing bytes");
  try {
    CheckFinite(params);
  } catch (const NumericalError& e) {
    throw NonFiniteValueError(source + ": " + e.what());
  }
  return params;
}

void SaveCheckpoint(const ModelParams& params,
                    const std::filesystem::path& path) {
  const std::string bytes = SerializeCheckpoint(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

ModelParams LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  return DeserializeCheckpoint(bytes, path.string());
}

}  // namespace mespot

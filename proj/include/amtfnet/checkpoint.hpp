/*
 * Copyright 2026 The AMTFNet Toolkit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/**
 * \file checkpoint.hpp
 * \brief Binary model checkpoints.
 *
 * Layout (all integers and floats little-endian):
 *
 *   "AMTFNETC"                 8-byte magic
 *   u32 version                currently 1
 *   u64 n, n bytes             JSON header {"model": ModelConfig, "meta": any}
 *   u64 count                  number of parameter records
 *   count x record             u32 name_len, name, u32 rank, rank x u64 dim,
 *                              numel x f64 payload
 *
 * Records are written in name order, so equal models give equal bytes.
 */
#pragma once

#include "amtfnet/json_util.hpp"
#include "amtfnet/model.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace amtfnet {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'A', 'M', 'T', 'F', 'N', 'E', 'T', 'C'};

inline Json to_json(const ModelConfig& c) {
  return Json{{"v", c.v},
              {"w", c.w},
              {"kernel_sizes", c.kernel_sizes},
              {"hidden", c.hidden},
              {"num_classes", c.num_classes},
              {"reduction", c.reduction},
              {"dropout_rate", c.dropout_rate},
              {"norm_eps", c.norm_eps},
              {"variant", variant_name(c.variant)},
              {"readout", readout_name(c.readout)}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline ModelConfig model_config_from_json(const Json& j, ModelConfig c = {},
                                          const std::string& where = "model") {
  json_util::reject_unknown(j, {"v", "w", "kernel_sizes", "hidden", "num_classes", "reduction",
                                "dropout_rate", "norm_eps", "variant", "readout"},
                            where);
  json_util::read(j, "v", c.v, where);
  json_util::read(j, "w", c.w, where);
  json_util::read(j, "kernel_sizes", c.kernel_sizes, where);
  json_util::read(j, "hidden", c.hidden, where);
  json_util::read(j, "num_classes", c.num_classes, where);
  json_util::read(j, "reduction", c.reduction, where);
  json_util::read(j, "dropout_rate", c.dropout_rate, where);
  json_util::read(j, "norm_eps", c.norm_eps, where);
  std::string variant = variant_name(c.variant);
  json_util::read(j, "variant", variant, where);
  try {
    c.variant = parse_variant(variant);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  std::string readout = readout_name(c.readout);
  json_util::read(j, "readout", readout, where);
  if (readout == "auto") c.readout = Readout::kAuto;
  else if (readout == "last") c.readout = Readout::kLast;
  else if (readout == "mean") c.readout = Readout::kMean;
  else throw ConfigError(where + ": readout must be auto, last or mean, got \"" + readout + "\"");
  return c;
}

struct Checkpoint {
  Model model;
  Json meta;
};

namespace detail {

template <class T>
void put(std::string& out, T value) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    out.append(bytes.data(), sizeof(T));
  } else {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    out.append(bytes, sizeof(T));
  }
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    need(sizeof(T));
    std::array<char, sizeof(T)> raw;
    std::memcpy(raw.data(), bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
    pos_ += sizeof(T);
    return std::bit_cast<T>(raw);
  }

  std::string text(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw ConfigError("checkpoint truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_checkpoint(const Model& model, const Json& meta = Json::object()) {
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put<std::uint32_t>(out, kCheckpointVersion);
  const std::string header = Json{{"model", to_json(model.config)}, {"meta", meta}}.dump();
  detail::put<std::uint64_t>(out, header.size());
  out += header;
  detail::put<std::uint64_t>(out, model.params.size());
  for (const auto& [name, t] : model.params) {
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) detail::put<std::uint64_t>(out, d);
    for (double x : t.data()) detail::put<double>(out, x);
  }
  return out;
}

inline Checkpoint deserialize_checkpoint(const std::string& bytes) {
  detail::Reader in(bytes);
  if (in.text(sizeof kCheckpointMagic) != std::string(kCheckpointMagic, sizeof kCheckpointMagic))
    throw ConfigError("not an AMTFNet checkpoint (bad magic)");
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw ConfigError("unsupported checkpoint version " + std::to_string(version));
  Json header;
  try {
    header = Json::parse(in.text(in.get<std::uint64_t>()));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint header: ") + e.what());
  }
  if (!header.is_object() || !header.contains("model"))
    throw ConfigError("checkpoint header has no model section");
  Checkpoint ck;
  ck.model.config = model_config_from_json(header.at("model"), {}, "checkpoint.model");
  ck.meta = header.value("meta", Json::object());
  const auto count = in.get<std::uint64_t>();
  for (std::uint64_t k = 0; k < count; ++k) {
    std::string name = in.text(in.get<std::uint32_t>());
    Shape shape(in.get<std::uint32_t>());
    for (auto& d : shape) d = static_cast<std::size_t>(in.get<std::uint64_t>());
    std::vector<double> values(numel(shape));
    for (auto& x : values) x = in.get<double>();
    ck.model.params.emplace(std::move(name), Tensor(std::move(shape), std::move(values), true));
  }
  if (!in.done()) throw ConfigError("checkpoint has trailing bytes");
  try {
    check_params(ck.model);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
  return ck;
}

inline void save_checkpoint(const std::string& path, const Model& model,
                            const Json& meta = Json::object()) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  const std::string bytes = serialize_checkpoint(model, meta);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace amtfnet

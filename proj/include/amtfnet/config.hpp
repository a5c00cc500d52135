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
 * \file config.hpp
 * \brief The run configuration document shared by every CLI command.
 *
 * Top-level keys: seed, out_dir, data, model, train, split, generator,
 * ablate. Unknown keys are rejected at every level. Relative paths are taken
 * relative to the working directory.
 */
#pragma once

#include "amtfnet/checkpoint.hpp"
#include "amtfnet/data.hpp"
#include "amtfnet/synth.hpp"
#include "amtfnet/train.hpp"

#include <optional>

namespace amtfnet {

struct DataConfig {
  std::vector<std::string> files;  // one CSV per run
  std::string manifest;            // or: a manifest written by `generate`
  std::size_t normal_label = 0;
  std::size_t num_classes = 0;  // 0: from the manifest, else max label + 1

  Json to_json() const {
    return Json{{"files", files},
                {"manifest", manifest},
                {"normal_label", normal_label},
                {"num_classes", num_classes}};
  }
};

struct AblateConfig {
  std::vector<Variant> variants{kAllVariants.begin(), kAllVariants.end()};
  std::vector<std::uint64_t> seeds;  // empty: the root seed only

  Json to_json() const {
    Json names = Json::array();
    for (auto v : variants) names.push_back(variant_name(v));
    return Json{{"variants", names}, {"seeds", seeds}};
  }
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "runs/default";
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  SplitSpec split;
  std::optional<GeneratorConfig> generator;
  AblateConfig ablate;

  /// Resolved snapshot: every default filled in.
  Json to_json() const {
    Json j{{"seed", seed},
           {"out_dir", out_dir},
           {"data", data.to_json()},
           {"model", amtfnet::to_json(model)},
           {"train", train.to_json()},
           {"split",
            {{"train_frac", split.train_frac},
             {"val_frac", split.val_frac},
             {"test_frac", split.test_frac}}},
           {"ablate", ablate.to_json()}};
    if (generator) j["generator"] = generator->to_json();
    return j;
  }

  /// Overrides the root seed. An explicit generator seed follows it too.
  void set_seed(std::uint64_t s) {
    seed = s;
    train.seed = s;
    if (generator) generator->seed = s;
  }

  std::uint64_t init_seed() const { return derive_seed(seed, "init"); }
  std::uint64_t split_seed() const { return derive_seed(seed, "split"); }

  static RunConfig from_json(const Json& j) {
    json_util::require_object(j, "config");
    json_util::reject_unknown(
        j, {"seed", "out_dir", "data", "model", "train", "split", "generator", "ablate"}, "config");
    RunConfig c;
    json_util::read(j, "seed", c.seed, "config");
    json_util::read(j, "out_dir", c.out_dir, "config");
    if (j.contains("data")) {
      const auto& d = j.at("data");
      json_util::require_object(d, "data");
      json_util::reject_unknown(d, {"files", "manifest", "normal_label", "num_classes"}, "data");
      json_util::read(d, "files", c.data.files, "data");
      json_util::read(d, "manifest", c.data.manifest, "data");
      json_util::read(d, "normal_label", c.data.normal_label, "data");
      json_util::read(d, "num_classes", c.data.num_classes, "data");
    }
    if (j.contains("model")) {
      json_util::require_object(j.at("model"), "model");
      c.model = model_config_from_json(j.at("model"), ModelConfig{}, "model");
    }
    if (!(j.contains("model") && j.at("model").contains("num_classes"))) c.model.num_classes = 0;
    if (j.contains("train")) {
      json_util::require_object(j.at("train"), "train");
      c.train = TrainConfig::from_json(j.at("train"));
    }
    c.train.seed = c.seed;
    if (j.contains("split")) {
      const auto& s = j.at("split");
      json_util::require_object(s, "split");
      json_util::reject_unknown(s, {"train_frac", "val_frac", "test_frac"}, "split");
      json_util::read(s, "train_frac", c.split.train_frac, "split");
      json_util::read(s, "val_frac", c.split.val_frac, "split");
      json_util::read(s, "test_frac", c.split.test_frac, "split");
    }
    if (j.contains("generator")) {
      json_util::require_object(j.at("generator"), "generator");
      c.generator = GeneratorConfig::from_json(j.at("generator"));
      if (!j.at("generator").contains("seed")) c.generator->seed = c.seed;
    }
    if (j.contains("ablate")) {
      const auto& a = j.at("ablate");
      json_util::require_object(a, "ablate");
      json_util::reject_unknown(a, {"variants", "seeds"}, "ablate");
      if (a.contains("variants")) {
        std::vector<std::string> names;
        json_util::read(a, "variants", names, "ablate");
        c.ablate.variants.clear();
        for (const auto& n : names) {
          try {
            c.ablate.variants.push_back(parse_variant(n));
          } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("ablate.variants: ") + e.what());
          }
        }
      }
      json_util::read(a, "seeds", c.ablate.seeds, "ablate");
    }
    c.validate();
    return c;
  }

  static RunConfig load(const std::string& path) {
    try {
      return from_json(json_util::load_file(path));
    } catch (const ConfigError& e) {
      throw ConfigError(path + ": " + e.what());
    }
  }

  /// Checks everything that does not depend on the data.
  void validate() const {
    if (out_dir.empty()) throw ConfigError("config: out_dir must not be empty");
    if (!data.files.empty() && !data.manifest.empty())
      throw ConfigError("data: give either files or manifest, not both");
    train.validate();
    split.validate();
    if (generator) generator->validate();
    if (ablate.variants.empty()) throw ConfigError("ablate.variants must not be empty");
    ModelConfig probe = model;
    if (probe.v == 0) probe.v = 1;
    if (probe.num_classes == 0) probe.num_classes = 2;
    try {
      probe.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
};

}  // namespace amtfnet

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
 * \file pipeline.hpp
 * \brief End-to-end wiring: dataset manifests, normalise / window / split,
 * and one seeded training run with its test evaluation.
 */
#pragma once

#include "amtfnet/config.hpp"

#include <filesystem>

namespace amtfnet {

namespace fs = std::filesystem;

inline constexpr const char* kManifestFormat = "amtfnet-dataset";

struct ManifestEntry {
  std::string path;  // relative to the manifest
  std::size_t mode = 0;
  std::size_t condition = 0;
  std::size_t rows = 0;
};

struct Manifest {
  std::uint64_t seed = 0;
  std::size_t num_classes = 0;
  std::size_t num_modes = 0;
  std::vector<std::string> variables;
  std::vector<std::string> class_names;  // index = label
  std::vector<ManifestEntry> files;
  Json generator;

  Json to_json() const {
    Json classes = Json::array(), entries = Json::array();
    for (std::size_t l = 0; l < class_names.size(); ++l)
      classes.push_back({{"label", l}, {"name", class_names[l]}});
    for (const auto& e : files)
      entries.push_back(
          {{"path", e.path}, {"mode", e.mode}, {"condition", e.condition}, {"rows", e.rows}});
    return Json{{"format", kManifestFormat}, {"version", 1},
                {"seed", seed},              {"num_classes", num_classes},
                {"num_modes", num_modes},    {"variables", variables},
                {"class_map", classes},      {"files", entries},
                {"generator", generator}};
  }

  static Manifest from_json(const Json& j, const std::string& where = "manifest") {
    json_util::reject_unknown(j, {"format", "version", "seed", "num_classes", "num_modes",
                                  "variables", "class_map", "files", "generator"},
                              where);
    std::string format;
    json_util::read_required(j, "format", format, where);
    if (format != kManifestFormat) throw ConfigError(where + ": not a dataset manifest");
    Manifest m;
    json_util::read(j, "seed", m.seed, where);
    json_util::read_required(j, "num_classes", m.num_classes, where);
    json_util::read(j, "num_modes", m.num_modes, where);
    json_util::read(j, "variables", m.variables, where);
    if (j.contains("generator")) m.generator = j.at("generator");
    if (!j.contains("files") || !j.at("files").is_array())
      throw ConfigError(where + ": \"files\" must be an array");
    for (const auto& e : j.at("files")) {
      ManifestEntry me;
      json_util::read_required(e, "path", me.path, where + ".files");
      json_util::read(e, "mode", me.mode, where + ".files");
      json_util::read(e, "condition", me.condition, where + ".files");
      json_util::read(e, "rows", me.rows, where + ".files");
      m.files.push_back(me);
    }
    if (j.contains("class_map"))
      for (const auto& c : j.at("class_map")) m.class_names.push_back(c.value("name", ""));
    return m;
  }
};

inline std::string class_name(const GeneratorConfig& g, std::size_t condition) {
  if (condition == 0) return "normal";
  const auto& f = g.faults.at(condition - 1);
  return fault_type_name(f.type) + "@loop" + std::to_string(f.loop);
}

/// Writes one CSV per (mode, condition) run plus manifest.json into `dir`.
inline Manifest write_generated_dataset(const GeneratorConfig& g, const std::string& dir) {
  fs::create_directories(dir);
  const auto runs = synth_generate(g, g.seed);
  Manifest m;
  m.seed = g.seed;
  m.num_classes = g.num_classes();
  m.num_modes = g.modes.size();
  m.variables = runs.front().series.names;
  m.generator = g.to_json();
  for (std::size_t l = 0; l < m.num_classes; ++l) m.class_names.push_back(class_name(g, l));
  for (const auto& r : runs) {
    const std::string name =
        "mode" + std::to_string(r.mode) + "_condition" + std::to_string(r.condition) + ".csv";
    write_csv((fs::path(dir) / name).string(), r.series);
    m.files.push_back({name, r.mode, r.condition, r.series.rows()});
  }
  json_util::write_file((fs::path(dir) / "manifest.json").string(), m.to_json());
  return m;
}

struct LoadedData {
  std::vector<RawSeries> runs;
  std::size_t num_classes = 0;
};

/// Reads the runs named by the data section (a file list or a manifest).
inline LoadedData load_runs(const DataConfig& data) {
  LoadedData out;
  std::vector<std::string> paths = data.files;
  std::size_t declared = data.num_classes;
  if (!data.manifest.empty()) {
    const auto m = Manifest::from_json(json_util::load_file(data.manifest), data.manifest);
    const auto base = fs::path(data.manifest).parent_path();
    for (const auto& e : m.files) paths.push_back((base / e.path).string());
    if (declared == 0) declared = m.num_classes;
  }
  if (paths.empty()) throw DataError("data: no input files (set data.files or data.manifest)");
  CsvSchema schema;
  schema.num_classes = declared;
  for (const auto& p : paths) out.runs.push_back(load_csv(p, schema));
  std::size_t seen = 0;
  for (const auto& r : out.runs)
    for (auto l : r.labels) seen = std::max(seen, l + 1);
  out.num_classes = declared ? declared : std::max<std::size_t>(seen, 2);
  return out;
}

struct PreparedData {
  NormStats stats;
  WindowedDataset all;
  DatasetSplit split;
  std::size_t num_classes = 0;
  std::vector<std::string> variables;
};

/// normalise (fault-free statistics over every run) -> window -> split.
/// `stats` replaces the computed statistics when given (evaluation reuses
/// the statistics stored with a checkpoint).
inline PreparedData prepare_data(std::vector<RawSeries> runs, std::size_t num_classes,
                                 std::size_t w, std::size_t normal_label, SplitSpec split,
                                 const NormStats* stats = nullptr) {
  if (runs.empty()) throw DataError("no input runs");
  PreparedData p;
  p.num_classes = num_classes;
  p.variables = runs.front().names;
  p.stats = stats ? *stats : compute_norm_stats(runs, normal_label);
  for (auto& r : runs) r = apply_zscore(r, p.stats);
  p.all = slide_windows(std::move(runs), w, p.stats);
  split.num_classes = num_classes;
  p.split = stratified_split(p.all, split);
  return p;
}

inline PreparedData prepare_data(LoadedData data, const RunConfig& cfg,
                                 const NormStats* stats = nullptr) {
  SplitSpec split = cfg.split;
  split.seed = cfg.split_seed();
  return prepare_data(std::move(data.runs), data.num_classes, cfg.model.w, cfg.data.normal_label,
                      split, stats);
}

/// The model section with v and num_classes filled from the data.
inline ModelConfig resolve_model(ModelConfig m, const PreparedData& d) {
  const std::size_t v = d.all.vars();
  if (m.v != 0 && m.v != v)
    throw DataError("model.v = " + std::to_string(m.v) + " but the data has " + std::to_string(v) +
                    " variables");
  if (m.num_classes != 0 && m.num_classes != d.num_classes)
    throw DataError("model.num_classes = " + std::to_string(m.num_classes) + " but the data has " +
                    std::to_string(d.num_classes) + " classes");
  m.v = v;
  m.num_classes = d.num_classes;
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return m;
}

struct RunResult {
  Model model;
  TrainReport report;
  EvalReport test;
};

/// One seeded training run: init, train with validation selection, then
/// evaluate the selected model on the test split.
inline RunResult train_and_test(const ModelConfig& model_cfg, const PreparedData& data,
                                TrainConfig train_cfg, std::uint64_t seed,
                                const EpochCallback& on_epoch = {}) {
  train_cfg.seed = seed;
  RunResult r{make_model(model_cfg, derive_seed(seed, "init")), {}, {}};
  r.report = train(r.model, data.split.train, data.split.val, train_cfg, on_epoch);
  r.test = evaluate(r.model, data.split.test, train_cfg.eval_batch_size);
  return r;
}

inline Json checkpoint_meta(const PreparedData& d, const RunConfig& cfg, const TrainReport& rep) {
  return Json{{"seed", cfg.seed},
              {"norm_stats", d.stats.to_json()},
              {"variables", d.variables},
              {"best_epoch", rep.best_epoch},
              {"best_val_micro_f1", rep.best_val_micro_f1}};
}

}  // namespace amtfnet

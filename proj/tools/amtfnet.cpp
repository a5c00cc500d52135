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

// amtfnet: generate | train | eval | gradcheck | ablate
//
// Exit codes: 0 success, 1 check failure, 2 input/config error, 3 numeric failure.

#include "amtfnet/gradcheck_suite.hpp"
#include "amtfnet/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iomanip>
#include <iostream>

using namespace amtfnet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quiet = false;
};

RunConfig load_config(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : RunConfig::load(c.config);
  if (c.seed) cfg.set_seed(*c.seed);
  if (!c.out.empty()) cfg.out_dir = c.out;
  return cfg;
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  return (fs::path(cfg.out_dir) / name).string();
}

void make_out_dir(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + cfg.out_dir + ": " + ec.message());
}

EpochCallback progress(bool quiet, std::size_t epochs, const std::string& tag = "") {
  if (quiet) return {};
  return [epochs, tag](const EpochRecord& e) {
    std::fprintf(stderr, "%sepoch %zu/%zu lr %.6g loss %.6f val_micro_f1 %.6f\n", tag.c_str(),
                 e.epoch + 1, epochs, e.lr, e.mean_loss, e.val_micro_f1);
  };
}

Json split_sizes(const PreparedData& d) {
  return Json{{"windows", d.all.size()},
              {"train", d.split.train.size()},
              {"val", d.split.val.size()},
              {"test", d.split.test.size()}};
}

int cmd_generate(const Common& c) {
  RunConfig cfg = load_config(c);
  if (!cfg.generator) throw ConfigError("generate: the config has no \"generator\" section");
  make_out_dir(cfg);
  const auto m = write_generated_dataset(*cfg.generator, cfg.out_dir);
  json_util::write_file(out_path(cfg, "resolved_config.json"), cfg.to_json());
  std::cout << "wrote " << m.files.size() << " runs (" << m.num_modes << " modes x "
            << m.num_classes << " conditions) and manifest.json to " << cfg.out_dir << '\n';
  return kExitOk;
}

int cmd_train(const Common& c) {
  RunConfig cfg = load_config(c);
  const auto data = prepare_data(load_runs(cfg.data), cfg);
  cfg.model = resolve_model(cfg.model, data);
  make_out_dir(cfg);
  json_util::write_file(out_path(cfg, "resolved_config.json"), cfg.to_json());
  if (!c.quiet)
    std::fprintf(stderr, "windows: %zu train / %zu val / %zu test, %zu parameters\n",
                 data.split.train.size(), data.split.val.size(), data.split.test.size(),
                 count_parameters(cfg.model));
  const auto run = train_and_test(cfg.model, data, cfg.train, cfg.seed,
                                  progress(c.quiet, cfg.train.epochs));
  save_checkpoint(out_path(cfg, "checkpoint.bin"), run.model, checkpoint_meta(data, cfg, run.report));
  Json report = run.report.to_json();
  report["parameters"] = count_parameters(cfg.model);
  report["split"] = split_sizes(data);
  report["norm_stats_source"] = data.stats.source;
  report["test"] = run.test.to_json();
  json_util::write_file(out_path(cfg, "train_report.json"), report);
  std::cout << "best epoch " << run.report.best_epoch + 1 << " val_micro_f1 "
            << run.report.best_val_micro_f1 << " test_micro_f1 " << run.test.micro_f1 << '\n'
            << "wrote checkpoint.bin, train_report.json, resolved_config.json to " << cfg.out_dir
            << '\n';
  return kExitOk;
}

int cmd_eval(const Common& c, std::string checkpoint, const std::string& split,
             const std::string& features) {
  RunConfig cfg = load_config(c);
  if (checkpoint.empty()) checkpoint = out_path(cfg, "checkpoint.bin");
  const Checkpoint ck = load_checkpoint(checkpoint);
  if (!ck.meta.contains("norm_stats"))
    throw ConfigError(checkpoint + ": no normalisation statistics stored");
  const NormStats stats = NormStats::from_json(ck.meta.at("norm_stats"));
  LoadedData loaded = load_runs(cfg.data);
  if (!loaded.runs.empty() && loaded.runs.front().vars() != ck.model.config.v)
    throw DataError("checkpoint expects v = " + std::to_string(ck.model.config.v) +
                    " variables but " + loaded.runs.front().source + " has " +
                    std::to_string(loaded.runs.front().vars()));
  if (loaded.num_classes > ck.model.config.num_classes)
    throw DataError("data has labels up to " + std::to_string(loaded.num_classes - 1) +
                    " but the checkpoint model has " +
                    std::to_string(ck.model.config.num_classes) + " classes");
  loaded.num_classes = ck.model.config.num_classes;
  cfg.model = ck.model.config;
  const auto data = prepare_data(std::move(loaded), cfg, &stats);

  const WindowedDataset* ds = nullptr;
  if (split == "test")
    ds = &data.split.test;
  else if (split == "val")
    ds = &data.split.val;
  else if (split == "train")
    ds = &data.split.train;
  else if (split == "all")
    ds = &data.all;
  else
    throw ConfigError("--split must be one of train, val, test, all");

  make_out_dir(cfg);
  json_util::write_file(out_path(cfg, "resolved_config.json"), cfg.to_json());
  const auto rep = evaluate(ck.model, *ds, cfg.train.eval_batch_size);
  Json j = rep.to_json();
  j["checkpoint"] = checkpoint;
  j["split"] = split;
  json_util::write_file(out_path(cfg, "eval_report.json"), j);
  write_class_csv(out_path(cfg, "per_class.csv"), rep);
  if (!features.empty()) export_features(ck.model, *ds, features, cfg.train.eval_batch_size);
  std::cout << std::setprecision(6) << split << " split: " << ds->size() << " windows, micro_f1 "
            << rep.micro_f1 << " macro_f1 " << rep.macro_f1 << " mean_fdr " << rep.mean_fdr
            << " mean_fpr " << rep.mean_fpr << '\n'
            << "wrote eval_report.json, per_class.csv to " << cfg.out_dir << '\n';
  return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t points, bool corrupt) {
  SuiteOptions opt;
  opt.seed = seed;
  opt.points = points;
  opt.corrupt = corrupt;
  const auto rep = run_gradcheck_suite(opt);
  for (const auto& e : rep.entries)
    std::cout << std::left << std::setw(28) << e.name << " max_rel_error " << std::scientific
              << std::setprecision(3) << e.max_rel_error << "  tol " << e.tolerance << "  "
              << (e.passed ? "ok" : "FAIL") << '\n'
              << std::defaultfloat;
  std::cout << (rep.passed() ? "all gradient checks passed" : "gradient check FAILED") << '\n';
  return rep.passed() ? kExitOk : kExitCheckFailed;
}

int cmd_ablate(const Common& c) {
  RunConfig cfg = load_config(c);
  const auto data = prepare_data(load_runs(cfg.data), cfg);
  const ModelConfig base = resolve_model(cfg.model, data);
  cfg.model = base;
  make_out_dir(cfg);
  json_util::write_file(out_path(cfg, "resolved_config.json"), cfg.to_json());
  const std::vector<std::uint64_t> seeds =
      cfg.ablate.seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : cfg.ablate.seeds;

  std::ofstream csv(out_path(cfg, "ablation.csv"));
  if (!csv) throw std::runtime_error("cannot write " + out_path(cfg, "ablation.csv"));
  csv << "variant,parameters,micro_f1";
  for (auto s : seeds) csv << ",micro_f1_seed" << s;
  csv << '\n' << std::setprecision(std::numeric_limits<double>::max_digits10);
  Json rows = Json::array();
  for (Variant v : cfg.ablate.variants) {
    ModelConfig mc = base;
    mc.variant = v;
    std::vector<double> scores;
    Json runs = Json::array();
    for (auto s : seeds) {
      const auto tag = variant_name(v) + " seed " + std::to_string(s) + ": ";
      const auto run = train_and_test(mc, data, cfg.train, s, progress(c.quiet, cfg.train.epochs, tag));
      scores.push_back(run.test.micro_f1);
      runs.push_back({{"seed", s}, {"best_epoch", run.report.best_epoch}, {"test", run.test.to_json()}});
    }
    const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
    csv << variant_name(v) << ',' << count_parameters(mc) << ',' << mean;
    for (double x : scores) csv << ',' << x;
    csv << '\n';
    rows.push_back({{"variant", variant_name(v)},
                    {"parameters", count_parameters(mc)},
                    {"mean_micro_f1", mean},
                    {"runs", runs}});
    std::cout << std::setw(5) << variant_name(v) << "  params " << count_parameters(mc)
              << "  micro_f1 " << mean << std::endl;
  }
  json_util::write_file(out_path(cfg, "ablation.json"), Json{{"split", split_sizes(data)}, {"variants", rows}});
  std::cout << "wrote ablation.csv, ablation.json to " << cfg.out_dir << '\n';
  return kExitOk;
}

void add_common(CLI::App* cmd, Common& c, bool needs_config) {
  auto* opt = cmd->add_option("--config", c.config, "Run configuration (JSON)");
  if (needs_config) opt->required();
  cmd->add_option("--seed", c.seed, "Root seed (overrides the config)");
  cmd->add_option("--out", c.out, "Output directory (overrides out_dir)");
  cmd->add_flag("--quiet", c.quiet, "No per-epoch progress on stderr");
}

}  // namespace

int main(int argc, char** argv) {
  amtfnet::keep_freed_memory();
  CLI::App app{"AMTFNet multimode fault diagnosis toolkit"};
  app.require_subcommand(1);
  Common common;

  auto* gen = app.add_subcommand("generate", "Simulate a multimode dataset: one CSV per run plus a manifest");
  add_common(gen, common, true);

  auto* tr = app.add_subcommand("train", "Normalise, window, split and train; writes the best checkpoint");
  add_common(tr, common, true);

  std::string checkpoint, split = "test", features;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a split of the configured data");
  add_common(ev, common, true);
  ev->add_option("--checkpoint", checkpoint, "Checkpoint file (default: <out>/checkpoint.bin)");
  ev->add_option("--split", split, "train | val | test | all")->check(CLI::IsMember({"train", "val", "test", "all"}));
  ev->add_option("--export-features", features, "Also write fused features per window to this CSV");

  std::uint64_t gc_seed = 0;
  std::size_t points = 5;
  bool corrupt = false;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference checks of every layer and the tiny model");
  gc->add_option("--seed", gc_seed, "Seed for the random check points");
  gc->add_option("--points", points, "Random points per check")->check(CLI::PositiveNumber);
  gc->add_flag("--corrupt-backward", corrupt)->group("");  // negative-control fixture

  auto* ab = app.add_subcommand("ablate", "Train every variant with shared data and seeds");
  add_common(ab, common, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*gen) return cmd_generate(common);
    if (*tr) return cmd_train(common);
    if (*ev) return cmd_eval(common, checkpoint, split, features);
    if (*gc) return cmd_gradcheck(gc_seed, points, corrupt);
    if (*ab) return cmd_ablate(common);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}

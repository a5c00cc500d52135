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
#include "amtfnet/pipeline.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace amtfnet;

namespace {

struct Result {
  int code = -1;
  std::string output;
};

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("amtfnet_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Result run(const std::string& args, const fs::path& cwd) {
  const auto log = cwd / "cli_output.txt";
  const std::string cmd = "cd '" + cwd.string() + "' && '" + AMTFNET_CLI_PATH + "' " + args +
                          " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json(const fs::path& p, const Json& j) { json_util::write_file(p.string(), j); }

Json generator_json(std::size_t modes, std::size_t faults, std::size_t segment_len) {
  GeneratorConfig g = benchmark_generator(segment_len);
  g.modes.resize(modes);
  g.faults.resize(faults);
  for (auto& m : g.modes) {
    m.setpoint.resize(1);
    m.gain.resize(1);
  }
  for (auto& f : g.faults) f.loop = 0;
  return g.to_json();
}

// v = 4 (one loop), M = 2, L = 3.
Json smoke_config() {
  return Json{{"seed", 5},
              {"out_dir", "run"},
              {"generator", generator_json(2, 2, 200)},
              {"data", {{"manifest", "data/manifest.json"}}},
              {"model", {{"w", 16}, {"kernel_sizes", {3, 5, 7}}, {"hidden", 8}}},
              {"train", {{"epochs", 30}, {"batch_size", 64}}}};
}

}  // namespace

TEST(Cli, GenerateWritesOneFilePerRunAndManifest) {
  const auto dir = scratch("generate");
  Json cfg{{"seed", 3}, {"out_dir", "a"}, {"generator", benchmark_generator(120).to_json()}};
  write_json(dir / "gen.json", cfg);
  ASSERT_EQ(run("generate --config gen.json", dir).code, 0);
  ASSERT_EQ(run("generate --config gen.json --out b", dir).code, 0);

  std::size_t csvs = 0;
  for (const auto& e : fs::directory_iterator(dir / "a")) csvs += e.path().extension() == ".csv";
  EXPECT_EQ(csvs, 15u);
  const auto m = Manifest::from_json(json_util::load_file((dir / "a" / "manifest.json").string()));
  EXPECT_EQ(m.files.size(), 15u);
  EXPECT_EQ(m.num_classes, 5u);
  ASSERT_EQ(m.class_names.size(), 5u);
  const Json raw = json_util::load_file((dir / "a" / "manifest.json").string());
  for (std::size_t l = 0; l < 5; ++l) EXPECT_EQ(raw["class_map"][l]["label"], l);
  std::set<std::size_t> labels;
  for (const auto& f : m.files) {
    EXPECT_EQ(slurp(dir / "a" / f.path), slurp(dir / "b" / f.path)) << f.path;
    for (auto l : load_csv((dir / "a" / f.path).string()).labels) labels.insert(l);
  }
  EXPECT_EQ(labels, (std::set<std::size_t>{0, 1, 2, 3, 4}));
  EXPECT_TRUE(fs::exists(dir / "a" / "resolved_config.json"));
}

TEST(Cli, TrainEvalSmokeRun) {
  const auto dir = scratch("train");
  write_json(dir / "cfg.json", smoke_config());
  ASSERT_EQ(run("generate --config cfg.json --out data", dir).code, 0);
  const auto first = run("train --config cfg.json --quiet", dir);
  ASSERT_EQ(first.code, 0) << first.output;
  for (const char* f : {"checkpoint.bin", "train_report.json", "resolved_config.json"})
    EXPECT_TRUE(fs::exists(dir / "run" / f)) << f;
  const auto report = json_util::load_file((dir / "run" / "train_report.json").string());
  EXPECT_EQ(report["epochs"].size(), 30u);
  const auto resolved = json_util::load_file((dir / "run" / "resolved_config.json").string());
  EXPECT_EQ(resolved["model"]["v"], 4);
  EXPECT_EQ(resolved["model"]["num_classes"], 3);

  const std::string ckpt = slurp(dir / "run" / "checkpoint.bin");
  ASSERT_EQ(run("train --config cfg.json --quiet --out run2", dir).code, 0);
  EXPECT_EQ(ckpt, slurp(dir / "run2" / "checkpoint.bin"));
  ASSERT_EQ(run("train --config cfg.json --quiet --out run3 --seed 6", dir).code, 0);
  EXPECT_NE(ckpt, slurp(dir / "run3" / "checkpoint.bin"));

  const auto ev = run("eval --config cfg.json --export-features feats.csv", dir);
  ASSERT_EQ(ev.code, 0) << ev.output;
  const auto rep = json_util::load_file((dir / "run" / "eval_report.json").string());
  for (const char* k : {"micro_f1", "macro_f1", "mean_fdr", "mean_fpr"}) EXPECT_TRUE(rep.contains(k)) << k;
  const auto again = compute_metrics(ConfusionMatrix::from_json(rep["confusion_matrix"]));
  EXPECT_EQ(again.micro_f1, rep["micro_f1"].get<double>());
  EXPECT_EQ(again.macro_f1, rep["macro_f1"].get<double>());
  EXPECT_EQ(again.mean_fdr, rep["mean_fdr"].get<double>());
  EXPECT_EQ(again.mean_fpr, rep["mean_fpr"].get<double>());
  EXPECT_EQ(rep["micro_f1"], report["test"]["micro_f1"]);

  std::ifstream pc(dir / "run" / "per_class.csv");
  std::string line;
  std::size_t rows = 0;
  std::getline(pc, line);
  EXPECT_EQ(line, "class,FDR,FPR,F1");
  while (std::getline(pc, line)) ++rows;
  EXPECT_EQ(rows, 3u);

  std::ifstream feats(dir / "feats.csv");
  std::getline(feats, line);
  EXPECT_EQ(line.rfind("f0,", 0), 0u);
  EXPECT_NE(line.find("f7,label,mode"), std::string::npos);
  std::size_t feat_rows = 0;
  while (std::getline(feats, line)) ++feat_rows;
  EXPECT_EQ(feat_rows, rep["samples"].get<std::size_t>());
  const std::string first_export = slurp(dir / "feats.csv");
  ASSERT_EQ(run("eval --config cfg.json --export-features feats.csv", dir).code, 0);
  EXPECT_EQ(first_export, slurp(dir / "feats.csv"));
}

TEST(Cli, InputErrorsExitTwo) {
  const auto dir = scratch("errors");
  std::ofstream(dir / "bad.csv") << "a,b\n1,2\n3,4\n";
  Json cfg = smoke_config();
  cfg["data"] = Json{{"files", {"bad.csv"}}};
  write_json(dir / "missing_label.json", cfg);
  const auto r = run("train --config missing_label.json", dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("label"), std::string::npos) << r.output;

  Json typo = smoke_config();
  typo["train"]["epoch"] = 3;
  write_json(dir / "typo.json", typo);
  const auto t = run("train --config typo.json", dir);
  EXPECT_EQ(t.code, 2);
  EXPECT_NE(t.output.find("epoch"), std::string::npos) << t.output;

  EXPECT_EQ(run("train --config does_not_exist.json", dir).code, 2);
  EXPECT_EQ(run("frobnicate", dir).code, 2);
}

TEST(Cli, EvalRejectsVariableCountMismatch) {
  const auto dir = scratch("mismatch");
  write_json(dir / "cfg.json", smoke_config());
  ASSERT_EQ(run("generate --config cfg.json --out data", dir).code, 0);
  ASSERT_EQ(run("train --config cfg.json --quiet", dir).code, 0);
  std::ofstream csv(dir / "wide.csv");
  csv << "a,b,c,d,e,label\n";
  for (int r = 0; r < 40; ++r) csv << r << ",1,2,3,4," << (r % 2) << '\n';
  csv.close();
  Json cfg = smoke_config();
  cfg["data"] = Json{{"files", {"wide.csv"}}};
  write_json(dir / "wide.json", cfg);
  const auto r = run("eval --config wide.json", dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("v = 4"), std::string::npos) << r.output;
}

TEST(Cli, DivergenceExitsThree) {
  const auto dir = scratch("diverge");
  Json cfg = smoke_config();
  cfg["train"]["initial_lr"] = 1e300;
  cfg["train"]["epochs"] = 3;
  write_json(dir / "cfg.json", cfg);
  ASSERT_EQ(run("generate --config cfg.json --out data", dir).code, 0);
  const auto r = run("train --config cfg.json --quiet", dir);
  EXPECT_EQ(r.code, 3) << r.output;
}

TEST(Cli, GradcheckPassesAndCatchesCorruption) {
  const auto dir = scratch("gradcheck");
  const auto ok = run("gradcheck", dir);
  EXPECT_EQ(ok.code, 0) << ok.output;
  EXPECT_NE(ok.output.find("model_FULL"), std::string::npos);
  EXPECT_EQ(run("gradcheck --seed 1", dir).code, 0);
  EXPECT_EQ(run("gradcheck --seed 2", dir).code, 0);
  const auto bad = run("gradcheck --corrupt-backward", dir);
  EXPECT_EQ(bad.code, 1) << bad.output;
  EXPECT_NE(bad.output.find("FAIL"), std::string::npos);
}

TEST(Cli, AblateEmitsOneRowPerVariant) {
  const auto dir = scratch("ablate");
  Json cfg = smoke_config();
  cfg["train"]["epochs"] = 2;
  write_json(dir / "cfg.json", cfg);
  ASSERT_EQ(run("generate --config cfg.json --out data", dir).code, 0);
  const auto r = run("ablate --config cfg.json --quiet", dir);
  ASSERT_EQ(r.code, 0) << r.output;
  std::ifstream in(dir / "run" / "ablation.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "variant,parameters,micro_f1,micro_f1_seed5");
  std::vector<std::string> names;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string name, params, score;
    std::getline(ss, name, ',');
    std::getline(ss, params, ',');
    std::getline(ss, score, ',');
    names.push_back(name);
    const double s = std::stod(score);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
    ModelConfig mc;
    mc.v = 4;
    mc.w = 16;
    mc.kernel_sizes = {3, 5, 7};
    mc.hidden = 8;
    mc.num_classes = 3;
    mc.variant = parse_variant(name);
    EXPECT_EQ(std::stoul(params), count_parameters(mc)) << name;
  }
  EXPECT_EQ(names, (std::vector<std::string>{"A1", "A2", "A3", "A4", "A5", "A6", "FULL"}));
}

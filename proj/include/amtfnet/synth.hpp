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
 * \file synth.hpp
 * \brief Synthetic multimode closed-loop process with injected faults.
 *
 * The process has K independent control loops. Loop j is a second-order
 * plant under PI control:
 *
 *   x[t+1] = 1.6 x[t] - 0.64 x[t-1] + 0.04 p[t]
 *   p[t]   = g_j u[t] - 0.5 D[t] + 0.6 D[t] e[t]
 *   u[t]   = kp (s_j - y[t]) + ki * sum of past errors      (kp 0.6, ki 0.08)
 *
 * where y = x + noise is the measured output, e is unit-variance AR(1)
 * excitation (coefficient 0.95) and D is a disturbance level around 1 with
 * AR(1) fluctuation (coefficient 0.9). The excitation enters through D, so a
 * disturbance fault changes the loop's variability and correlation structure
 * as well as its level, which survives per-window instance normalisation.
 *
 * Each loop exposes four variables in this order: measured output y,
 * actuator u, measured disturbance D + noise and an auxiliary lagged
 * measurement m[t+1] = 0.8 m[t] + 0.2 (0.5 x + 0.3 u) (+ noise). A mode fixes
 * the setpoints s and gains g.
 *
 * Fault archetypes, active from the onset row onward on one loop:
 *   step    D += magnitude
 *   random  D += magnitude * U(-1, 1), fresh every step
 *   drift   D += magnitude * (t - onset)
 *   stick   u frozen at its last pre-fault value
 *
 * Every (mode, condition) pair is one run with its own random stream derived
 * from the root seed. Condition 0 is fault-free; condition i is fault i-1.
 * Rows before the onset of a faulty run carry label 0.
 */
#pragma once

#include "amtfnet/data.hpp"
#include "amtfnet/json_util.hpp"
#include "amtfnet/random.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace amtfnet {

enum class FaultType { kStep, kRandom, kDrift, kStick };

inline FaultType parse_fault_type(const std::string& s) {
  if (s == "step") return FaultType::kStep;
  if (s == "random") return FaultType::kRandom;
  if (s == "drift") return FaultType::kDrift;
  if (s == "stick") return FaultType::kStick;
  throw ConfigError("unknown fault type \"" + s + "\" (expected step, random, drift or stick)");
}

inline std::string fault_type_name(FaultType t) {
  switch (t) {
    case FaultType::kStep: return "step";
    case FaultType::kRandom: return "random";
    case FaultType::kDrift: return "drift";
    case FaultType::kStick: return "stick";
  }
  return "step";
}

struct ModeSpec {
  std::vector<double> setpoint;
  std::vector<double> gain;
};

struct FaultSpec {
  FaultType type = FaultType::kStep;
  std::size_t loop = 0;
  double magnitude = 0.0;
};

struct GeneratorConfig {
  std::vector<ModeSpec> modes;
  std::vector<FaultSpec> faults;
  std::size_t segment_len = 2063;
  double noise_std = 0.1;
  std::uint64_t seed = 0;
  double onset_fraction = 0.5;
  std::size_t burn_in = 300;

  std::size_t loops() const { return modes.empty() ? 0 : modes.front().setpoint.size(); }
  std::size_t vars() const { return 4 * loops(); }
  std::size_t num_classes() const { return faults.size() + 1; }

  void validate() const {
    if (modes.size() < 2) throw ConfigError("generator: need at least 2 modes, got " + std::to_string(modes.size()));
    if (faults.empty()) throw ConfigError("generator: need at least 1 fault (L >= 2)");
    const std::size_t k = loops();
    if (k == 0) throw ConfigError("generator: modes need at least one setpoint");
    for (std::size_t m = 0; m < modes.size(); ++m)
      if (modes[m].setpoint.size() != k || modes[m].gain.size() != k)
        throw ConfigError("generator: mode " + std::to_string(m) + " must have " +
                          std::to_string(k) + " setpoints and gains");
    for (std::size_t f = 0; f < faults.size(); ++f)
      if (faults[f].loop >= k)
        throw ConfigError("generator: fault " + std::to_string(f) + " targets loop " +
                          std::to_string(faults[f].loop) + " but there are " + std::to_string(k));
    if (segment_len < 2) throw ConfigError("generator: segment_len must be >= 2");
    if (!(noise_std >= 0.0)) throw ConfigError("generator: noise_std must be >= 0");
    if (!(onset_fraction > 0.0 && onset_fraction < 1.0))
      throw ConfigError("generator: onset_fraction must be in (0, 1)");
  }

  Json to_json() const {
    Json jm = Json::array(), jf = Json::array();
    for (const auto& m : modes) jm.push_back({{"setpoint", m.setpoint}, {"gain", m.gain}});
    for (const auto& f : faults)
      jf.push_back({{"type", fault_type_name(f.type)}, {"loop", f.loop}, {"magnitude", f.magnitude}});
    return Json{{"modes", jm},       {"faults", jf},
                {"segment_len", segment_len}, {"noise_std", noise_std},
                {"seed", seed},      {"onset_fraction", onset_fraction},
                {"burn_in", burn_in}};
  }

  static GeneratorConfig from_json(const Json& j, const std::string& where = "generator") {
    json_util::reject_unknown(j, {"modes", "faults", "segment_len", "noise_std", "seed",
                                  "onset_fraction", "burn_in"},
                              where);
    GeneratorConfig g;
    if (!j.contains("modes") || !j.at("modes").is_array())
      throw ConfigError(where + ": \"modes\" must be an array");
    if (!j.contains("faults") || !j.at("faults").is_array())
      throw ConfigError(where + ": \"faults\" must be an array");
    for (std::size_t m = 0; m < j.at("modes").size(); ++m) {
      const auto& jm = j.at("modes")[m];
      const std::string w = where + ".modes[" + std::to_string(m) + "]";
      json_util::reject_unknown(jm, {"setpoint", "gain"}, w);
      ModeSpec ms;
      json_util::read_required(jm, "setpoint", ms.setpoint, w);
      json_util::read_required(jm, "gain", ms.gain, w);
      g.modes.push_back(ms);
    }
    for (std::size_t f = 0; f < j.at("faults").size(); ++f) {
      const auto& jf = j.at("faults")[f];
      const std::string w = where + ".faults[" + std::to_string(f) + "]";
      json_util::reject_unknown(jf, {"type", "loop", "magnitude"}, w);
      FaultSpec fs;
      std::string type;
      json_util::read_required(jf, "type", type, w);
      fs.type = parse_fault_type(type);
      json_util::read_required(jf, "loop", fs.loop, w);
      if (fs.type != FaultType::kStick) json_util::read_required(jf, "magnitude", fs.magnitude, w);
      g.faults.push_back(fs);
    }
    json_util::read(j, "segment_len", g.segment_len, where);
    json_util::read(j, "noise_std", g.noise_std, where);
    json_util::read(j, "seed", g.seed, where);
    json_util::read(j, "onset_fraction", g.onset_fraction, where);
    json_util::read(j, "burn_in", g.burn_in, where);
    g.validate();
    return g;
  }
};

struct SynthRun {
  std::size_t mode = 0;
  std::size_t condition = 0;  // 0 = fault-free
  RawSeries series;
};

/// Row index (within the emitted segment) where faults switch on.
inline std::size_t fault_onset_row(const GeneratorConfig& cfg) {
  return static_cast<std::size_t>(cfg.onset_fraction * static_cast<double>(cfg.segment_len));
}

inline RawSeries simulate_run(const GeneratorConfig& cfg, std::size_t mode, std::size_t condition,
                              std::uint64_t seed) {
  const auto& ms = cfg.modes.at(mode);
  const FaultSpec* fault = condition ? &cfg.faults.at(condition - 1) : nullptr;
  const std::size_t K = cfg.loops();
  const std::size_t total = cfg.burn_in + cfg.segment_len;
  const std::size_t onset = cfg.burn_in + fault_onset_row(cfg);
  const double noise = cfg.noise_std;
  constexpr double a1 = 1.6, a2 = -0.64, b = 1.0 - a1 - a2;
  constexpr double kp = 0.6, ki = 0.08, rho_e = 0.95, rho_d = 0.9;
  const double se = std::sqrt(1.0 - rho_e * rho_e), sd = std::sqrt(1.0 - rho_d * rho_d);

  Rng rng(seed);
  std::vector<double> x(ms.setpoint), xp(ms.setpoint), e(K, 0.0), fd(K, 0.0), integ(K, 0.0),
      u(K, 0.0), m(K), D(K), y(K);
  for (std::size_t j = 0; j < K; ++j) m[j] = 0.5 * ms.setpoint[j];
  bool stuck_set = false;
  double stuck = 0.0;

  RawSeries s;
  for (std::size_t j = 0; j < K; ++j)
    for (const char* n : {"y", "u", "d", "m"}) s.names.push_back(std::string(n) + std::to_string(j));
  s.values.reserve(cfg.segment_len * 4 * K);
  s.source = "synthetic mode " + std::to_string(mode) + " condition " + std::to_string(condition);

  std::vector<double> row(4 * K);
  for (std::size_t t = 0; t < total; ++t) {
    const bool active = fault && t >= onset;
    for (std::size_t j = 0; j < K; ++j) e[j] = rho_e * e[j] + se * rng.normal();
    for (std::size_t j = 0; j < K; ++j) fd[j] = rho_d * fd[j] + sd * rng.normal();
    for (std::size_t j = 0; j < K; ++j) D[j] = 1.0 + 1.5 * noise * fd[j];
    if (active) {
      const std::size_t j = fault->loop;
      switch (fault->type) {
        case FaultType::kStep: D[j] += fault->magnitude; break;
        case FaultType::kRandom: D[j] += fault->magnitude * rng.uniform(-1.0, 1.0); break;
        case FaultType::kDrift: D[j] += fault->magnitude * static_cast<double>(t - onset); break;
        case FaultType::kStick: break;
      }
    }
    for (std::size_t j = 0; j < K; ++j) y[j] = x[j] + noise * rng.normal();
    for (std::size_t j = 0; j < K; ++j) {
      const double err = ms.setpoint[j] - y[j];
      integ[j] += err;
      u[j] = kp * err + ki * integ[j];
    }
    if (active && fault->type == FaultType::kStick) {
      // `row` still holds the previous step's actuator value.
      if (!stuck_set) {
        stuck = row[4 * fault->loop + 1];
        stuck_set = true;
      }
      u[fault->loop] = stuck;
    }
    for (std::size_t j = 0; j < K; ++j) {
      const double p = ms.gain[j] * u[j] - 0.5 * D[j] + 0.6 * D[j] * e[j];
      const double xn = a1 * x[j] + a2 * xp[j] + b * p;
      xp[j] = x[j];
      x[j] = xn;
      m[j] = 0.8 * m[j] + 0.2 * (0.5 * x[j] + 0.3 * u[j]);
    }
    for (std::size_t j = 0; j < K; ++j) {
      row[4 * j] = y[j];
      row[4 * j + 1] = u[j];
      row[4 * j + 2] = D[j] + noise * rng.normal();
      row[4 * j + 3] = m[j] + noise * rng.normal();
    }
    if (t < cfg.burn_in) continue;
    s.values.insert(s.values.end(), row.begin(), row.end());
    s.labels.push_back(active ? condition : 0);
    s.modes.push_back(mode);
  }
  return s;
}

/// One run per (mode, condition), mode-major. Deterministic in `seed`.
inline std::vector<SynthRun> synth_generate(const GeneratorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::vector<SynthRun> runs;
  for (std::size_t mode = 0; mode < cfg.modes.size(); ++mode)
    for (std::size_t cond = 0; cond < cfg.num_classes(); ++cond) {
      const auto run_seed = derive_seed(seed, "synth/mode" + std::to_string(mode) + "/condition" +
                                                  std::to_string(cond));
      runs.push_back({mode, cond, simulate_run(cfg, mode, cond, run_seed)});
    }
  return runs;
}

/// The benchmark process: 3 modes, 2 loops (8 variables), 4 fault archetypes.
inline GeneratorConfig benchmark_generator(std::size_t segment_len = 2063) {
  GeneratorConfig g;
  g.modes = {{{1.0, 2.0}, {1.0, 1.5}}, {{3.0, 0.5}, {1.4, 0.8}}, {{-1.0, 4.0}, {0.8, 1.2}}};
  g.faults = {{FaultType::kStep, 0, 1.5},
              {FaultType::kRandom, 1, 1.0},
              {FaultType::kDrift, 0, 0.004},
              {FaultType::kStick, 1, 0.0}};
  g.segment_len = segment_len;
  g.noise_std = 0.1;
  return g;
}

}  // namespace amtfnet

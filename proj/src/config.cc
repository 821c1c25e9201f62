// Copyright 2026 The Meadow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "meadow/config.h"

#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <sstream>
#include <tuple>

namespace meadow {
namespace {

struct Field {
  const char* section;
  const char* key;
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

[[noreturn]] void BadValue(const std::string& key, const std::string& value,
                           const char* expected) {
  throw Error(ErrorCode::kConfig,
              "'" + key + "' expects " + expected + ", got '" + value + "'");
}

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string Fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

double ToDouble(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) BadValue(key, v, "a number");
    return d;
  } catch (const std::logic_error&) {
    BadValue(key, v, "a number");
  }
}

long long ToInt(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used != v.size()) BadValue(key, v, "an integer");
    return i;
  } catch (const std::logic_error&) {
    BadValue(key, v, "an integer");
  }
}

bool ToBool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  BadValue(key, v, "true or false");
}

std::vector<int> ToIntList(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const long long i = ToInt(key, Trim(item));
    if (i <= 0) BadValue(key, v, "positive layer sizes");
    out.push_back(static_cast<int>(i));
  }
  if (out.empty()) BadValue(key, v, "a comma-separated list");
  return out;
}

std::string FromIntList(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

Field Double(const char* sec, const char* key, double* p) {
  return {sec, key, [p] { return Fmt(*p); },
          [p, key](const std::string& v) { *p = ToDouble(key, v); }};
}

Field Int(const char* sec, const char* key, int* p) {
  return {sec, key, [p] { return std::to_string(*p); },
          [p, key](const std::string& v) { *p = static_cast<int>(ToInt(key, v)); }};
}

Field Seed(const char* sec, const char* key, std::uint64_t* p) {
  return {sec, key, [p] { return std::to_string(*p); },
          [p, key](const std::string& v) {
            const long long i = ToInt(key, v);
            if (i < 0) BadValue(key, v, "a non-negative integer");
            *p = static_cast<std::uint64_t>(i);
          }};
}

Field Bool(const char* sec, const char* key, bool* p) {
  return {sec, key, [p] { return std::string(*p ? "true" : "false"); },
          [p, key](const std::string& v) { *p = ToBool(key, v); }};
}

Field Text(const char* sec, const char* key, std::string* p) {
  return {sec, key, [p] { return *p; }, [p](const std::string& v) { *p = v; }};
}

Field IntList(const char* sec, const char* key, std::vector<int>* p) {
  return {sec, key, [p] { return FromIntList(*p); },
          [p, key](const std::string& v) { *p = ToIntList(key, v); }};
}

std::vector<Field> Fields(RunConfig& c) {
  std::vector<Field> f;
  f.push_back({"env", "kind",
               [&c] { return std::string(c.env == EnvKind::kSwarm ? "swarm" : "repositioning"); },
               [&c](const std::string& v) {
                 if (v == "swarm") c.env = EnvKind::kSwarm;
                 else if (v == "repositioning") c.env = EnvKind::kRepositioning;
                 else BadValue("kind", v, "swarm or repositioning");
               }});
  f.push_back(Int("env", "bins", &c.bins));
  f.push_back(Int("env", "steps", &c.steps));
  f.push_back(Double("env", "action_bound", &c.action_bound));
  f.push_back({"env", "reward",
               [&c] { return std::string(c.reward == SwarmVariant::kSafe ? "safe" : "penalized"); },
               [&c](const std::string& v) {
                 if (v == "safe") c.reward = SwarmVariant::kSafe;
                 else if (v == "penalized") c.reward = SwarmVariant::kPenalized;
                 else BadValue("reward", v, "safe or penalized");
               }});
  f.push_back(Double("env", "noise_std", &c.noise_std));
  f.push_back(Seed("env", "demand_seed", &c.demand_seed));
  f.push_back(Double("env", "od_length_scale", &c.od_length_scale));
  f.push_back(Double("env", "attractor_weight", &c.attractor_weight));
  f.push_back(Text("env", "demand_file", &c.demand_file));
  f.push_back(Text("env", "od_file", &c.od_file));

  f.push_back({"safety", "kind",
               [&c] {
                 switch (c.constraint) {
                   case ConstraintKind::kNone: return std::string("none");
                   case ConstraintKind::kEntropy: return std::string("entropy");
                   case ConstraintKind::kSimilarity: return std::string("similarity");
                 }
                 return std::string("none");
               },
               [&c](const std::string& v) {
                 if (v == "none") c.constraint = ConstraintKind::kNone;
                 else if (v == "entropy") c.constraint = ConstraintKind::kEntropy;
                 else if (v == "similarity") c.constraint = ConstraintKind::kSimilarity;
                 else BadValue("kind", v, "none, entropy or similarity");
               }});
  f.push_back(Double("safety", "proportion", &c.proportion));
  f.push_back(Double("safety", "threshold", &c.threshold));
  f.push_back(Bool("safety", "differential", &c.differential));
  f.push_back(Double("safety", "epsilon", &c.epsilon));
  f.push_back(Double("safety", "L_f", &c.lipschitz.L_f));
  f.push_back(Double("safety", "L_pi", &c.lipschitz.L_pi));
  f.push_back(Double("safety", "L_sigma", &c.lipschitz.L_sigma));
  f.push_back(Double("safety", "L_h", &c.lipschitz.L_h));
  f.push_back(Double("safety", "delta", &c.lipschitz.delta));
  f.push_back(Double("safety", "lambda", &c.lambda));
  f.push_back(Double("safety", "delta_ext", &c.delta_ext));
  f.push_back(Int("safety", "gap_pairs", &c.gap_pairs));

  f.push_back(Int("ensemble", "members", &c.ensemble.members));
  f.push_back(IntList("ensemble", "hidden", &c.ensemble.hidden));
  f.push_back(Double("ensemble", "beta", &c.ensemble.beta));
  f.push_back(Double("ensemble", "learning_rate", &c.ensemble.learning_rate));
  f.push_back(Double("ensemble", "weight_decay", &c.ensemble.weight_decay));
  f.push_back(Int("ensemble", "max_epochs", &c.ensemble.max_epochs));
  f.push_back(Int("ensemble", "patience", &c.ensemble.patience));
  f.push_back(Double("ensemble", "min_improvement", &c.ensemble.min_improvement));
  f.push_back(Int("ensemble", "min_batch", &c.ensemble.min_batch));
  f.push_back(Int("ensemble", "max_batch", &c.ensemble.max_batch));
  f.push_back(Double("ensemble", "validation_fraction", &c.ensemble.validation_fraction));
  f.push_back(Int("ensemble", "buffer_episodes", &c.buffer_episodes));

  f.push_back(IntList("optimizer", "hidden", &c.policy_hidden));
  f.push_back(Double("optimizer", "learning_rate", &c.optimizer.learning_rate));
  f.push_back(Double("optimizer", "weight_decay", &c.optimizer.weight_decay));
  f.push_back(Int("optimizer", "max_epochs", &c.optimizer.max_epochs));
  f.push_back(Int("optimizer", "patience", &c.optimizer.patience));
  f.push_back(Double("optimizer", "min_improvement", &c.optimizer.min_improvement));
  f.push_back(Double("optimizer", "clip_norm", &c.optimizer.clip_norm));
  f.push_back(Bool("optimizer", "warm_start", &c.warm_start));

  f.push_back(Int("protocol", "episodes", &c.episodes));
  f.push_back(Int("protocol", "agents", &c.agents));
  f.push_back(Seed("protocol", "seed", &c.seed));
  f.push_back(Int("protocol", "scan_actions", &c.scan_actions));
  f.push_back(Bool("protocol", "log_distributions", &c.log_distributions));
  return f;
}

// values that live in two places are kept in sync here
void Sync(RunConfig& c) {
  c.lipschitz.beta = c.ensemble.beta;
  c.optimizer.barrier.lambda = c.lambda;
  c.optimizer.barrier.delta_ext = c.delta_ext;
}

void Validate(const RunConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::kConfig, what);
  };
  require(c.bins > 0, "bins must be positive");
  require(c.steps > 0, "steps must be positive");
  require(c.action_bound > 0.0, "action_bound must be positive");
  require(c.noise_std >= 0.0, "noise_std must be non-negative");
  require(c.lambda > 0.0, "lambda must be positive");
  require(c.delta_ext > 0.0, "delta_ext must be positive");
  require(c.lipschitz.L_f >= 0.0 && c.lipschitz.L_pi >= 0.0 &&
              c.lipschitz.L_sigma >= 0.0 && c.lipschitz.L_h >= 0.0,
          "Lipschitz constants must be non-negative");
  require(c.ensemble.members >= 1, "members must be positive");
  require(c.ensemble.beta >= 0.0, "beta must be non-negative");
  require(c.buffer_episodes >= 1, "buffer_episodes must be positive");
  require(c.episodes >= 0, "episodes must be non-negative");
  require(c.agents >= 1, "agents must be positive");
  require(c.scan_actions >= 1, "scan_actions must be positive");
  require(c.optimizer.learning_rate > 0.0 && c.ensemble.learning_rate > 0.0,
          "learning rates must be positive");
}

}  // namespace

RunConfig RunConfig::Swarm() {
  RunConfig c;
  c.env = EnvKind::kSwarm;
  c.bins = 100;
  c.steps = 100;
  c.action_bound = 7.0;
  c.reward = SwarmVariant::kSafe;
  c.constraint = ConstraintKind::kEntropy;
  c.proportion = 0.95;
  c.lipschitz = {1.0 + c.action_bound / c.steps, c.action_bound, 1.0, 1e-4, 1.0, 0.05};
  c.lambda = 15.0;
  c.ensemble.learning_rate = 5e-3;
  c.ensemble.weight_decay = 5e-4;
  c.ensemble.patience = 30;
  c.ensemble.max_batch = 512;
  c.buffer_episodes = 100;
  c.policy_hidden = {16, 16};
  c.optimizer.learning_rate = 5e-3;
  c.optimizer.weight_decay = 5e-4;
  c.optimizer.max_epochs = 50000;
  c.optimizer.patience = 100;
  c.episodes = 200;
  c.agents = 1;
  Sync(c);
  return c;
}

RunConfig RunConfig::Repositioning() {
  RunConfig c;
  c.env = EnvKind::kRepositioning;
  c.bins = 25;
  c.steps = 12;
  c.action_bound = 1.0;
  c.noise_std = 0.0175;
  c.constraint = ConstraintKind::kEntropy;
  c.proportion = 0.85;
  c.lipschitz = {1.0, c.action_bound, 1.0, 0.1, 1.0, 0.05};
  c.lambda = 1.0;
  c.ensemble.learning_rate = 1e-4;
  c.ensemble.weight_decay = 5e-4;
  c.ensemble.patience = 100;
  c.ensemble.max_batch = 128;
  c.buffer_episodes = 100;
  c.policy_hidden = {256, 256};
  c.optimizer.learning_rate = 1e-4;
  c.optimizer.weight_decay = 5e-4;
  c.optimizer.max_epochs = 20000;
  c.optimizer.patience = 500;
  c.episodes = 200;
  c.agents = 1;
  Sync(c);
  return c;
}

RunConfig RunConfig::Parse(std::istream& in) {
  std::vector<std::tuple<std::string, std::string, std::string, int>> entries;
  std::string line, section;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = Trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw Error(ErrorCode::kConfig, "line " + std::to_string(number) +
                                            ": unterminated section header");
      }
      section = Trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || section.empty()) {
      throw Error(ErrorCode::kConfig, "line " + std::to_string(number) +
                                          ": expected key = value inside a section");
    }
    entries.emplace_back(section, Trim(line.substr(0, eq)), Trim(line.substr(eq + 1)),
                         number);
  }
  RunConfig c = Swarm();
  for (const auto& [sec, key, value, n] : entries) {
    if (sec == "env" && key == "kind") {
      if (value == "repositioning") c = Repositioning();
      else if (value != "swarm") BadValue("kind", value, "swarm or repositioning");
    }
  }
  for (const auto& [sec, key, value, n] : entries) c.Set(sec, key, value);
  return c;
}

RunConfig RunConfig::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config '" + path + "'");
  return Parse(in);
}

void RunConfig::Set(const std::string& section, const std::string& key,
                    const std::string& value) {
  for (Field& f : Fields(*this)) {
    if (section == f.section && key == f.key) {
      f.set(value);
      Sync(*this);
      Validate(*this);
      return;
    }
  }
  throw Error(ErrorCode::kConfig, "unknown key '" + section + "." + key + "'");
}

void RunConfig::Set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw Error(ErrorCode::kConfig, "override '" + assignment + "' lacks '='");
  }
  std::string key = Trim(assignment.substr(0, eq));
  const std::string value = Trim(assignment.substr(eq + 1));
  const auto dot = key.find('.');
  if (dot != std::string::npos) {
    Set(key.substr(0, dot), key.substr(dot + 1), value);
    return;
  }
  std::string found;
  for (const Field& f : Fields(*this)) {
    if (key != f.key) continue;
    if (!found.empty()) {
      throw Error(ErrorCode::kConfig, "key '" + key + "' is ambiguous; use " +
                                          found + "." + key + " or " +
                                          f.section + "." + key);
    }
    found = f.section;
  }
  if (found.empty()) throw Error(ErrorCode::kConfig, "unknown key '" + key + "'");
  Set(found, key, value);
}

void RunConfig::Write(std::ostream& out) const {
  RunConfig copy = *this;
  std::string section;
  for (const Field& f : Fields(copy)) {
    if (section != f.section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << f.get() << '\n';
  }
}

std::string RunConfig::ToString() const {
  std::ostringstream os;
  Write(os);
  return os.str();
}

double RunConfig::Threshold() const {
  if (threshold >= 0.0) return threshold;
  return proportion * std::log(static_cast<double>(NumCells()));
}

}  // namespace meadow

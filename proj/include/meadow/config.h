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

#ifndef MEADOW_CONFIG_H_
#define MEADOW_CONFIG_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "meadow/ensemble.h"
#include "meadow/environment.h"
#include "meadow/planner.h"
#include "meadow/safety.h"

namespace meadow {

enum class EnvKind { kSwarm, kRepositioning };

// Every run parameter. Text form: sections [env] [safety] [ensemble]
// [optimizer] [protocol] holding `key = value` lines; '#' starts a comment.
struct RunConfig {
  // [env]
  EnvKind env = EnvKind::kSwarm;
  int bins = 100;
  int steps = 100;
  double action_bound = 7.0;
  SwarmVariant reward = SwarmVariant::kSafe;
  double noise_std = 0.0175;  // repositioning only; the swarm uses sqrt(dt)
  std::uint64_t demand_seed = 7;
  double od_length_scale = 0.15;
  double attractor_weight = 0.3;
  std::string demand_file;
  std::string od_file;

  // [safety]
  ConstraintKind constraint = ConstraintKind::kEntropy;
  // threshold = proportion * log(#cells) unless threshold is set
  double proportion = 0.95;
  double threshold = -1.0;
  bool differential = false;
  double epsilon = 1e-6;
  LipschitzBundle lipschitz;
  double lambda = 15.0;
  double delta_ext = 1e-3;
  int gap_pairs = 200;

  // [ensemble]
  EnsembleConfig ensemble;
  int buffer_episodes = 100;

  // [optimizer]
  std::vector<int> policy_hidden = {16, 16};
  PolicyOptConfig optimizer;
  bool warm_start = true;

  // [protocol]
  int episodes = 200;
  int agents = 1;
  std::uint64_t seed = 0;
  int scan_actions = 21;
  bool log_distributions = true;

  // per-environment defaults
  static RunConfig Swarm();
  static RunConfig Repositioning();

  // parse text on top of the defaults selected by [env] kind
  static RunConfig Parse(std::istream& in);
  static RunConfig Load(const std::string& path);

  // "key=value" or "section.key=value"; bare keys must be unambiguous
  void Set(const std::string& assignment);
  void Set(const std::string& section, const std::string& key,
           const std::string& value);

  void Write(std::ostream& out) const;
  std::string ToString() const;

  // safety constraint for this configuration on its grid
  double Threshold() const;
  int NumCells() const { return env == EnvKind::kSwarm ? bins : bins * bins; }
};

}  // namespace meadow

#endif  // MEADOW_CONFIG_H_

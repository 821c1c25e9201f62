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

#ifndef MEADOW_PROTOCOL_H_
#define MEADOW_PROTOCOL_H_

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "meadow/config.h"
#include "meadow/ensemble.h"
#include "meadow/environment.h"
#include "meadow/planner.h"
#include "meadow/safety.h"

namespace meadow {

// Observed transitions grouped by episode; the oldest episode is dropped
// once `capacity` episodes are held.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity) : capacity_(capacity) {}

  void Add(int episode, TransitionData data);
  TransitionData All() const;
  Eigen::Index size() const;
  int episodes() const { return static_cast<int>(entries_.size()); }
  std::vector<int> EpisodeIndices() const;

 private:
  int capacity_;
  std::deque<std::pair<int, TransitionData>> entries_;
};

// environment, constraint and safe initial distribution of a run
struct World {
  std::unique_ptr<Environment> env;
  SafetySpec spec;
  GridDistribution mu0;
};
World MakeWorld(const RunConfig& config);

struct Execution {
  TransitionData data;                 // R T samples
  TransitionData center_points;        // (z, f(z)) at the cell centers
  std::vector<Eigen::VectorXd> masses; // true mean field, T + 1 snapshots
  std::vector<Eigen::VectorXd> empirical;  // agent histograms, T + 1
};

// R representative agents in the true environment alongside the exact
// mean-field propagation under the true transitions
Execution ExecutePolicy(const Environment& env, const PolicyProfile& policy,
                        int agents, std::uint64_t seed,
                        const Eigen::VectorXd& mu0);

// true-system objective of a policy: rollout under the true transitions with
// zero margins
Rollout EvaluatePolicy(const Environment& env, const PolicyProfile& policy,
                       const SafetySpec& spec, const BarrierConfig& barrier,
                       const Eigen::VectorXd& mu0);

struct FiniteRegimeResult {
  double objective = 0.0;
  std::vector<Eigen::VectorXd> empirical;  // T + 1 histograms
  std::vector<double> h_values;            // constraint at steps 1..T
};

// m agents; the mean field is replaced by their histogram at every step
FiniteRegimeResult FiniteRegimeEval(const Environment& env,
                                    const PolicyProfile& policy,
                                    const SafetySpec& spec,
                                    const BarrierConfig& barrier, int agents,
                                    std::uint64_t seed,
                                    const Eigen::VectorXd& mu0);

struct EpisodeLog {
  int episode = 0;
  std::vector<Eigen::VectorXd> true_masses;          // T + 1
  std::vector<Eigen::VectorXd> hallucinated_masses;  // T + 1
  std::vector<double> rewards;   // T, true system
  std::vector<double> h_values;  // T + 1, true system
  std::vector<double> margins;   // T + 1, zero at t = 0
  std::vector<double> slacks;    // T + 1, pessimistic slack of mu~
  std::vector<double> w1;        // T + 1, W1(mu~_t, mu_t)
  double objective = 0.0;        // true-system objective
  double planned_objective = 0.0;
  double max_sigma = 0.0;
  double coverage = 1.0;
  bool feasible = true;
  int policy_epochs = 0;
  Eigen::Index buffer_size = 0;
  double wall_seconds = 0.0;
};

struct RunResult {
  std::vector<EpisodeLog> episodes;
  PolicyProfile policy;
  Ensemble ensemble;
  std::vector<TrainingLogRow> last_training_log;
};

struct RunOptions {
  std::string out_dir;  // empty: no files
  int jobs = 1;
  std::function<void(const EpisodeLog&)> on_episode;
};

// Episodic loop: margins from the epistemic scan, policy optimization on the
// hallucinated model, execution in the true system, ensemble refit.
RunResult RunProtocol(const RunConfig& config, const RunOptions& options = {});

struct PlanResult {
  PolicyProfile policy;
  Rollout rollout;  // true-system evaluation
  std::vector<TrainingLogRow> log;
};

// known transitions: M = f, sigma = 0, zero margins
PlanResult PlanKnown(const RunConfig& config, const std::string& out_dir = "");

// derived seed for an independent stream
std::uint64_t StreamSeed(std::uint64_t master, std::uint64_t stream,
                         std::uint64_t index);

// master seed with the MEADOW_SEED environment override applied
std::uint64_t MasterSeed(const RunConfig& config);

}  // namespace meadow

#endif  // MEADOW_PROTOCOL_H_

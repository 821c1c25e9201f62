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

#ifndef MEADOW_PLANNER_H_
#define MEADOW_PLANNER_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "meadow/dense_net.h"
#include "meadow/dynamics.h"
#include "meadow/ensemble.h"
#include "meadow/environment.h"
#include "meadow/safety.h"

namespace meadow {

// One network for the whole profile: input (s, mu, t / T), outputs the
// action (tanh scaled to the bounds) and the hallucination control eta
// (tanh).
class PolicyProfile {
 public:
  PolicyProfile() = default;
  PolicyProfile(int state_dim, int num_cells, int steps, double action_bound,
                std::vector<int> hidden, std::uint64_t seed);

  int state_dim() const { return state_dim_; }
  int steps() const { return steps_; }
  double action_bound() const { return action_bound_; }
  DenseNet& net() { return net_; }
  const DenseNet& net() const { return net_; }

  Control Evaluate(const DenseNet::Bound& bound, ad::Var states, ad::Var mass,
                   int t) const;
  // controller over the current parameters (constants on the tape)
  Controller AsController() const;
  // controller reading parameters from bound tape nodes
  Controller AsController(const DenseNet::Bound& bound) const;

  // plain evaluation: actions (and eta) for rows of states
  Eigen::MatrixXd Act(const Eigen::Ref<const Eigen::MatrixXd>& states,
                      const Eigen::Ref<const Eigen::VectorXd>& mass, int t,
                      Eigen::MatrixXd* eta = nullptr) const;

  void Save(std::ostream& out) const;
  static PolicyProfile Load(std::istream& in);

 private:
  Eigen::MatrixXd NetInput(const Eigen::Ref<const Eigen::MatrixXd>& states,
                           const Eigen::Ref<const Eigen::VectorXd>& mass,
                           int t) const;

  DenseNet net_;
  int state_dim_ = 1;
  int num_cells_ = 1;
  int steps_ = 1;
  double action_bound_ = 1.0;
};

// f~(z) = M(z) + beta sigma(z) * eta(z)
class HallucinatedModel : public TransitionModel {
 public:
  HallucinatedModel(const Ensemble& ensemble, double beta)
      : ensemble_(ensemble), beta_(beta) {}
  ad::Var Mean(ad::Var states, ad::Var mass, ad::Var actions,
               ad::Var eta) const override;

 private:
  const Ensemble& ensemble_;
  double beta_;
};

struct BarrierConfig {
  double lambda = 1.0;
  double delta_ext = 1e-3;
};

struct Rollout {
  ad::Var objective;
  double objective_value = 0.0;         // survives the tape
  std::vector<Eigen::VectorXd> masses;  // T + 1 snapshots
  std::vector<double> rewards;          // T
  std::vector<double> h_values;         // h_C(mu_{t+1}), T
  std::vector<double> slacks;           // pessimistic slack at t + 1, T
  double min_slack = 0.0;
};

// Objective sum_t r(mu_t, pi_t) + barrier(slack(mu_{t+1}, C_{t+1})) through
// T applications of the mean-field operator. margins has T entries.
Rollout DifferentiableRollout(ad::Tape& tape, const Environment& env,
                              const TransitionModel& model,
                              const Controller& controller,
                              const SafetySpec& spec,
                              const std::vector<double>& margins,
                              const LipschitzBundle& bundle,
                              const BarrierConfig& barrier,
                              const Eigen::VectorXd& mu0);

struct PolicyOptConfig {
  double learning_rate = 5e-3;
  double weight_decay = 5e-4;
  int max_epochs = 50000;
  int patience = 100;
  double min_improvement = 0.005;
  double clip_norm = 1.0;
  BarrierConfig barrier;
};

struct TrainingLogRow {
  int epoch;
  double objective;
  double min_slack;
  double grad_norm;
  double clipped;
};

struct PolicyOptResult {
  PolicyProfile policy;
  double objective = 0.0;
  double min_slack = 0.0;
  bool feasible = false;
  std::vector<TrainingLogRow> log;
};

// Gradient ascent on the rollout objective (MF-BPTT). Returns the best
// iterate with positive slack at every step, or the iterate with the
// largest minimum slack if none was feasible.
PolicyOptResult OptimizePolicy(PolicyProfile policy, const Environment& env,
                               const TransitionModel& model,
                               const SafetySpec& spec,
                               const std::vector<double>& margins,
                               const LipschitzBundle& bundle,
                               const PolicyOptConfig& config,
                               const Eigen::VectorXd& mu0);

void WriteTrainingLog(std::ostream& out, const std::vector<TrainingLogRow>& log);

}  // namespace meadow

#endif  // MEADOW_PLANNER_H_

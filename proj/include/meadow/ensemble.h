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

#ifndef MEADOW_ENSEMBLE_H_
#define MEADOW_ENSEMBLE_H_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "meadow/autodiff.h"
#include "meadow/dense_net.h"

namespace meadow {

struct EnsembleConfig {
  int members = 10;
  std::vector<int> hidden = {16, 16};
  double beta = 1.0;
  double learning_rate = 5e-3;
  double weight_decay = 5e-4;
  int max_epochs = 10000;
  // stop when validation NLL has not improved by min_improvement (relative)
  // within this many epochs
  int patience = 30;
  double min_improvement = 0.005;
  int min_batch = 8;
  int max_batch = 512;
  double validation_fraction = 0.1;
};

// Transition samples: row i of inputs is z = (s, mu, a), row i of targets
// is the observed next state.
struct TransitionData {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd targets;
  Eigen::Index size() const { return inputs.rows(); }
};

struct EnsemblePrediction {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd epistemic_std;
  Eigen::MatrixXd aleatoric_var;
};

struct TapedPrediction {
  ad::Var mean;
  ad::Var epistemic_std;
};

struct FitReport {
  std::vector<double> validation_nll;
  std::vector<int> epochs;
};

// Finite evaluation set for the max epistemic scan: every row of
// state_actions (s, a) paired with every mass candidate.
struct ScanPlan {
  Eigen::MatrixXd state_actions;
  std::vector<Eigen::VectorXd> masses;
};

// per-sample sum over coordinates of 0.5 log(2 pi v) + (y - m)^2 / (2 v)
double GaussianNll(const Eigen::Ref<const Eigen::MatrixXd>& mean,
                   const Eigen::Ref<const Eigen::MatrixXd>& var,
                   const Eigen::Ref<const Eigen::MatrixXd>& targets);

class Ensemble {
 public:
  Ensemble() = default;
  Ensemble(int state_dim, int num_cells, EnsembleConfig config,
           std::uint64_t seed);
  // assembles an ensemble from trained members
  Ensemble(std::vector<DenseNet> members, int state_dim, double beta);

  int size() const { return static_cast<int>(members_.size()); }
  int state_dim() const { return state_dim_; }
  int input_dim() const { return members_.front().input_size(); }
  double beta() const { return beta_; }
  const EnsembleConfig& config() const { return config_; }
  std::vector<DenseNet>& members() { return members_; }
  const std::vector<DenseNet>& members() const { return members_; }

  // rows (s, mu, a) from per-row states and actions and a shared mass
  static Eigen::MatrixXd Inputs(const Eigen::Ref<const Eigen::MatrixXd>& states,
                                const Eigen::Ref<const Eigen::VectorXd>& mass,
                                const Eigen::Ref<const Eigen::MatrixXd>& actions);
  static ad::Var Inputs(ad::Var states, ad::Var mass, ad::Var actions);

  // mean and variance of one member
  void MemberForward(int k, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                     Eigen::MatrixXd* mean, Eigen::MatrixXd* var) const;

  EnsemblePrediction Predict(const Eigen::Ref<const Eigen::MatrixXd>& inputs) const;
  // differentiable in the inputs; member parameters are constants
  TapedPrediction Predict(ad::Var inputs) const;

  double Nll(int k, const TransitionData& data) const;

  // trains every member from its current parameters; members are
  // independent and are spread over up to `jobs` threads
  FitReport Fit(const TransitionData& data, std::uint64_t seed, int jobs = 1);

  // directory checkpoint: manifest plus one network file per member
  void Save(const std::string& dir) const;
  static Ensemble Load(const std::string& dir);

 private:
  void RequireMembers() const;
  void FitMember(int k, const TransitionData& data, std::uint64_t seed,
                 double* best_nll, int* epochs);

  EnsembleConfig config_;
  std::vector<DenseNet> members_;
  int state_dim_ = 0;
  double beta_ = 1.0;
};

// fraction of coordinates with |f - M| <= beta sigma
double CalibrationCoverage(const Ensemble& ens,
                           const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                           const Eigen::Ref<const Eigen::MatrixXd>& true_means,
                           double beta);

// max over the scan set of the 2-norm of the epistemic std
double MaxEpistemicNorm(const Ensemble& ens, const ScanPlan& plan);

}  // namespace meadow

#endif  // MEADOW_ENSEMBLE_H_

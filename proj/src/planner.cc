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

#include "meadow/planner.h"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "meadow/optim.h"

namespace meadow {

PolicyProfile::PolicyProfile(int state_dim, int num_cells, int steps,
                             double action_bound, std::vector<int> hidden,
                             std::uint64_t seed)
    : state_dim_(state_dim),
      num_cells_(num_cells),
      steps_(steps),
      action_bound_(action_bound) {
  std::vector<int> sizes = {state_dim + num_cells + 1};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(2 * state_dim);
  net_ = DenseNet(sizes, {{state_dim, Activation::kTanh},
                          {state_dim, Activation::kTanh}});
  net_.InitXavier(seed);
}

Control PolicyProfile::Evaluate(const DenseNet::Bound& bound, ad::Var states,
                                ad::Var mass, int t) const {
  ad::Tape& tape = *states.tape();
  const Eigen::Index n = states.rows();
  ad::Var time = tape.Constant(
      Eigen::MatrixXd::Constant(n, 1, static_cast<double>(t) / steps_));
  ad::Var x = ad::HConcat(
      {states, ad::BroadcastRows(ad::Transpose(mass), n), time});
  ad::Var out = net_.Forward(bound, x);
  return {action_bound_ * ad::Cols(out, 0, state_dim_),
          ad::Cols(out, state_dim_, state_dim_)};
}

Controller PolicyProfile::AsController() const {
  return [this](ad::Var states, ad::Var mass, int t) {
    return Evaluate(net_.Bind(*states.tape(), false), states, mass, t);
  };
}

Controller PolicyProfile::AsController(const DenseNet::Bound& bound) const {
  return [this, bound](ad::Var states, ad::Var mass, int t) {
    return Evaluate(bound, states, mass, t);
  };
}

Eigen::MatrixXd PolicyProfile::NetInput(
    const Eigen::Ref<const Eigen::MatrixXd>& states,
    const Eigen::Ref<const Eigen::VectorXd>& mass, int t) const {
  const Eigen::Index n = states.rows();
  Eigen::MatrixXd x(n, state_dim_ + mass.size() + 1);
  x.leftCols(state_dim_) = states;
  x.middleCols(state_dim_, mass.size()) = mass.transpose().replicate(n, 1);
  x.col(x.cols() - 1).setConstant(static_cast<double>(t) / steps_);
  return x;
}

Eigen::MatrixXd PolicyProfile::Act(const Eigen::Ref<const Eigen::MatrixXd>& states,
                                   const Eigen::Ref<const Eigen::VectorXd>& mass,
                                   int t, Eigen::MatrixXd* eta) const {
  const Eigen::MatrixXd out = net_.Forward(NetInput(states, mass, t));
  if (eta) *eta = out.rightCols(state_dim_);
  return action_bound_ * out.leftCols(state_dim_);
}

void PolicyProfile::Save(std::ostream& out) const {
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "policy: state_dim=" << state_dim_ << " cells=" << num_cells_
      << " steps=" << steps_ << " action_bound=" << action_bound_ << '\n';
  net_.Save(out);
}

PolicyProfile PolicyProfile::Load(std::istream& in) {
  std::string line;
  PolicyProfile p;
  if (!std::getline(in, line) ||
      std::sscanf(line.c_str(), "policy: state_dim=%d cells=%d steps=%d action_bound=%lf",
                  &p.state_dim_, &p.num_cells_, &p.steps_, &p.action_bound_) != 4) {
    throw Error(ErrorCode::kIo, "policy checkpoint header is malformed");
  }
  p.net_ = DenseNet::Load(in);
  if (p.net_.input_size() != p.state_dim_ + p.num_cells_ + 1) {
    throw Error(ErrorCode::kShapeMismatch, "policy network does not match its header");
  }
  return p;
}

ad::Var HallucinatedModel::Mean(ad::Var states, ad::Var mass, ad::Var actions,
                                ad::Var eta) const {
  const TapedPrediction p =
      ensemble_.Predict(Ensemble::Inputs(states, mass, actions));
  if (!eta.valid()) return p.mean;
  return p.mean + beta_ * (p.epistemic_std * eta);
}

Rollout DifferentiableRollout(ad::Tape& tape, const Environment& env,
                              const TransitionModel& model,
                              const Controller& controller,
                              const SafetySpec& spec,
                              const std::vector<double>& margins,
                              const LipschitzBundle& bundle,
                              const BarrierConfig& barrier,
                              const Eigen::VectorXd& mu0) {
  const int T = env.steps();
  if (static_cast<int>(margins.size()) != T) {
    throw Error(ErrorCode::kShapeMismatch, "one margin per step is required");
  }
  const GridSpec& grid = env.grid();
  if (EvaluateConstraint(spec, mu0, grid) < 0.0) {
    throw Error(ErrorCode::kUnsafeInitialDistribution,
                "initial distribution violates the constraint");
  }
  Rollout r;
  r.min_slack = std::numeric_limits<double>::infinity();
  ad::Var mass = tape.Constant(mu0);
  r.masses.push_back(mu0);
  ad::Var objective = tape.Constant(Eigen::MatrixXd::Zero(1, 1));
  for (int t = 0; t < T; ++t) {
    StepTrace step = MeanFieldStep(env, model, controller, mass, t);
    ad::Var reward = env.ExpectedReward(mass, step.control.actions);
    r.rewards.push_back(reward.scalar());
    objective = objective + reward;
    mass = step.next;
    r.masses.push_back(mass.value().col(0));
    if (spec.kind == ConstraintKind::kNone) {
      r.h_values.push_back(std::numeric_limits<double>::infinity());
      r.slacks.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    ad::Var slack;
    if (spec.kind == ConstraintKind::kEntropy) {
      ad::Var h = EvaluateConstraint(spec, mass, grid);
      r.h_values.push_back(h.scalar());
      slack = h - bundle.L_h * margins[t];
    } else {
      const double h = EvaluateConstraint(spec, r.masses.back(), grid);
      r.h_values.push_back(h);
      slack = tape.Constant(Eigen::MatrixXd::Constant(
          1, 1, PessimisticSlack(h, bundle, margins[t])));
    }
    r.slacks.push_back(slack.scalar());
    r.min_slack = std::min(r.min_slack, slack.scalar());
    objective = objective + LogBarrier(slack, barrier.lambda, barrier.delta_ext);
  }
  r.objective = objective;
  r.objective_value = objective.scalar();
  return r;
}

PolicyOptResult OptimizePolicy(PolicyProfile policy, const Environment& env,
                               const TransitionModel& model,
                               const SafetySpec& spec,
                               const std::vector<double>& margins,
                               const LipschitzBundle& bundle,
                               const PolicyOptConfig& config,
                               const Eigen::VectorXd& mu0) {
  PolicyOptResult result;
  AdamW opt(policy.net().params().size(),
            {config.learning_rate, config.weight_decay, 0.9, 0.999, 1e-8});
  Eigen::VectorXd best_params = policy.net().params().values();
  double best_objective = -std::numeric_limits<double>::infinity();
  double best_slack = -std::numeric_limits<double>::infinity();
  bool best_feasible = false;
  double reference = -std::numeric_limits<double>::infinity();
  int since = 0;
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    ad::Tape tape;
    const DenseNet::Bound bound = policy.net().Bind(tape);
    Rollout r = DifferentiableRollout(tape, env, model, policy.AsController(bound),
                                      spec, margins, bundle, config.barrier, mu0);
    const double objective = r.objective.scalar();
    if (!std::isfinite(objective)) {
      throw Error(ErrorCode::kDivergedObjective,
                  "objective is not finite at epoch " + std::to_string(epoch));
    }
    const bool feasible = r.min_slack > 0.0;
    // huge margins can absorb every policy-dependent term of the slack; ties
    // then go to the later iterate
    const bool better = feasible ? (!best_feasible || objective > best_objective)
                                 : (!best_feasible &&
                                    (r.min_slack > best_slack ||
                                     (r.min_slack == best_slack &&
                                      objective >= best_objective)));
    if (better) {
      best_params = policy.net().params().values();
      best_objective = objective;
      best_slack = r.min_slack;
      best_feasible = feasible;
    }

    tape.Backward(r.objective);
    Eigen::VectorXd grad = -policy.net().GatherGradient(tape, bound);
    if (!grad.allFinite()) {
      throw Error(ErrorCode::kDivergedObjective, "policy gradient is not finite");
    }
    const double norm = ClipGlobalNorm(grad, config.clip_norm);
    result.log.push_back(
        {epoch, objective, r.min_slack, norm, std::min(norm, config.clip_norm)});
    opt.Step(policy.net().params(), grad);

    if (epoch == 0 || objective > reference + config.min_improvement * std::abs(reference)) {
      reference = objective;
      since = 0;
    } else if (++since >= config.patience) {
      break;
    }
  }
  policy.net().params().Assign(best_params);
  result.policy = std::move(policy);
  result.objective = best_objective;
  result.min_slack = best_slack;
  result.feasible = best_feasible;
  return result;
}

void WriteTrainingLog(std::ostream& out, const std::vector<TrainingLogRow>& log) {
  out << "epoch,objective,min_slack,grad_norm,clipped\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const TrainingLogRow& r : log) {
    out << r.epoch << ',' << r.objective << ',' << r.min_slack << ','
        << r.grad_norm << ',' << r.clipped << '\n';
  }
}

}  // namespace meadow

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

#include "meadow/ensemble.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "meadow/optim.h"

namespace meadow {
namespace {

// keeps the predicted variance away from zero
constexpr double kMinVariance = 1e-6;
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

std::uint64_t MemberSeed(std::uint64_t seed, int k) {
  // splitmix64 step
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(k + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Eigen::MatrixXd Rows(const Eigen::MatrixXd& m, const std::vector<int>& idx,
                     std::size_t begin, std::size_t end) {
  Eigen::MatrixXd out(end - begin, m.cols());
  for (std::size_t i = begin; i < end; ++i) out.row(i - begin) = m.row(idx[i]);
  return out;
}

}  // namespace

double GaussianNll(const Eigen::Ref<const Eigen::MatrixXd>& mean,
                   const Eigen::Ref<const Eigen::MatrixXd>& var,
                   const Eigen::Ref<const Eigen::MatrixXd>& targets) {
  const Eigen::ArrayXXd r = (targets - mean).array();
  return (0.5 * (kLog2Pi + var.array().log()) + r.square() / (2.0 * var.array()))
      .sum();
}

Ensemble::Ensemble(int state_dim, int num_cells, EnsembleConfig config,
                   std::uint64_t seed)
    : config_(std::move(config)), state_dim_(state_dim), beta_(config_.beta) {
  if (config_.members < 1) throw Error(ErrorCode::kConfig, "ensemble needs members");
  std::vector<int> sizes = {2 * state_dim + num_cells};
  sizes.insert(sizes.end(), config_.hidden.begin(), config_.hidden.end());
  sizes.push_back(2 * state_dim);
  for (int k = 0; k < config_.members; ++k) {
    DenseNet net(sizes, {{state_dim, Activation::kLinear},
                         {state_dim, Activation::kSoftplus}});
    net.InitXavier(MemberSeed(seed, k));
    members_.push_back(std::move(net));
  }
}

Ensemble::Ensemble(std::vector<DenseNet> members, int state_dim, double beta)
    : members_(std::move(members)), state_dim_(state_dim), beta_(beta) {
  config_.members = size();
  config_.beta = beta;
}

Eigen::MatrixXd Ensemble::Inputs(const Eigen::Ref<const Eigen::MatrixXd>& states,
                                 const Eigen::Ref<const Eigen::VectorXd>& mass,
                                 const Eigen::Ref<const Eigen::MatrixXd>& actions) {
  const Eigen::Index n = states.rows();
  Eigen::MatrixXd z(n, states.cols() + mass.size() + actions.cols());
  z.leftCols(states.cols()) = states;
  z.middleCols(states.cols(), mass.size()) = mass.transpose().replicate(n, 1);
  z.rightCols(actions.cols()) = actions;
  return z;
}

ad::Var Ensemble::Inputs(ad::Var states, ad::Var mass, ad::Var actions) {
  return ad::HConcat(
      {states, ad::BroadcastRows(ad::Transpose(mass), states.rows()), actions});
}

void Ensemble::RequireMembers() const {
  if (size() < 2) {
    throw Error(ErrorCode::kSingleMember,
                "epistemic spread needs at least two members");
  }
}

void Ensemble::MemberForward(int k, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                             Eigen::MatrixXd* mean, Eigen::MatrixXd* var) const {
  const Eigen::MatrixXd out = members_[k].Forward(inputs);
  *mean = out.leftCols(state_dim_);
  *var = out.rightCols(state_dim_).array() + kMinVariance;
}

EnsemblePrediction Ensemble::Predict(
    const Eigen::Ref<const Eigen::MatrixXd>& inputs) const {
  RequireMembers();
  const int K = size();
  std::vector<Eigen::MatrixXd> means(K);
  EnsemblePrediction p;
  p.mean = Eigen::MatrixXd::Zero(inputs.rows(), state_dim_);
  p.aleatoric_var = p.mean;
  for (int k = 0; k < K; ++k) {
    Eigen::MatrixXd v;
    MemberForward(k, inputs, &means[k], &v);
    p.mean += means[k];
    p.aleatoric_var += v;
  }
  p.mean /= K;
  p.aleatoric_var /= K;
  Eigen::MatrixXd spread = Eigen::MatrixXd::Zero(inputs.rows(), state_dim_);
  for (int k = 0; k < K; ++k) spread += (means[k] - p.mean).cwiseAbs2();
  p.epistemic_std = (spread / (K - 1)).cwiseSqrt();
  return p;
}

TapedPrediction Ensemble::Predict(ad::Var inputs) const {
  RequireMembers();
  ad::Tape& tape = *inputs.tape();
  const int K = size();
  std::vector<ad::Var> means;
  for (int k = 0; k < K; ++k) {
    const DenseNet::Bound b = members_[k].Bind(tape, false);
    means.push_back(ad::Cols(members_[k].Forward(b, inputs), 0, state_dim_));
  }
  ad::Var total = means[0];
  for (int k = 1; k < K; ++k) total = total + means[k];
  ad::Var mean = (1.0 / K) * total;
  ad::Var spread = ad::Square(means[0] - mean);
  for (int k = 1; k < K; ++k) spread = spread + ad::Square(means[k] - mean);
  return {mean, ad::Sqrt((1.0 / (K - 1)) * spread)};
}

double Ensemble::Nll(int k, const TransitionData& data) const {
  Eigen::MatrixXd m, v;
  MemberForward(k, data.inputs, &m, &v);
  return GaussianNll(m, v, data.targets);
}

FitReport Ensemble::Fit(const TransitionData& data, std::uint64_t seed,
                        int jobs) {
  if (data.size() == 0) throw Error(ErrorCode::kEmptyBuffer, "no transitions to fit");
  FitReport report;
  report.validation_nll.assign(size(), 0.0);
  report.epochs.assign(size(), 0);
  jobs = std::max(1, std::min(jobs, size()));
  if (jobs == 1) {
    for (int k = 0; k < size(); ++k) {
      FitMember(k, data, seed, &report.validation_nll[k], &report.epochs[k]);
    }
    return report;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> workers;
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (int k = next++; k < size(); k = next++) {
          FitMember(k, data, seed, &report.validation_nll[k], &report.epochs[k]);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (std::thread& t : workers) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return report;
}

void Ensemble::FitMember(int k, const TransitionData& data, std::uint64_t seed,
                         double* best_nll, int* epochs) {
  const Eigen::Index n = data.size();
  const int d = state_dim_;
  DenseNet& net = members_[k];
  std::mt19937_64 rng(MemberSeed(seed, k));
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);

  std::vector<int> train, val;
  const bool early_stopping = n >= 10;
  if (early_stopping) {
    const Eigen::Index n_val = std::max<Eigen::Index>(
        1, static_cast<Eigen::Index>(std::lround(config_.validation_fraction * n)));
    val.assign(idx.begin(), idx.begin() + n_val);
    train.assign(idx.begin() + n_val, idx.end());
  } else {
    train = idx;
    val.assign(idx.begin(), idx.begin() + 1);
  }
  const TransitionData val_data{Rows(data.inputs, val, 0, val.size()),
                                Rows(data.targets, val, 0, val.size())};
  int batch = config_.min_batch;
  while (batch < config_.max_batch && batch * 10 < static_cast<int>(train.size())) {
    batch *= 2;
  }
  batch = std::min(batch, config_.max_batch);

  AdamW opt(net.params().size(),
            {config_.learning_rate, config_.weight_decay, 0.9, 0.999, 1e-8});
  double best = Nll(k, val_data) / val.size();
  double reference = best;
  Eigen::VectorXd best_params = net.params().values();
  int since = 0, epoch = 0;
  for (; epoch < config_.max_epochs; ++epoch) {
    std::shuffle(train.begin(), train.end(), rng);
    for (std::size_t b = 0; b < train.size(); b += batch) {
      const std::size_t e = std::min(train.size(), b + batch);
      const double count = static_cast<double>(e - b);
      ad::Tape tape;
      const DenseNet::Bound bound = net.Bind(tape);
      ad::Var x = tape.Constant(Rows(data.inputs, train, b, e));
      ad::Var y = tape.Constant(Rows(data.targets, train, b, e));
      ad::Var out = net.Forward(bound, x);
      ad::Var m = ad::Cols(out, 0, d);
      ad::Var v = ad::Cols(out, d, d) + kMinVariance;
      ad::Var loss = ad::Sum(0.5 * ad::Log(v) + ad::Square(y - m) / (2.0 * v));
      tape.Backward(loss, Eigen::MatrixXd::Constant(1, 1, 1.0 / count));
      opt.Step(net.params(), net.GatherGradient(tape, bound));
    }
    const double nll = Nll(k, val_data) / val.size();
    if (nll < best) {
      best = nll;
      best_params = net.params().values();
    }
    if (!early_stopping) continue;
    if (nll < reference - config_.min_improvement * std::abs(reference)) {
      reference = nll;
      since = 0;
    } else if (++since >= config_.patience) {
      ++epoch;
      break;
    }
  }
  net.params().Assign(best_params);
  *best_nll = best;
  *epochs = epoch;
}

void Ensemble::Save(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(std::filesystem::path(dir) / "manifest.txt");
  manifest << "ensemble: K=" << size() << " beta=" << beta_ << '\n';
  manifest << "state_dim: " << state_dim_ << '\n';
  for (int k = 0; k < size(); ++k) {
    std::ofstream out(std::filesystem::path(dir) /
                      ("member_" + std::to_string(k) + ".ckpt"));
    members_[k].Save(out);
    if (!out) throw Error(ErrorCode::kIo, "cannot write ensemble member");
  }
  if (!manifest) throw Error(ErrorCode::kIo, "cannot write ensemble manifest");
}

Ensemble Ensemble::Load(const std::string& dir) {
  std::ifstream manifest(std::filesystem::path(dir) / "manifest.txt");
  std::string line;
  int K = 0, d = 0;
  double beta = 1.0;
  if (!std::getline(manifest, line) ||
      std::sscanf(line.c_str(), "ensemble: K=%d beta=%lf", &K, &beta) != 2) {
    throw Error(ErrorCode::kIo, "bad ensemble manifest in " + dir);
  }
  if (!std::getline(manifest, line) ||
      std::sscanf(line.c_str(), "state_dim: %d", &d) != 1) {
    throw Error(ErrorCode::kIo, "manifest lacks state_dim");
  }
  std::vector<DenseNet> members;
  for (int k = 0; k < K; ++k) {
    std::ifstream in(std::filesystem::path(dir) /
                     ("member_" + std::to_string(k) + ".ckpt"));
    if (!in) throw Error(ErrorCode::kIo, "missing ensemble member " + std::to_string(k));
    members.push_back(DenseNet::Load(in));
  }
  return Ensemble(std::move(members), d, beta);
}

double CalibrationCoverage(const Ensemble& ens,
                           const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                           const Eigen::Ref<const Eigen::MatrixXd>& true_means,
                           double beta) {
  const EnsemblePrediction p = ens.Predict(inputs);
  const Eigen::ArrayXXd err = (true_means - p.mean).array().abs();
  const Eigen::Index inside = (err <= beta * p.epistemic_std.array()).count();
  return static_cast<double>(inside) / static_cast<double>(err.size());
}

double MaxEpistemicNorm(const Ensemble& ens, const ScanPlan& plan) {
  if (plan.state_actions.rows() == 0 || plan.masses.empty()) {
    throw Error(ErrorCode::kEmptyScanPlan, "scan plan has no points");
  }
  const int d = ens.state_dim();
  const Eigen::MatrixXd states = plan.state_actions.leftCols(d);
  const Eigen::MatrixXd actions = plan.state_actions.rightCols(d);
  double best = 0.0;
  for (const Eigen::VectorXd& mass : plan.masses) {
    const EnsemblePrediction p = ens.Predict(Ensemble::Inputs(states, mass, actions));
    best = std::max(best, p.epistemic_std.rowwise().norm().maxCoeff());
  }
  return best;
}

}  // namespace meadow

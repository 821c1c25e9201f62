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

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "gradcheck.h"
#include "meadow/ensemble.h"
#include "meadow/errors.h"

using namespace meadow;

namespace {

// single affine layer with zero weights: constant mean and raw variance
DenseNet ConstantMember(int in, double mean, double var_raw) {
  DenseNet net({in, 2}, {{1, Activation::kLinear}, {1, Activation::kSoftplus}});
  Eigen::VectorXd p = Eigen::VectorXd::Zero(net.params().size());
  p[p.size() - 2] = mean;
  p[p.size() - 1] = var_raw;
  net.params().Assign(p);
  return net;
}

// swarm-shaped data: s' = s + a dt, masses random
TransitionData SwarmData(int n, int cells, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> s(0, 1), a(-7, 7);
  TransitionData d{Eigen::MatrixXd(n, 2 + cells), Eigen::MatrixXd(n, 1)};
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd mu = testing::RandomSimplex(cells, rng);
    const double si = s(rng), ai = a(rng);
    d.inputs(i, 0) = si;
    d.inputs.row(i).segment(1, cells) = mu.transpose();
    d.inputs(i, 1 + cells) = ai;
    d.targets(i, 0) = si + 0.01 * ai;
  }
  return d;
}

}  // namespace

TEST_CASE("gaussian nll") {
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(1, 1), one = Eigen::MatrixXd::Ones(1, 1);
  CHECK(GaussianNll(zero, one, zero) == doctest::Approx(0.5 * std::log(2 * M_PI)));
  CHECK(GaussianNll(zero, one, zero) == doctest::Approx(0.9189).epsilon(1e-4));
  CHECK(GaussianNll(zero, one / (2 * M_PI), zero) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(GaussianNll(zero, one, one) == doctest::Approx(1.4189).epsilon(1e-4));
}

TEST_CASE("epistemic spread") {
  const int in = 1 + 3 + 1;
  const Eigen::MatrixXd z = Eigen::MatrixXd::Random(4, in);
  const Ensemble same({ConstantMember(in, 0.4, 0.1), ConstantMember(in, 0.4, 0.1),
                       ConstantMember(in, 0.4, 0.1)},
                      1, 1.0);
  CHECK(same.Predict(z).epistemic_std.isZero());
  const double m = 0.3;
  const Ensemble pair({ConstantMember(in, m, 0.0), ConstantMember(in, -m, 0.0)}, 1, 1.0);
  const EnsemblePrediction p = pair.Predict(z);
  CHECK(p.mean.isZero());
  CHECK(p.epistemic_std.array().square().isApprox(Eigen::ArrayXXd::Constant(4, 1, 2 * m * m)));
  CHECK(p.aleatoric_var(0, 0) == doctest::Approx(std::log(2.0) + 1e-6));
  const Ensemble single({ConstantMember(in, m, 0.0)}, 1, 1.0);
  try {
    single.Predict(z);
    FAIL("one member accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSingleMember);
  }
}

TEST_CASE("taped prediction matches and differentiates") {
  Ensemble ens(1, 3, EnsembleConfig{.members = 4, .hidden = {6}}, 5);
  std::mt19937_64 rng(6);
  const Eigen::MatrixXd z = testing::RandomMatrix(5, 5, rng);
  {
    ad::Tape t;
    const TapedPrediction tp = ens.Predict(t.Constant(z));
    const EnsemblePrediction p = ens.Predict(z);
    CHECK((tp.mean.value() - p.mean).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((tp.epistemic_std.value() - p.epistemic_std).cwiseAbs().maxCoeff() < 1e-14);
  }
  const Eigen::MatrixXd w = testing::RandomMatrix(5, 1, rng);
  const auto r = testing::CheckGradient(
      [&](ad::Tape& t, const std::vector<ad::Var>& v) {
        const TapedPrediction tp = ens.Predict(v[0]);
        return ad::Sum((tp.mean + tp.epistemic_std) * t.Constant(w));
      },
      {z});
  CHECK(r.failures == 0);
}

TEST_CASE("fit recovers the swarm map") {
  std::mt19937_64 rng(1);
  const TransitionData train = SwarmData(1000, 5, rng), test = SwarmData(200, 5, rng);
  Ensemble ens(1, 5, EnsembleConfig{.members = 3, .hidden = {16, 16}, .max_epochs = 400}, 3);
  ens.Fit(train, 9, 3);
  const EnsemblePrediction p = ens.Predict(test.inputs);
  CHECK((p.mean - test.targets).cwiseAbs().mean() <= 1e-2);
}

TEST_CASE("fit is deterministic and handles tiny buffers") {
  std::mt19937_64 rng(2);
  const TransitionData d = SwarmData(60, 4, rng);
  const EnsembleConfig cfg{.members = 2, .hidden = {8}, .max_epochs = 30};
  Ensemble a(1, 4, cfg, 1), b(1, 4, cfg, 1);
  a.Fit(d, 4, 1);
  b.Fit(d, 4, 2);
  for (int k = 0; k < 2; ++k) {
    CHECK(a.members()[k].params().values() == b.members()[k].params().values());
  }
  TransitionData tiny{d.inputs.topRows(5), d.targets.topRows(5)};
  Ensemble c(1, 4, cfg, 1);
  const FitReport r = c.Fit(tiny, 4);
  CHECK(r.epochs[0] == 30);
  CHECK(std::isfinite(r.validation_nll[0]));
  CHECK_THROWS_AS(c.Fit(TransitionData{}, 1), Error);
}

TEST_CASE("calibration coverage") {
  const int in = 1 + 2 + 1;
  const Eigen::MatrixXd z = Eigen::MatrixXd::Random(6, in);
  const Ensemble exact({ConstantMember(in, 0.5, 0.0), ConstantMember(in, 0.5, 0.0)}, 1, 1.0);
  CHECK(CalibrationCoverage(exact, z, Eigen::MatrixXd::Constant(6, 1, 0.5), 1.0) == 1.0);
  Eigen::MatrixXd off = Eigen::MatrixXd::Constant(6, 1, 0.5);
  off(2, 0) = 0.6;
  CHECK(CalibrationCoverage(exact, z, off, 1.0) == doctest::Approx(5.0 / 6));
  const Ensemble wide({ConstantMember(in, 0.4, 0.0), ConstantMember(in, 0.6, 0.0)}, 1, 1.0);
  // sigma = sqrt(0.02) ~ 0.141 around 0.5
  CHECK(CalibrationCoverage(wide, z, Eigen::MatrixXd::Constant(6, 1, 0.62), 1.0) == 1.0);
  CHECK(CalibrationCoverage(wide, z, Eigen::MatrixXd::Constant(6, 1, 0.66), 1.0) == 0.0);
}

TEST_CASE("max epistemic norm") {
  const int cells = 3;
  const int in = 1 + cells + 1;
  const Ensemble flat({ConstantMember(in, 0.5, 0.0), ConstantMember(in, 0.5, 0.0)}, 1, 1.0);
  ScanPlan plan{Eigen::MatrixXd::Constant(1, 2, 0.3), {Eigen::VectorXd::Constant(cells, 1.0 / 3)}};
  CHECK(MaxEpistemicNorm(flat, plan) == 0.0);
  Ensemble ens(1, cells, EnsembleConfig{.members = 3, .hidden = {5}}, 2);
  const Eigen::MatrixXd z = Ensemble::Inputs(plan.state_actions.leftCols(1), plan.masses[0],
                                             plan.state_actions.rightCols(1));
  CHECK(MaxEpistemicNorm(ens, plan) == doctest::Approx(ens.Predict(z).epistemic_std.norm()));
  double last = MaxEpistemicNorm(ens, plan);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 5; ++i) {
    plan.state_actions.conservativeResize(plan.state_actions.rows() + 1, 2);
    plan.state_actions.bottomRows(1) = testing::RandomMatrix(1, 2, rng);
    plan.masses.push_back(testing::RandomSimplex(cells, rng));
    const double now = MaxEpistemicNorm(ens, plan);
    CHECK(now >= last);
    last = now;
  }
  CHECK_THROWS_AS(MaxEpistemicNorm(ens, ScanPlan{}), Error);
}

TEST_CASE("ensemble checkpoint round trip") {
  Ensemble ens(2, 4, EnsembleConfig{.members = 3, .hidden = {5}, .beta = 1.5}, 7);
  const auto dir = std::filesystem::temp_directory_path() / "meadow_ensemble_test";
  std::filesystem::remove_all(dir);
  ens.Save(dir.string());
  const Ensemble back = Ensemble::Load(dir.string());
  CHECK(back.size() == 3);
  CHECK(back.beta() == 1.5);
  CHECK(back.state_dim() == 2);
  for (int k = 0; k < 3; ++k) {
    CHECK(back.members()[k].params().values() == ens.members()[k].params().values());
  }
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(Ensemble::Load(dir.string()), Error);
}

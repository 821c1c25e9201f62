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
#include <random>

#include "gradcheck.h"
#include "meadow/autodiff.h"
#include "meadow/errors.h"

using namespace meadow;
using testing::CheckGradient;
using testing::RandomMatrix;

namespace {

using Unary = ad::Var (*)(ad::Var);

// weighted sum so every output coordinate reaches the scalar
ad::Var Project(ad::Tape& tape, ad::Var x, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ad::Sum(x * tape.Constant(RandomMatrix(x.rows(), x.cols(), rng)));
}

void CheckUnary(const char* name, Unary f, double lo, double hi) {
  std::mt19937_64 rng(17);
  const Eigen::MatrixXd x = RandomMatrix(3, 4, rng, lo, hi);
  const auto r = CheckGradient(
      [&](ad::Tape& t, const std::vector<ad::Var>& v) { return Project(t, f(v[0]), 1); }, {x});
  INFO(name << " max_rel " << r.max_rel);
  CHECK(r.failures == 0);
}

}  // namespace

TEST_CASE("scalar derivative examples") {
  ad::Tape tape;
  const ad::Var x = tape.Leaf(Eigen::MatrixXd::Constant(1, 1, 3.0));
  tape.Backward(ad::Square(x));
  CHECK(tape.grad(x)(0, 0) == doctest::Approx(6.0));

  ad::Tape t2;
  const ad::Var y = t2.Leaf(Eigen::MatrixXd::Constant(2, 2, 1.5));
  const ad::Var c = t2.Constant(Eigen::MatrixXd::Ones(1, 1));
  t2.Backward(c + 0.0 * ad::Sum(y));
  CHECK(t2.grad(y).isZero());
}

TEST_CASE("a tape is swept once") {
  ad::Tape tape;
  const ad::Var x = tape.Leaf(Eigen::MatrixXd::Ones(1, 1));
  const ad::Var y = x * x;
  tape.Backward(y);
  try {
    tape.Backward(y);
    FAIL("second sweep accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kTapeConsumed);
  }
}

TEST_CASE("elementwise functions against finite differences") {
  CheckUnary("exp", ad::Exp, -2, 2);
  CheckUnary("log", ad::Log, 0.1, 3);
  CheckUnary("tanh", ad::Tanh, -2, 2);
  CheckUnary("softplus", ad::Softplus, -3, 3);
  CheckUnary("square", ad::Square, -2, 2);
  CheckUnary("sqrt", ad::Sqrt, 0.1, 3);
  CheckUnary("xlogx", ad::XLogX, 0.01, 2);
  CheckUnary("normal cdf", ad::NormalCdf, -3, 3);
  CheckUnary("normal pdf", ad::NormalPdf, -3, 3);
  CheckUnary("neg", ad::Neg, -2, 2);
  CheckUnary("wrap", ad::WrapUnit, 0.05, 0.95);
  CheckUnary("leaky relu", [](ad::Var a) { return ad::LeakyRelu(a); }, 0.1, 2);
  CheckUnary("leaky relu (negative side)", [](ad::Var a) { return ad::LeakyRelu(a); }, -2, -0.1);
  CheckUnary("clip", [](ad::Var a) { return ad::Clip(a, -0.5, 0.5); }, -1, 1);
  CheckUnary("scale", [](ad::Var a) { return ad::Scale(a, -2.5); }, -1, 1);
  CheckUnary("shift", [](ad::Var a) { return ad::AddScalar(a, 0.7); }, -1, 1);
}

TEST_CASE("binary operations against finite differences") {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd a = RandomMatrix(3, 2, rng, 0.5, 2), b = RandomMatrix(3, 2, rng, 0.5, 2);
  using Bin = ad::Var (*)(ad::Var, ad::Var);
  for (Bin f : {&ad::Add, &ad::Sub, &ad::Mul, &ad::Div, &ad::Min, &ad::Max}) {
    const auto r = CheckGradient(
        [&](ad::Tape& t, const std::vector<ad::Var>& v) { return Project(t, f(v[0], v[1]), 2); },
        {a, b});
    CHECK(r.failures == 0);
  }
}

TEST_CASE("linear algebra and reshaping against finite differences") {
  std::mt19937_64 rng(9);
  const Eigen::MatrixXd x = RandomMatrix(4, 3, rng), w = RandomMatrix(2, 3, rng),
                        bias = RandomMatrix(2, 1, rng), m = RandomMatrix(3, 5, rng),
                        row = RandomMatrix(1, 3, rng);
  auto check = [](const testing::Builder& f, std::vector<Eigen::MatrixXd> in) {
    const auto r = CheckGradient(f, std::move(in));
    CHECK(r.failures == 0);
  };
  check([](ad::Tape& t, const std::vector<ad::Var>& v) { return Project(t, ad::MatMul(v[0], v[1]), 3); },
        {x, m});
  check([](ad::Tape& t, const std::vector<ad::Var>& v) {
          return Project(t, ad::Affine(v[0], v[1], v[2]), 4);
        },
        {x, w, bias});
  check([](ad::Tape& t, const std::vector<ad::Var>& v) { return Project(t, ad::Transpose(v[0]), 5); },
        {x});
  check([](ad::Tape& t, const std::vector<ad::Var>& v) {
          return Project(t, ad::BroadcastRows(v[0], 4) * v[1], 6);
        },
        {row, x});
  check([](ad::Tape& t, const std::vector<ad::Var>& v) {
          return Project(t, ad::HConcat({v[0], ad::Cols(v[1], 1, 2), v[0]}), 7);
        },
        {x, x});
}

TEST_CASE("values of primitives") {
  ad::Tape t;
  Eigen::MatrixXd v(1, 3);
  v << -1.0, 0.0, 2.0;
  const ad::Var x = t.Constant(v);
  CHECK(ad::LeakyRelu(x).value()(0, 0) == doctest::Approx(-0.01));
  CHECK(ad::Softplus(x).value()(0, 1) == doctest::Approx(std::log(2.0)));
  CHECK(ad::NormalCdf(x).value()(0, 1) == doctest::Approx(0.5));
  CHECK(ad::XLogX(x * x).value()(0, 1) == 0.0);
  CHECK(ad::WrapUnit(x * 0.3).value()(0, 0) == doctest::Approx(0.7));
  CHECK(ad::NormalPdf(0.0) == doctest::Approx(1.0 / std::sqrt(2.0 * M_PI)));
}

TEST_CASE("gradients flow only into leaves") {
  ad::Tape t;
  const ad::Var c = t.Constant(Eigen::MatrixXd::Ones(2, 2));
  const ad::Var x = t.Leaf(Eigen::MatrixXd::Ones(2, 2));
  t.Backward(ad::Sum(c * x));
  CHECK(t.grad(c).isZero());
  CHECK(t.grad(x).isApprox(Eigen::MatrixXd::Ones(2, 2)));
}

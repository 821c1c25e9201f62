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

#include "meadow/kernel.h"

#include <cmath>
#include <limits>
#include <memory>

namespace meadow {
namespace {

// integer shifts on the torus cover this many standard deviations
constexpr double kWrapSigmas = 9.0;
// beyond this many standard deviations both CDF terms are saturated
constexpr double kTail = 38.0;

// edge positions of the bins along one axis, including the open ends of the
// clipped box
Eigen::VectorXd Edges(const GridSpec& grid) {
  const int k = grid.bins();
  Eigen::VectorXd e(k + 1);
  for (int j = 0; j <= k; ++j) e[j] = static_cast<double>(j) / k;
  if (grid.topology() == Topology::kClippedBox) {
    e[0] = -std::numeric_limits<double>::infinity();
    e[k] = std::numeric_limits<double>::infinity();
  }
  return e;
}

void AxisRow(const GridSpec& grid, const Eigen::VectorXd& edges, double m,
             double sigma, bool with_derivative, double* p, double* dp,
             Eigen::Index stride) {
  const int k = grid.bins();
  Eigen::VectorXd cdf = Eigen::VectorXd::Zero(k + 1);
  Eigen::VectorXd pdf = Eigen::VectorXd::Zero(k + 1);
  if (grid.topology() == Topology::kTorus) {
    m -= std::floor(m);
    const int wraps = 1 + static_cast<int>(std::ceil(kWrapSigmas * sigma));
    for (int s = -wraps; s <= wraps; ++s) {
      const double lo = (s - m) / sigma, hi = (1.0 + s - m) / sigma;
      if (lo > kTail) continue;
      if (hi < -kTail) continue;
      for (int j = 0; j <= k; ++j) {
        const double x = (edges[j] + s - m) / sigma;
        cdf[j] += ad::NormalCdf(x);
        if (with_derivative) pdf[j] += ad::NormalPdf(x);
      }
    }
  } else {
    cdf[k] = 1.0;
    for (int j = 1; j < k; ++j) {
      const double x = (edges[j] - m) / sigma;
      cdf[j] = ad::NormalCdf(x);
      if (with_derivative) pdf[j] = ad::NormalPdf(x);
    }
  }
  for (int j = 0; j < k; ++j) {
    p[j * stride] = cdf[j + 1] - cdf[j];
    // d/dm Phi((e - m) / sigma) = -pdf / sigma
    if (with_derivative) dp[j * stride] = -(pdf[j + 1] - pdf[j]) / sigma;
  }
}

int DeterministicBin(const GridSpec& grid, double m) {
  const int k = grid.bins();
  if (grid.topology() == Topology::kTorus) m -= std::floor(m);
  const int b = static_cast<int>(std::floor(m * k));
  return std::min(std::max(b, 0), k - 1);
}

Eigen::VectorXd Flatten(const GridSpec& grid, const Eigen::MatrixXd& m) {
  if (grid.dim() == 1) return m.col(0);
  // row-major cell order: index = i * k + j
  Eigen::MatrixXd t = m.transpose();
  return Eigen::Map<const Eigen::VectorXd>(t.data(), t.size());
}

Eigen::MatrixXd Unflatten(const GridSpec& grid, const Eigen::VectorXd& v) {
  const int k = grid.bins();
  Eigen::MatrixXd t = Eigen::Map<const Eigen::MatrixXd>(v.data(), k, k);
  return t.transpose();
}

Eigen::VectorXd PropagateFactors(const GridSpec& grid, const AxisFactors& f,
                                 const Eigen::Ref<const Eigen::VectorXd>& mass) {
  if (grid.dim() == 1) {
    return f.factor[0].transpose() * mass;
  }
  const Eigen::MatrixXd out =
      f.factor[0].transpose() * mass.asDiagonal() * f.factor[1];
  return Flatten(grid, out);
}

void CheckShapes(const GridSpec& grid, Eigen::Index mean_rows,
                 Eigen::Index mean_cols, Eigen::Index mass_rows) {
  if (mean_cols != grid.dim()) {
    throw Error(ErrorCode::kShapeMismatch, "means must have one column per axis");
  }
  if (mass_rows != mean_rows) {
    throw Error(ErrorCode::kShapeMismatch, "one mass per source is required");
  }
}

}  // namespace

AxisFactors ComputeAxisFactors(const GridSpec& grid,
                               const Eigen::Ref<const Eigen::MatrixXd>& means,
                               double noise_std, bool with_derivative) {
  if (means.cols() != grid.dim()) {
    throw Error(ErrorCode::kShapeMismatch, "means must have one column per axis");
  }
  if (!means.allFinite()) {
    throw Error(ErrorCode::kModelEvalFailure, "transition mean is not finite");
  }
  const Eigen::Index n = means.rows();
  const int k = grid.bins();
  const Eigen::VectorXd edges = Edges(grid);
  AxisFactors out;
  for (int a = 0; a < grid.dim(); ++a) {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, k);
    Eigen::MatrixXd dp = Eigen::MatrixXd::Zero(n, with_derivative ? k : 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (noise_std <= 0.0) {
        p(i, DeterministicBin(grid, means(i, a))) = 1.0;
        continue;
      }
      AxisRow(grid, edges, means(i, a), noise_std, with_derivative,
              p.data() + i, with_derivative ? dp.data() + i : nullptr, n);
    }
    out.factor.push_back(std::move(p));
    out.derivative.push_back(std::move(dp));
  }
  return out;
}

Eigen::MatrixXd TransitionKernel(const GridSpec& grid,
                                 const Eigen::Ref<const Eigen::MatrixXd>& means,
                                 double noise_std) {
  const AxisFactors f = ComputeAxisFactors(grid, means, noise_std, false);
  if (grid.dim() == 1) return f.factor[0];
  const int k = grid.bins();
  Eigen::MatrixXd kernel(means.rows(), grid.num_cells());
  for (Eigen::Index i = 0; i < means.rows(); ++i) {
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < k; ++b) {
        kernel(i, a * k + b) = f.factor[0](i, a) * f.factor[1](i, b);
      }
    }
  }
  return kernel;
}

Eigen::VectorXd Propagate(const GridSpec& grid,
                          const Eigen::Ref<const Eigen::MatrixXd>& means,
                          const Eigen::Ref<const Eigen::VectorXd>& mass,
                          double noise_std) {
  CheckShapes(grid, means.rows(), means.cols(), mass.size());
  return PropagateFactors(grid, ComputeAxisFactors(grid, means, noise_std, false),
                          mass);
}

ad::Var GridTransition(const GridSpec& grid, ad::Var means, ad::Var mass,
                       double noise_std) {
  CheckShapes(grid, means.rows(), means.cols(), mass.rows());
  if (mass.cols() != 1) {
    throw Error(ErrorCode::kShapeMismatch, "mass must be a column");
  }
  ad::Tape& tape = *means.tape();
  const bool grad =
      tape.needs_grad(means.id()) || tape.needs_grad(mass.id());
  auto factors = std::make_shared<AxisFactors>(
      ComputeAxisFactors(grid, means.value(), noise_std, grad));
  Eigen::VectorXd out = PropagateFactors(grid, *factors, mass.value().col(0));
  const int im = means.id(), iw = mass.id();
  return tape.Record(
      std::move(out), {means, mass},
      [grid, factors, im, iw](ad::Tape& t, int self) {
        const Eigen::VectorXd g = t.grad_ref(self).col(0);
        const Eigen::VectorXd w = t.value(iw).col(0);
        const AxisFactors& f = *factors;
        const Eigen::Index n = w.size();
        Eigen::MatrixXd gm(n, grid.dim());
        Eigen::VectorXd gw(n);
        if (grid.dim() == 1) {
          gw = f.factor[0] * g;
          gm.col(0) = w.cwiseProduct(f.derivative[0] * g);
        } else {
          const Eigen::MatrixXd G = Unflatten(grid, g);
          const Eigen::MatrixXd ag = f.factor[0] * G;
          gw = ag.cwiseProduct(f.factor[1]).rowwise().sum();
          gm.col(0) = w.cwiseProduct(
              (f.derivative[0] * G).cwiseProduct(f.factor[1]).rowwise().sum());
          gm.col(1) =
              w.cwiseProduct(ag.cwiseProduct(f.derivative[1]).rowwise().sum());
        }
        t.Accumulate(im, gm);
        t.Accumulate(iw, gw);
      });
}

}  // namespace meadow

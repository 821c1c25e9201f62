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

#include "meadow/environment.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <vector>

namespace meadow {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kKlEps = 1e-9;
constexpr double kDensityEps = 1e-9;

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double ParseNumber(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kIo, "bad number '" + s + "'");
  }
}

}  // namespace

Eigen::VectorXd Environment::Prepare(const Eigen::VectorXd& mass) const {
  ad::Tape tape;
  return Prepare(tape.Constant(mass)).value().col(0);
}

Eigen::MatrixXd Environment::TrueMean(const Eigen::MatrixXd& states,
                                      const Eigen::MatrixXd& actions) const {
  ad::Tape tape;
  return TrueMean(tape.Constant(states), tape.Constant(actions)).value();
}

double Environment::ExpectedReward(const Eigen::VectorXd& mass,
                                   const Eigen::MatrixXd& actions) const {
  ad::Tape tape;
  return ExpectedReward(tape.Constant(mass), tape.Constant(actions)).scalar();
}

Eigen::VectorXd Environment::SampleInCell(int cell, Rng& rng) const {
  const GridSpec& g = grid();
  const Eigen::VectorXi bins = g.AxisBins(cell);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd s(g.dim());
  for (int a = 0; a < g.dim(); ++a) s[a] = (bins[a] + u(rng)) / g.bins();
  return s;
}

// -- swarm --

double SwarmPositionalReward(double s) {
  const double sn = std::sin(2.0 * kPi * s), cs = std::cos(2.0 * kPi * s);
  return 2.0 * kPi * kPi * (sn - cs * cs) + 2.0 * sn;
}

double SwarmReward(double s, double a, double density, SwarmVariant variant) {
  double r = SwarmPositionalReward(s) - 0.5 * a * a;
  if (variant == SwarmVariant::kPenalized) r -= std::log(density + kDensityEps);
  return r;
}

SwarmEnv::SwarmEnv(SwarmParams params)
    : params_(params), grid_(1, params.bins, Topology::kTorus) {
  if (params_.steps <= 0) throw Error(ErrorCode::kConfig, "steps must be positive");
  if (!(params_.action_bound > 0.0)) {
    throw Error(ErrorCode::kConfig, "action bound must be positive");
  }
  positional_.resize(grid_.num_cells());
  for (int i = 0; i < grid_.num_cells(); ++i) {
    positional_[i] = SwarmPositionalReward(grid_.AxisCenter(i));
  }
}

ad::Var SwarmEnv::TrueMean(ad::Var states, ad::Var actions) const {
  return states + dt() * actions;
}

ad::Var SwarmEnv::ExpectedReward(ad::Var mass, ad::Var actions) const {
  ad::Tape& tape = *mass.tape();
  ad::Var per_agent = tape.Constant(positional_) - 0.5 * ad::Square(actions);
  if (params_.reward == SwarmVariant::kPenalized) {
    const double k = grid_.num_cells();
    per_agent = per_agent - ad::Log(k * mass + kDensityEps);
  }
  return ad::Sum(mass * per_agent);
}

Eigen::VectorXd SwarmEnv::AddNoise(const Eigen::VectorXd& mean, Rng& rng) const {
  std::normal_distribution<double> n(0.0, noise_std());
  Eigen::VectorXd s = mean;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    s[i] += n(rng);
    s[i] -= std::floor(s[i]);
  }
  return s;
}

Eigen::VectorXd SwarmEnv::ModelTarget(const Eigen::VectorXd& s,
                                      const Eigen::VectorXd& next) const {
  Eigen::VectorXd d = next - s;
  for (Eigen::Index i = 0; i < d.size(); ++i) d[i] -= std::round(d[i]);
  return s + d;
}

double SwarmEnv::TransitionMean(double s, double a) const {
  const double m = s + a * dt();
  return m - std::floor(m);
}

double SwarmAnalyticAction(double s) { return 2.0 * kPi * std::cos(2.0 * kPi * s); }

double SwarmAnalyticNormalizer(int bins) {
  double z = 0.0;
  for (int i = 0; i < bins; ++i) {
    z += std::exp(2.0 * std::sin(2.0 * kPi * (i + 0.5) / bins));
  }
  return z / bins;
}

GridDistribution SwarmAnalyticDistribution(const GridSpec& grid) {
  if (grid.dim() != 1) {
    throw Error(ErrorCode::kWrongDimensionality, "the swarm lives on one axis");
  }
  Eigen::VectorXd w(grid.num_cells());
  for (int i = 0; i < grid.num_cells(); ++i) {
    w[i] = std::exp(2.0 * std::sin(2.0 * kPi * grid.AxisCenter(i)));
  }
  return Normalize(w, grid);
}

// -- repositioning --

RepositioningEnv::RepositioningEnv(RepositioningParams params,
                                   GridDistribution demand,
                                   Eigen::MatrixXd od_kernel)
    : params_(params),
      grid_(2, params.bins, Topology::kClippedBox),
      demand_(std::move(demand)),
      od_kernel_(std::move(od_kernel)) {
  RequireSameGrid(grid_, demand_.grid());
  const int n = grid_.num_cells();
  if (od_kernel_.rows() != n || od_kernel_.cols() != n) {
    throw Error(ErrorCode::kShapeMismatch, "kernel must be cells x cells");
  }
  if ((od_kernel_.array() < 0.0).any() ||
      ((od_kernel_.rowwise().sum().array() - 1.0).abs() > 1e-9).any()) {
    throw Error(ErrorCode::kConfig, "kernel rows must be distributions");
  }
  demand_neg_entropy_ = -ShannonEntropy(demand_);
}

ad::Var RepositioningEnv::Prepare(ad::Var mass) const {
  ad::Tape& tape = *mass.tape();
  ad::Var occupied = ad::Min(mass, tape.Constant(demand_.mass()));
  ad::Var trips = ad::MatMul(tape.Constant(od_kernel_.transpose()), occupied);
  return trips + (mass - occupied);
}

ad::Var RepositioningEnv::TrueMean(ad::Var states, ad::Var actions) const {
  return ad::Clip(states + actions, 0.0, 1.0);
}

ad::Var RepositioningEnv::ExpectedReward(ad::Var mass, ad::Var actions) const {
  (void)actions;
  ad::Tape& tape = *mass.tape();
  return ad::AddScalar(
      ad::Sum(tape.Constant(demand_.mass()) * ad::Log(mass + kKlEps)),
      -demand_neg_entropy_);
}

Eigen::VectorXd RepositioningEnv::SamplePrepared(const Eigen::VectorXd& s,
                                                 const Eigen::VectorXd& mass,
                                                 Rng& rng) const {
  const int cell = grid_.CellIndex(s);
  const double m = mass[cell];
  const double p = m > 0.0 ? std::min(1.0, demand_[cell] / m) : 1.0;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) >= p) return s;
  const Eigen::VectorXd row = od_kernel_.row(cell).transpose();
  std::discrete_distribution<int> dest(row.data(), row.data() + row.size());
  return SampleInCell(dest(rng), rng);
}

Eigen::VectorXd RepositioningEnv::AddNoise(const Eigen::VectorXd& mean,
                                           Rng& rng) const {
  std::normal_distribution<double> n(0.0, params_.noise_std);
  Eigen::VectorXd s = mean;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    double v = -1.0;
    for (int tries = 0; tries < 1000 && (v < 0.0 || v > 1.0); ++tries) {
      v = mean[i] + n(rng);
    }
    s[i] = std::clamp(v, 0.0, 1.0);
  }
  return s;
}

GridDistribution DemandShift(const GridDistribution& mu,
                             const GridDistribution& demand,
                             const Eigen::MatrixXd& od_kernel) {
  RequireSameGrid(mu.grid(), demand.grid());
  if (od_kernel.rows() != mu.size() || od_kernel.cols() != mu.size()) {
    throw Error(ErrorCode::kGridMismatch, "kernel does not match the grid");
  }
  const Eigen::VectorXd occupied = mu.mass().cwiseMin(demand.mass());
  Eigen::VectorXd out = od_kernel.transpose() * occupied + (mu.mass() - occupied);
  out = out.cwiseMax(0.0);
  return GridDistribution(mu.grid(), out / out.sum());
}

double RepositioningReward(const GridDistribution& mu,
                           const GridDistribution& demand) {
  return -KlDivergence(demand, mu, kKlEps);
}

namespace {

// 3x3 median filter with the window cut at the borders
Eigen::MatrixXd MedianSmooth(const Eigen::MatrixXd& f) {
  const Eigen::Index k = f.rows();
  Eigen::MatrixXd out(k, k);
  std::vector<double> w;
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      w.clear();
      for (Eigen::Index a = std::max<Eigen::Index>(i - 1, 0);
           a <= std::min(i + 1, k - 1); ++a) {
        for (Eigen::Index b = std::max<Eigen::Index>(j - 1, 0);
             b <= std::min(j + 1, k - 1); ++b) {
          w.push_back(f(a, b));
        }
      }
      std::sort(w.begin(), w.end());
      const std::size_t h = w.size() / 2;
      out(i, j) = w.size() % 2 ? w[h] : 0.5 * (w[h - 1] + w[h]);
    }
  }
  return out;
}

}  // namespace

Demand SyntheticDemand(std::uint64_t seed, const GridSpec& grid,
                       DemandParams params) {
  if (grid.dim() != 2) {
    throw Error(ErrorCode::kWrongDimensionality, "demand lives on a 2D grid");
  }
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int k = grid.bins(), n = grid.num_cells();
  const int bumps = 3 + static_cast<int>(rng() % 4);
  Eigen::MatrixXd centers(bumps, 2);
  Eigen::VectorXd widths(bumps), weights(bumps);
  for (int b = 0; b < bumps; ++b) {
    centers(b, 0) = 0.1 + 0.8 * u(rng);
    centers(b, 1) = 0.1 + 0.8 * u(rng);
    widths[b] = 0.05 + 0.1 * u(rng);
    weights[b] = 0.5 + u(rng);
  }
  const double h_max = std::log(static_cast<double>(n));
  double scale = 1.0;
  GridDistribution rho0 = GridDistribution::Uniform(grid);
  for (int attempt = 0; attempt < 60; ++attempt) {
    Eigen::MatrixXd field = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        const double x = grid.AxisCenter(i), y = grid.AxisCenter(j);
        for (int b = 0; b < bumps; ++b) {
          const double w = widths[b] * scale;
          const double d2 = std::pow(x - centers(b, 0), 2) + std::pow(y - centers(b, 1), 2);
          field(i, j) += weights[b] * std::exp(-0.5 * d2 / (w * w));
        }
      }
    }
    field = MedianSmooth(field);
    Eigen::VectorXd flat(n);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) flat[i * k + j] = field(i, j);
    }
    rho0 = Normalize(flat, grid);
    const double h = ShannonEntropy(rho0);
    if (h < 0.5 * h_max) {
      scale *= 1.2;
    } else if (h > 0.95 * h_max) {
      scale /= 1.2;
    } else {
      break;
    }
  }

  const Eigen::MatrixXd c = grid.CellCenters();
  const int attractor_a = static_cast<int>(rng() % n);
  const int attractor_b = static_cast<int>(rng() % n);
  Eigen::MatrixXd phi(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      phi(i, j) = std::exp(-(c.row(i) - c.row(j)).cwiseAbs().sum() /
                           params.od_length_scale);
    }
    phi.row(i) *= (1.0 - params.attractor_weight) / phi.row(i).sum();
    phi(i, attractor_a) += 0.5 * params.attractor_weight;
    phi(i, attractor_b) += 0.5 * params.attractor_weight;
    phi.row(i) /= phi.row(i).sum();
  }
  return {std::move(rho0), std::move(phi)};
}

void WriteDemandCsv(std::ostream& out, const GridDistribution& rho0) {
  out << "cell_index,mass\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (int i = 0; i < rho0.size(); ++i) out << i << ',' << rho0[i] << '\n';
}

GridDistribution ReadDemandCsv(std::istream& in, const GridSpec& grid) {
  std::string line;
  std::getline(in, line);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(grid.num_cells());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = SplitCsv(line);
    if (f.size() != 2) throw Error(ErrorCode::kIo, "demand row needs 2 fields");
    const int cell = static_cast<int>(ParseNumber(f[0]));
    if (cell < 0 || cell >= grid.num_cells()) {
      throw Error(ErrorCode::kIo, "demand cell out of range");
    }
    w[cell] = ParseNumber(f[1]);
  }
  return Normalize(w, grid);
}

void WriteKernelCsv(std::ostream& out, const Eigen::MatrixXd& od_kernel) {
  out << "from_cell,to_cell,prob\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index i = 0; i < od_kernel.rows(); ++i) {
    for (Eigen::Index j = 0; j < od_kernel.cols(); ++j) {
      if (od_kernel(i, j) != 0.0) out << i << ',' << j << ',' << od_kernel(i, j) << '\n';
    }
  }
}

Eigen::MatrixXd ReadKernelCsv(std::istream& in, int num_cells) {
  std::string line;
  std::getline(in, line);
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(num_cells, num_cells);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = SplitCsv(line);
    if (f.size() != 3) throw Error(ErrorCode::kIo, "kernel row needs 3 fields");
    const int i = static_cast<int>(ParseNumber(f[0]));
    const int j = static_cast<int>(ParseNumber(f[1]));
    if (i < 0 || j < 0 || i >= num_cells || j >= num_cells) {
      throw Error(ErrorCode::kIo, "kernel cell out of range");
    }
    phi(i, j) = ParseNumber(f[2]);
    if (phi(i, j) < 0.0) throw Error(ErrorCode::kNegativeWeight, "negative kernel entry");
  }
  for (int i = 0; i < num_cells; ++i) {
    const double sum = phi.row(i).sum();
    if (!(sum > 0.0)) throw Error(ErrorCode::kIo, "kernel row " + std::to_string(i) + " is empty");
    phi.row(i) /= sum;
  }
  return phi;
}

}  // namespace meadow

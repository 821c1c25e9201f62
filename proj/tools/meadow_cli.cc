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

// meadow: safe model-based mean-field control from the command line.
//
//   meadow train --config swarm.cfg --set episodes=2 --out run/
//   meadow plan --config repositioning.cfg --out plan/
//   meadow eval-finite --config repositioning.cfg --policy run/policy.ckpt
//   meadow oracle-swarm --bins 100 --dt 0.01
//   meadow export --config repositioning.cfg --out demand/

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "meadow/config.h"
#include "meadow/environment.h"
#include "meadow/errors.h"
#include "meadow/kernel.h"
#include "meadow/protocol.h"
#include "meadow/transport.h"

namespace fs = std::filesystem;
using namespace meadow;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  int jobs = 1;
};

RunConfig LoadConfig(const Common& c) {
  RunConfig config = RunConfig::Load(c.config);
  for (const std::string& s : c.overrides) config.Set(s);
  return config;
}

void AddCommon(CLI::App* cmd, Common& c, bool need_out) {
  cmd->add_option("-c,--config", c.config, "run configuration file")->required();
  cmd->add_option("-s,--set", c.overrides, "override, key=value or section.key=value");
  auto* out = cmd->add_option("-o,--out", c.out, "output directory");
  if (need_out) out->required();
  cmd->add_option("-j,--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
}

int Train(const Common& c) {
  const RunConfig config = LoadConfig(c);
  RunOptions options;
  options.out_dir = c.out;
  options.jobs = c.jobs;
  options.on_episode = [](const EpisodeLog& log) {
    std::cerr << "episode " << log.episode << "  objective " << log.objective
              << "  max_sigma " << log.max_sigma << "  coverage " << log.coverage
              << (log.feasible ? "" : "  (no feasible iterate)") << '\n';
  };
  RunProtocol(config, options);
  return 0;
}

int Plan(const Common& c) {
  const RunConfig config = LoadConfig(c);
  const PlanResult plan = PlanKnown(config, c.out);
  std::cout << std::setprecision(std::numeric_limits<double>::max_digits10)
            << "objective " << plan.rollout.objective_value << '\n'
            << "min_slack " << plan.rollout.min_slack << '\n'
            << "epochs " << plan.log.size() << '\n';
  return 0;
}

int EvalFinite(const Common& c, const std::string& policy_path,
               const std::vector<int>& agents, int seeds) {
  const RunConfig config = LoadConfig(c);
  const World world = MakeWorld(config);
  std::ifstream in(policy_path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + policy_path);
  const PolicyProfile policy = PolicyProfile::Load(in);
  const BarrierConfig& barrier = config.optimizer.barrier;
  const Rollout limit =
      EvaluatePolicy(*world.env, policy, world.spec, barrier, world.mu0.mass());
  const GridSpec& grid = world.env->grid();
  const GridDistribution final_mu(grid, limit.masses.back() / limit.masses.back().sum());

  std::ofstream file;
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    file.open(fs::path(c.out) / "finite_regime.csv");
  }
  std::ostream& out = c.out.empty() ? std::cout : file;
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "agents,seed,objective,limit_objective,abs_gap,w1_final\n";
  const std::uint64_t master = MasterSeed(config);
  for (int m : agents) {
    for (int seed = 0; seed < seeds; ++seed) {
      const FiniteRegimeResult r =
          FiniteRegimeEval(*world.env, policy, world.spec, barrier, m,
                           StreamSeed(master, 100 + m, seed), world.mu0.mass());
      const double w1 =
          Wasserstein1(GridDistribution(grid, r.empirical.back()), final_mu);
      out << m << ',' << seed << ',' << r.objective << ',' << limit.objective_value
          << ',' << std::abs(r.objective - limit.objective_value) << ',' << w1 << '\n';
    }
  }
  return 0;
}

int OracleSwarm(int bins, double dt, const std::string& out_dir) {
  if (bins < 1 || !(dt > 0.0)) throw Error(ErrorCode::kConfig, "need bins >= 1 and dt > 0");
  const GridSpec grid(1, bins, Topology::kTorus);
  const GridDistribution mu = SwarmAnalyticDistribution(grid);
  const Eigen::MatrixXd centers = grid.CellCenters();
  Eigen::VectorXd action(bins);
  for (int i = 0; i < bins; ++i) action[i] = SwarmAnalyticAction(centers(i, 0));
  const Eigen::VectorXd next =
      Propagate(grid, centers + dt * action, mu.mass(), std::sqrt(dt));
  const double residual = Wasserstein1(GridDistribution(grid, next / next.sum()), mu);

  std::cout << std::setprecision(std::numeric_limits<double>::max_digits10)
            << "pi_at_zero " << SwarmAnalyticAction(0.0) << '\n'
            << "two_pi " << 2.0 * std::numbers::pi << '\n'
            << "mu_sum " << mu.mass().sum() << '\n'
            << "stationarity_w1 " << residual << '\n'
            << "bound " << 2.0 / bins << '\n';
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream f(fs::path(out_dir) / "swarm_oracle.csv");
    f << std::setprecision(std::numeric_limits<double>::max_digits10)
      << "cell_index,center,action,mass,next_mass\n";
    for (int i = 0; i < bins; ++i) {
      f << i << ',' << centers(i, 0) << ',' << action[i] << ',' << mu[i] << ','
        << next[i] << '\n';
    }
  }
  return 0;
}

int Export(const Common& c) {
  const RunConfig config = LoadConfig(c);
  if (config.env != EnvKind::kRepositioning) {
    throw Error(ErrorCode::kConfig, "export needs a repositioning config");
  }
  const World world = MakeWorld(config);
  const auto& env = static_cast<const RepositioningEnv&>(*world.env);
  fs::create_directories(c.out);
  std::ofstream demand(fs::path(c.out) / "demand.csv");
  WriteDemandCsv(demand, env.demand());
  std::ofstream kernel(fs::path(c.out) / "od_kernel.csv");
  WriteKernelCsv(kernel, env.od_kernel());
  if (!demand || !kernel) throw Error(ErrorCode::kIo, "cannot write to " + c.out);
  return 0;
}

int ExitCode(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kInfeasibleConstraint:
      std::cerr << "infeasible constraint: " << e.what() << '\n';
      return 2;
    case ErrorCode::kDivergedObjective:
      std::cerr << "diverged objective: " << e.what() << '\n';
      return 3;
    default:
      std::cerr << "error: " << e.what() << '\n';
      return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"safe model-based mean-field control"};
  app.require_subcommand(1);

  Common train, plan, finite, exporter;
  AddCommon(app.add_subcommand("train", "run the episodic learning protocol"), train, true);
  AddCommon(app.add_subcommand("plan", "optimise a policy under known transitions"), plan,
            false);

  auto* eval = app.add_subcommand("eval-finite", "evaluate a policy with finitely many agents");
  AddCommon(eval, finite, false);
  std::string policy_path;
  std::vector<int> agents = {100, 1000, 10000};
  int seeds = 20;
  eval->add_option("-p,--policy", policy_path, "policy checkpoint")->required();
  eval->add_option("-m,--agents", agents, "agent counts")->check(CLI::PositiveNumber);
  eval->add_option("--seeds", seeds, "seeds per agent count")->check(CLI::PositiveNumber);

  auto* oracle = app.add_subcommand("oracle-swarm", "analytic swarm solution and its residual");
  int bins = 100;
  double dt = 0.01;
  std::string oracle_out;
  oracle->add_option("-k,--bins", bins, "bins");
  oracle->add_option("--dt", dt, "time step");
  oracle->add_option("-o,--out", oracle_out, "output directory");

  AddCommon(app.add_subcommand("export", "write the synthetic demand and OD kernel"),
            exporter, true);

  CLI11_PARSE(app, argc, argv);
  try {
    if (app.got_subcommand("train")) return Train(train);
    if (app.got_subcommand("plan")) return Plan(plan);
    if (app.got_subcommand("eval-finite")) return EvalFinite(finite, policy_path, agents, seeds);
    if (app.got_subcommand("oracle-swarm")) return OracleSwarm(bins, dt, oracle_out);
    return Export(exporter);
  } catch (const Error& e) {
    return ExitCode(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

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

#include "meadow/protocol.h"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>

#include "meadow/kernel.h"
#include "meadow/transport.h"

namespace meadow {
namespace {

namespace fs = std::filesystem;

enum Stream : std::uint64_t {
  kEnsembleInit = 1,
  kPolicyInit = 2,
  kExecution = 3,
  kFit = 4,
  kGapCheck = 5,
};

GridDistribution ToDistribution(const GridSpec& grid, const Eigen::VectorXd& v) {
  const Eigen::VectorXd m = v.cwiseMax(0.0);
  return GridDistribution(grid, m / m.sum());
}

Eigen::MatrixXd SampleAgents(const Environment& env, const Eigen::VectorXd& mu0,
                             int agents, Rng& rng) {
  std::discrete_distribution<int> cell(mu0.data(), mu0.data() + mu0.size());
  Eigen::MatrixXd s(agents, env.state_dim());
  for (int i = 0; i < agents; ++i) s.row(i) = env.SampleInCell(cell(rng), rng).transpose();
  return s;
}

Eigen::MatrixXd SamplePrepared(const Environment& env, const Eigen::MatrixXd& s,
                               const Eigen::VectorXd& mass, Rng& rng) {
  Eigen::MatrixXd out(s.rows(), s.cols());
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    out.row(i) = env.SamplePrepared(s.row(i).transpose(), mass, rng).transpose();
  }
  return out;
}

Eigen::MatrixXd AddNoise(const Environment& env, const Eigen::MatrixXd& mean,
                         Rng& rng) {
  Eigen::MatrixXd out(mean.rows(), mean.cols());
  for (Eigen::Index i = 0; i < mean.rows(); ++i) {
    out.row(i) = env.AddNoise(mean.row(i).transpose(), rng).transpose();
  }
  return out;
}

// (s, a) lattice: every cell center with every action on a regular grid of
// `per_axis` points per action axis
Eigen::MatrixXd StateActionLattice(const Environment& env, int per_axis) {
  const Eigen::MatrixXd centers = env.grid().CellCenters();
  const int d = env.state_dim();
  const double b = env.action_bound();
  std::vector<double> axis(per_axis);
  for (int i = 0; i < per_axis; ++i) {
    axis[i] = per_axis == 1 ? 0.0 : -b + 2.0 * b * i / (per_axis - 1);
  }
  const int combos = d == 1 ? per_axis : per_axis * per_axis;
  Eigen::MatrixXd out(centers.rows() * combos, 2 * d);
  Eigen::Index row = 0;
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    for (int j = 0; j < combos; ++j) {
      out.row(row).head(d) = centers.row(c);
      if (d == 1) {
        out(row, 1) = axis[j];
      } else {
        out(row, 2) = axis[j / per_axis];
        out(row, 3) = axis[j % per_axis];
      }
      ++row;
    }
  }
  return out;
}

std::ofstream OpenCsv(const fs::path& path, const char* header) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << header << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  return out;
}

void AppendDistributions(std::ofstream& out, int episode,
                         const std::vector<Eigen::VectorXd>& masses) {
  for (std::size_t t = 0; t < masses.size(); ++t) {
    for (Eigen::Index i = 0; i < masses[t].size(); ++i) {
      out << episode << ',' << t << ',' << i << ',' << masses[t][i] << '\n';
    }
  }
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

}  // namespace

std::uint64_t StreamSeed(std::uint64_t master, std::uint64_t stream,
                         std::uint64_t index) {
  std::uint64_t z = master * 0x9e3779b97f4a7c15ULL + stream * 0xd1b54a32d192ed03ULL +
                    index * 0x8cb92ba72f3d8dd7ULL + 0x2545f4914f6cdd1dULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t MasterSeed(const RunConfig& config) {
  if (const char* env = std::getenv("MEADOW_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') {
      throw Error(ErrorCode::kConfig, "MEADOW_SEED must be a non-negative integer");
    }
    return v;
  }
  return config.seed;
}

void ReplayBuffer::Add(int episode, TransitionData data) {
  entries_.emplace_back(episode, std::move(data));
  while (static_cast<int>(entries_.size()) > capacity_) entries_.pop_front();
}

Eigen::Index ReplayBuffer::size() const {
  Eigen::Index n = 0;
  for (const auto& e : entries_) n += e.second.size();
  return n;
}

TransitionData ReplayBuffer::All() const {
  const Eigen::Index n = size();
  if (entries_.empty()) return {};
  TransitionData out{Eigen::MatrixXd(n, entries_.front().second.inputs.cols()),
                     Eigen::MatrixXd(n, entries_.front().second.targets.cols())};
  Eigen::Index row = 0;
  for (const auto& e : entries_) {
    out.inputs.middleRows(row, e.second.size()) = e.second.inputs;
    out.targets.middleRows(row, e.second.size()) = e.second.targets;
    row += e.second.size();
  }
  return out;
}

std::vector<int> ReplayBuffer::EpisodeIndices() const {
  std::vector<int> out;
  for (const auto& e : entries_) out.push_back(e.first);
  return out;
}

World MakeWorld(const RunConfig& config) {
  std::unique_ptr<Environment> env;
  if (config.env == EnvKind::kSwarm) {
    env = std::make_unique<SwarmEnv>(
        SwarmParams{config.bins, config.steps, config.action_bound, config.reward});
  } else {
    const GridSpec grid(2, config.bins, Topology::kClippedBox);
    Demand demand = SyntheticDemand(config.demand_seed, grid,
                                    {config.od_length_scale, config.attractor_weight});
    if (!config.demand_file.empty()) {
      std::ifstream in(config.demand_file);
      if (!in) throw Error(ErrorCode::kIo, "cannot open " + config.demand_file);
      demand.rho0 = ReadDemandCsv(in, grid);
    }
    if (!config.od_file.empty()) {
      std::ifstream in(config.od_file);
      if (!in) throw Error(ErrorCode::kIo, "cannot open " + config.od_file);
      demand.od_kernel = ReadKernelCsv(in, grid.num_cells());
    }
    env = std::make_unique<RepositioningEnv>(
        RepositioningParams{config.bins, config.steps, config.action_bound,
                            config.noise_std},
        demand.rho0, demand.od_kernel);
  }
  const GridSpec& grid = env->grid();
  SafetySpec spec = SafetySpec::None();
  switch (config.constraint) {
    case ConstraintKind::kNone:
      break;
    case ConstraintKind::kEntropy:
      spec = SafetySpec::Entropy(config.Threshold());
      spec.differential = config.differential;
      spec.epsilon = config.epsilon;
      break;
    case ConstraintKind::kSimilarity: {
      if (config.threshold < 0.0) {
        throw Error(ErrorCode::kConfig, "similarity constraints need an explicit threshold");
      }
      GridDistribution reference =
          config.env == EnvKind::kSwarm
              ? SwarmAnalyticDistribution(grid)
              : static_cast<const RepositioningEnv&>(*env).demand();
      spec = SafetySpec::Similarity(config.threshold, std::move(reference));
      break;
    }
  }
  GridDistribution mu0 = MaxEntropySafeInit(spec, grid);
  return World{std::move(env), std::move(spec), std::move(mu0)};
}

Execution ExecutePolicy(const Environment& env, const PolicyProfile& policy,
                        int agents, std::uint64_t seed,
                        const Eigen::VectorXd& mu0) {
  Rng rng(seed);
  const GridSpec& grid = env.grid();
  const int T = env.steps();
  const Eigen::MatrixXd centers = grid.CellCenters();
  const Eigen::Index n = centers.rows();
  Execution ex;
  const Eigen::Index in_dim = 2 * env.state_dim() + grid.num_cells();
  ex.data = {Eigen::MatrixXd(static_cast<Eigen::Index>(agents) * T, in_dim),
             Eigen::MatrixXd(static_cast<Eigen::Index>(agents) * T, env.state_dim())};
  ex.center_points = {Eigen::MatrixXd(n * T, in_dim),
                      Eigen::MatrixXd(n * T, env.state_dim())};
  Eigen::MatrixXd s = SampleAgents(env, mu0, agents, rng);
  ex.masses.push_back(mu0);
  ex.empirical.push_back(Histogram(s, grid).mass());
  for (int t = 0; t < T; ++t) {
    const Eigen::VectorXd& mass = ex.masses.back();
    const Eigen::VectorXd prepared = env.Prepare(mass);

    const Eigen::MatrixXd a_c = policy.Act(centers, prepared, t);
    const Eigen::MatrixXd f_c = env.TrueMean(centers, a_c);
    ex.center_points.inputs.middleRows(t * n, n) = Ensemble::Inputs(centers, prepared, a_c);
    ex.center_points.targets.middleRows(t * n, n) = f_c;

    const Eigen::MatrixXd sp = SamplePrepared(env, s, mass, rng);
    const Eigen::MatrixXd a = policy.Act(sp, prepared, t);
    const Eigen::MatrixXd next = AddNoise(env, env.TrueMean(sp, a), rng);
    ex.data.inputs.middleRows(static_cast<Eigen::Index>(t) * agents, agents) =
        Ensemble::Inputs(sp, prepared, a);
    for (int i = 0; i < agents; ++i) {
      ex.data.targets.row(static_cast<Eigen::Index>(t) * agents + i) =
          env.ModelTarget(sp.row(i).transpose(), next.row(i).transpose()).transpose();
    }
    s = next;
    ex.masses.push_back(Propagate(grid, f_c, prepared, env.noise_std()));
    ex.empirical.push_back(Histogram(s, grid).mass());
  }
  return ex;
}

Rollout EvaluatePolicy(const Environment& env, const PolicyProfile& policy,
                       const SafetySpec& spec, const BarrierConfig& barrier,
                       const Eigen::VectorXd& mu0) {
  ad::Tape tape;
  TrueModel model(env);
  const std::vector<double> zero(env.steps(), 0.0);
  LipschitzBundle none;
  return DifferentiableRollout(tape, env, model, policy.AsController(), spec, zero,
                               none, barrier, mu0);
}

FiniteRegimeResult FiniteRegimeEval(const Environment& env,
                                    const PolicyProfile& policy,
                                    const SafetySpec& spec,
                                    const BarrierConfig& barrier, int agents,
                                    std::uint64_t seed,
                                    const Eigen::VectorXd& mu0) {
  if (agents < 1) throw Error(ErrorCode::kConfig, "at least one agent is required");
  Rng rng(seed);
  const GridSpec& grid = env.grid();
  const Eigen::MatrixXd centers = grid.CellCenters();
  FiniteRegimeResult r;
  Eigen::MatrixXd s = SampleAgents(env, mu0, agents, rng);
  r.empirical.push_back(Histogram(s, grid).mass());
  for (int t = 0; t < env.steps(); ++t) {
    const Eigen::VectorXd mass = r.empirical.back();
    const Eigen::MatrixXd sp = SamplePrepared(env, s, mass, rng);
    const Eigen::VectorXd prepared = Histogram(sp, grid).mass();
    r.objective += env.ExpectedReward(mass, policy.Act(centers, prepared, t));
    const Eigen::MatrixXd a = policy.Act(sp, prepared, t);
    s = AddNoise(env, env.TrueMean(sp, a), rng);
    r.empirical.push_back(Histogram(s, grid).mass());
    if (spec.kind == ConstraintKind::kNone) continue;
    const double h = EvaluateConstraint(spec, r.empirical.back(), grid);
    r.h_values.push_back(h);
    r.objective += LogBarrier(h, barrier.lambda, barrier.delta_ext);
  }
  return r;
}

RunResult RunProtocol(const RunConfig& config, const RunOptions& options) {
  World world = MakeWorld(config);
  const Environment& env = *world.env;
  const GridSpec& grid = env.grid();
  const SafetySpec& spec = world.spec;
  const Eigen::VectorXd mu0 = world.mu0.mass();
  const std::uint64_t master = MasterSeed(config);
  const int T = env.steps();
  const int d = env.state_dim();

  if (spec.kind != ConstraintKind::kNone) {
    const GapCheck gap = CheckLipschitzGap(spec, grid, config.lipschitz.L_h,
                                           config.gap_pairs,
                                           StreamSeed(master, kGapCheck, 0));
    if (gap.violations > 0) {
      std::ostringstream os;
      os << "L_h = " << config.lipschitz.L_h << " is below the observed gap ratio "
         << gap.max_ratio << " (" << gap.violations << " of " << gap.pairs
         << " random pairs)";
      throw Error(ErrorCode::kConfig, os.str());
    }
  }

  std::ofstream episodes_csv, safety_csv, error_csv, dist_csv;
  const fs::path dir(options.out_dir);
  const bool files = !options.out_dir.empty();
  if (files) {
    fs::create_directories(dir);
    WriteText(dir / "config.snapshot", config.ToString());
    episodes_csv = OpenCsv(dir / "episodes.csv",
                           "episode,objective,planned_objective,max_sigma,coverage,"
                           "min_h_value,feasible,policy_epochs,buffer_size,wall_seconds");
    safety_csv = OpenCsv(dir / "safety.csv", "episode,step,h_value,margin,slack,violated");
    error_csv = OpenCsv(dir / "model_error.csv", "episode,step,w1,margin");
    if (config.log_distributions) {
      dist_csv = OpenCsv(dir / "distributions.csv", "episode,step,cell_index,mass");
    }
  }

  RunResult result;
  result.ensemble = Ensemble(d, grid.num_cells(), config.ensemble,
                             StreamSeed(master, kEnsembleInit, 0));
  Ensemble& ens = result.ensemble;
  PolicyProfile policy(d, grid.num_cells(), T, env.action_bound(),
                       config.policy_hidden, StreamSeed(master, kPolicyInit, 0));
  ReplayBuffer buffer(config.buffer_episodes);

  // warm-up data from the randomly initialised policy
  Execution last = ExecutePolicy(env, policy, config.agents,
                                 StreamSeed(master, kExecution, 0), mu0);
  buffer.Add(0, last.data);
  ens.Fit(buffer.All(), StreamSeed(master, kFit, 0), options.jobs);

  const Eigen::MatrixXd lattice = StateActionLattice(env, config.scan_actions);
  for (int n = 1; n <= config.episodes; ++n) {
    const auto start = std::chrono::steady_clock::now();
    EpisodeLog log;
    log.episode = n;

    ScanPlan plan{lattice, {}};
    for (const Eigen::VectorXd& m : last.masses) plan.masses.push_back(env.Prepare(m));
    plan.masses.push_back(GridDistribution::Uniform(grid).mass());
    log.max_sigma = MaxEpistemicNorm(ens, plan);
    const std::vector<double> margins =
        ComputeMargins(config.lipschitz, log.max_sigma, T);

    HallucinatedModel model(ens, ens.beta());
    PolicyProfile init =
        config.warm_start
            ? policy
            : PolicyProfile(d, grid.num_cells(), T, env.action_bound(),
                            config.policy_hidden, StreamSeed(master, kPolicyInit, n));
    PolicyOptResult opt = OptimizePolicy(std::move(init), env, model, spec, margins,
                                         config.lipschitz, config.optimizer, mu0);
    policy = std::move(opt.policy);
    log.planned_objective = opt.objective;
    log.feasible = opt.feasible;
    log.policy_epochs = static_cast<int>(opt.log.size());
    result.last_training_log = std::move(opt.log);

    ad::Tape tape;
    const Rollout planned =
        DifferentiableRollout(tape, env, model, policy.AsController(), spec, margins,
                              config.lipschitz, config.optimizer.barrier, mu0);

    Execution ex = ExecutePolicy(env, policy, config.agents,
                                 StreamSeed(master, kExecution, n), mu0);
    log.coverage = CalibrationCoverage(ens, ex.center_points.inputs,
                                       ex.center_points.targets, ens.beta());
    const Rollout truth = EvaluatePolicy(env, policy, spec, config.optimizer.barrier, mu0);
    log.objective = truth.objective_value;
    log.rewards = truth.rewards;
    log.true_masses = ex.masses;
    log.hallucinated_masses = planned.masses;
    log.h_values.push_back(EvaluateConstraint(spec, mu0, grid));
    log.margins.push_back(0.0);
    log.slacks.push_back(log.h_values.front());
    log.w1.push_back(0.0);
    for (int t = 1; t <= T; ++t) {
      log.h_values.push_back(EvaluateConstraint(spec, ex.masses[t], grid));
      log.margins.push_back(margins[t - 1]);
      log.slacks.push_back(planned.slacks[t - 1]);
      log.w1.push_back(Wasserstein1(ToDistribution(grid, planned.masses[t]),
                                    ToDistribution(grid, ex.masses[t])));
    }

    buffer.Add(n, ex.data);
    log.buffer_size = buffer.size();
    ens.Fit(buffer.All(), StreamSeed(master, kFit, n), options.jobs);
    last = std::move(ex);
    log.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (files) {
      double min_h = std::numeric_limits<double>::infinity();
      for (double h : log.h_values) min_h = std::min(min_h, h);
      episodes_csv << n << ',' << log.objective << ',' << log.planned_objective << ','
                   << log.max_sigma << ',' << log.coverage << ',' << min_h << ','
                   << (log.feasible ? 1 : 0) << ',' << log.policy_epochs << ','
                   << log.buffer_size << ',' << log.wall_seconds << '\n';
      for (int t = 0; t <= T; ++t) {
        safety_csv << n << ',' << t << ',' << log.h_values[t] << ',' << log.margins[t]
                   << ',' << log.slacks[t] << ',' << (log.h_values[t] < 0.0 ? 1 : 0)
                   << '\n';
        error_csv << n << ',' << t << ',' << log.w1[t] << ',' << log.margins[t] << '\n';
      }
      if (config.log_distributions) AppendDistributions(dist_csv, n, log.true_masses);
    }
    if (options.on_episode) options.on_episode(log);
    result.episodes.push_back(std::move(log));
  }

  result.policy = policy;
  if (files) {
    std::ofstream tl(dir / "training_log.csv");
    WriteTrainingLog(tl, result.last_training_log);
    std::ofstream pc(dir / "policy.ckpt");
    policy.Save(pc);
    ens.Save((dir / "ensemble.ckpt").string());
    if (!tl || !pc) throw Error(ErrorCode::kIo, "cannot write run artifacts");
  }
  return result;
}

PlanResult PlanKnown(const RunConfig& config, const std::string& out_dir) {
  World world = MakeWorld(config);
  const Environment& env = *world.env;
  const std::uint64_t master = MasterSeed(config);
  PolicyProfile policy(env.state_dim(), env.grid().num_cells(), env.steps(),
                       env.action_bound(), config.policy_hidden,
                       StreamSeed(master, kPolicyInit, 0));
  TrueModel model(env);
  const std::vector<double> zero(env.steps(), 0.0);
  PolicyOptResult opt = OptimizePolicy(std::move(policy), env, model, world.spec, zero,
                                       config.lipschitz, config.optimizer,
                                       world.mu0.mass());
  PlanResult plan{std::move(opt.policy), {}, std::move(opt.log)};
  plan.rollout = EvaluatePolicy(env, plan.policy, world.spec, config.optimizer.barrier,
                                world.mu0.mass());
  if (!out_dir.empty()) {
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    WriteText(dir / "config.snapshot", config.ToString());
    std::ofstream tl(dir / "training_log.csv");
    WriteTrainingLog(tl, plan.log);
    std::ofstream pc(dir / "policy.ckpt");
    plan.policy.Save(pc);
    std::ofstream steps = OpenCsv(dir / "plan.csv", "step,reward,h_value");
    for (int t = 0; t < env.steps(); ++t) {
      steps << t << ',' << plan.rollout.rewards[t] << ',' << plan.rollout.h_values[t]
            << '\n';
    }
    std::ofstream summary = OpenCsv(dir / "episodes.csv", "episode,objective");
    summary << 0 << ',' << plan.rollout.objective_value << '\n';
    std::ofstream dist = OpenCsv(dir / "distributions.csv", "episode,step,cell_index,mass");
    AppendDistributions(dist, 0, plan.rollout.masses);
    if (!tl || !pc) throw Error(ErrorCode::kIo, "cannot write plan artifacts");
  }
  return plan;
}

}  // namespace meadow

#pragma once

#include <string>
#include <vector>

#include "dts/agents.hpp"
#include "dts/config.hpp"
#include "dts/envs.hpp"
#include "dts/pretrain.hpp"

namespace dts {

struct ExperimentConfig {
  // [env]
  std::string env_type = "synthetic";  // synthetic | prior_file | movielens
  Index d = 5;
  int L = 2;
  Index K = 100;
  std::string reward = "linear";  // linear | logistic
  Real sigma = 1.0;               // linear reward noise std
  std::string links = "linear";   // synthetic chain links: linear | mlp
  Index hidden = 20;              // synthetic mlp width
  std::string context = "cube";   // cube | sphere
  std::vector<Real> sigma_levels;  // sigma_1..sigma_{L+1} (stds); empty or one value = broadcast 1
  std::vector<Index> sparsity;     // active columns d_l per level; empty = dense
  Real misspec = 0.0;              // v > 0 perturbs the agent prior by U[v, v+0.5] entries
  std::string prior_file;          // env_type = prior_file
  std::string ratings_file;        // env_type = movielens
  Index rank = 5;
  Real als_lambda = 0.1;
  int als_sweeps = 20;
  Index pretrain_samples = 0;  // > 0: agent prior is trained on fresh parameter draws
  TrainConfig pretrain;

  // [agent]
  std::vector<std::string> agents{"dts", "lints"};
  AgentOptions options;
  std::string agent_prior_file;  // explicit agent-side prior, overrides everything else

  // [run]
  int n = 2000;
  int runs = 20;
  std::uint64_t base_seed = 0;
  int jobs = 0;         // parallel runs; 0 = hardware concurrency
  std::string out_dir;  // empty: no files written
};

// Validates and resolves a parsed config; unknown keys are rejected.
ExperimentConfig parse_experiment(const ConfigMap& map);
// All resolved values written back, for the provenance copy.
ConfigMap resolved_config(const ExperimentConfig& cfg);

struct Environment {
  DiffusionPrior true_prior;   // instance generator (unused when fixed_instance)
  DiffusionPrior agent_prior;  // what the agents believe
  RewardModel reward = RewardModel::linear_gaussian(1.0);
  ContextSampler contexts;
  bool fixed_instance = false;  // movielens: same action parameters every run
  Mat fixed_thetas;
  Index K = 0;
  Index d = 0;
};

Environment build_environment(const ExperimentConfig& cfg);
BanditInstance draw_instance(const Environment& env, Rng& rng);

struct RegretTrace {
  int run = 0;
  std::vector<Index> actions;
  std::vector<Real> regret;      // instantaneous, against the context's best action
  std::vector<Real> cum_regret;  // running sum, non-decreasing
};

// One bandit simulation; the reward noise stream is consumed once per round
// regardless of the chosen action, so agents with matched seeds see common
// random numbers.
RegretTrace simulate_run(const BanditInstance& instance, Agent& agent, int n, int run_id,
                         Rng& context_rng, Rng& reward_rng, Rng& agent_rng);

struct AgentResult {
  std::string agent;
  std::vector<RegretTrace> traces;  // ordered by run id
  std::vector<Real> mean_regret;
  std::vector<Real> stderr_regret;
  std::vector<Real> mean_cum;
  std::vector<Real> stderr_cum;
  Real final_cum_mean = 0.0;
};

struct ExperimentResult {
  std::vector<AgentResult> agents;
};

// Runs every agent over `runs` instances with per-run matched streams and
// aggregates mean and standard error per round. When cfg.out_dir is set,
// writes <agent>.csv, <agent>_agg.csv, and config_resolved.ini there.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

struct BoundParams {
  int n = 100;
  Index d = 1;
  Index K = 1;
  int L = 1;
  Real delta = 0.01;
  Real sigma = 1.0;  // reward noise std
  Real c = 1.0;      // additive tail constant
  std::vector<Real> sigmas;     // sigma_1..sigma_{L+1} (stds)
  std::vector<Index> d_sparse;  // d_1..d_L active dims; empty = all d
};

struct BoundBreakdown {
  Real total = 0.0;
  Real sqrt_term = 0.0;
  Real tail = 0.0;   // c n delta (zero for the baseline order expressions)
  Real r_act = 0.0;  // diffusion variants only
  std::vector<Real> r_lat;
  Real sigma_max_sq = 0.0;
};

// variant: dts | dts_sparse | lints | hierts1 | hierts2. The dts variants
// evaluate the full finite bound; the baselines evaluate their order
// expressions with leading constant 1.
BoundBreakdown compute_bound(const BoundParams& p, const std::string& variant);

struct QualityReport {
  Real mean_l2 = 0.0;
  Real cov_frobenius = 0.0;
  Gaussian exact;
  Gaussian approx;
};

// Shares one linear-Gaussian data stream between the conjugate posterior under
// the Gaussian prior and the chain posterior under the learned prior. Linear
// learned priors are composed analytically; non-linear ones get a Gaussian fit
// to mc_samples hierarchical draws.
QualityReport posterior_quality_report(const Gaussian& true_prior, const DiffusionPrior& learned,
                                       int n, std::uint64_t seed, Real sigma = 1.0,
                                       Index mc_samples = 10000);

struct SweepRow {
  std::string variable;
  Real value = 0.0;
  Real ratio = 0.0;  // agent_a final cumulative regret / agent_b's (1e-9 floor)
  Real agent_a_final = 0.0;
  Real agent_b_final = 0.0;
};

// variable: K | L | d | pretrain_samples. Both agents run with matched seeds.
std::vector<SweepRow> regret_ratio_sweep(const ExperimentConfig& base, const std::string& variable,
                                         const std::vector<Real>& values,
                                         const std::string& agent_a = "lints",
                                         const std::string& agent_b = "dts");

// Header "variable,value,ratio,agent_a_final,agent_b_final".
void save_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);

}  // namespace dts

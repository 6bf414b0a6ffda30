#include "dts/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "dts/serialize.hpp"
#include "dts/stats.hpp"

namespace dts {

namespace {

void check_known_keys(const ConfigMap& map) {
  static const std::map<std::string, std::set<std::string>> known = {
      {"env",
       {"type", "d", "L", "K", "reward", "sigma", "links", "hidden", "context", "sigma_l",
        "sparsity", "misspec", "prior_file", "ratings", "rank", "als_lambda", "als_sweeps",
        "pretrain_samples", "pretrain_L", "pretrain_epochs", "pretrain_hidden", "pretrain_batch",
        "pretrain_lr", "pretrain_beta_min", "pretrain_beta_max"}},
      {"agent",
       {"names", "alpha", "lambda", "glmts_c", "lints_marginal_prior", "lints_sigma0_sq",
        "prior_file"}},
      {"run", {"n", "runs", "seed", "jobs", "out"}},
      {"bounds", {"n", "d", "K", "L", "delta", "sigma", "c", "sigma_l", "sparsity", "variant"}},
  };
  for (const auto& [section, keys] : map.sections()) {
    const auto it = known.find(section);
    if (it == known.end()) throw ValidationError("unknown config section [" + section + "]");
    for (const auto& [key, value] : keys)
      if (it->second.count(key) == 0)
        throw ValidationError("unknown config key " + section + "." + key);
  }
}

const std::set<std::string>& agent_names() {
  static const std::set<std::string> names = {"dts",   "lints",  "linucb", "hierts1", "hierts2",
                                              "glmts", "ucbglm", "oracle", "random"};
  return names;
}

std::vector<std::string> split_names(const std::string& text) {
  std::vector<std::string> names;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    names.push_back(item.substr(b, e - b + 1));
  }
  return names;
}

std::vector<Real> resolve_sigma_levels(const ExperimentConfig& cfg, int levels) {
  const std::size_t want = static_cast<std::size_t>(levels) + 1;
  std::vector<Real> out;
  if (cfg.sigma_levels.empty())
    out.assign(want, 1.0);
  else if (cfg.sigma_levels.size() == 1)
    out.assign(want, cfg.sigma_levels[0]);
  else if (cfg.sigma_levels.size() == want)
    out = cfg.sigma_levels;
  else
    throw ValidationError("sigma_l needs 1 or L+1 entries");
  for (Real s : out)
    if (!(s > 0.0)) throw ValidationError("sigma_l entries must be positive");
  return out;
}

std::string join_reals(const std::vector<Real>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ',';
    out += format_real(values[i]);
  }
  return out;
}

DiffusionPrior identity_prior(Index d) {
  DiffusionPrior prior;
  prior.d = d;
  prior.L = 1;
  prior.links.push_back(LinkFn::linear(Mat::Identity(d, d), 1, 1));
  prior.covs.push_back(Covariance::isotropic(d, 1.0));
  prior.top_cov = Covariance::isotropic(d, 1.0);
  return prior;
}

DiffusionPrior build_synthetic_prior(const ExperimentConfig& cfg, Rng& setup) {
  const Index d = cfg.d;
  DiffusionPrior prior;
  prior.d = d;
  prior.L = cfg.L;
  const std::vector<Real> sig = resolve_sigma_levels(cfg, cfg.L);
  if (!cfg.sparsity.empty() && cfg.sparsity.size() != static_cast<std::size_t>(cfg.L))
    throw ValidationError("sparsity needs one entry per level");
  for (int i = 0; i < cfg.L; ++i) {
    if (cfg.links == "linear") {
      Mat w = setup.uniform_mat(d, d, -1.0, 1.0);
      if (!cfg.sparsity.empty()) {
        const Index active = cfg.sparsity[static_cast<std::size_t>(i)];
        if (active < 1 || active > d)
          throw ValidationError("sparsity entries must lie in [1, d]");
        w.rightCols(d - active).setZero();
      }
      prior.links.push_back(LinkFn::linear(std::move(w), i + 1, cfg.L));
    } else {
      MlpNet net{setup.uniform_mat(cfg.hidden, d + 1, -1.0, 1.0),
                 setup.uniform_vec(cfg.hidden, -1.0, 1.0),
                 setup.uniform_mat(d, cfg.hidden, -1.0, 1.0), setup.uniform_vec(d, -1.0, 1.0)};
      prior.links.push_back(LinkFn::mlp_direct(std::move(net), i + 1, cfg.L));
    }
    prior.covs.push_back(Covariance::isotropic(d, sig[static_cast<std::size_t>(i)] *
                                                      sig[static_cast<std::size_t>(i)]));
  }
  const Real top = sig[static_cast<std::size_t>(cfg.L)];
  prior.top_cov = Covariance::isotropic(d, top * top);
  prior.validate();
  return prior;
}

DiffusionPrior perturb_prior(const DiffusionPrior& prior, Real v, Rng& rng) {
  const Index d = prior.d;
  DiffusionPrior out = prior;
  for (int i = 0; i < prior.L; ++i) {
    out.links[static_cast<std::size_t>(i)].w += rng.uniform_mat(d, d, v, v + 0.5);
    out.covs[static_cast<std::size_t>(i)] = Covariance::psd_projected(
        prior.covs[static_cast<std::size_t>(i)].matrix() + rng.uniform_mat(d, d, v, v + 0.5));
  }
  out.top_cov =
      Covariance::psd_projected(prior.top_cov.matrix() + rng.uniform_mat(d, d, v, v + 0.5));
  return out;
}

Mat pretraining_samples(const Environment& env, Index count, Rng& rng) {
  Mat samples(count, env.d);
  if (env.fixed_instance) {
    const auto pool = static_cast<std::uint64_t>(env.fixed_thetas.rows());
    for (Index i = 0; i < count; ++i)
      samples.row(i) = env.fixed_thetas.row(static_cast<Index>(rng.below(pool)));
    return samples;
  }
  for (Index i = 0; i < count; ++i)
    samples.row(i) = prior_sample(env.true_prior, 1, rng).thetas.row(0);
  return samples;
}

void write_trace_csv(const std::string& path, const std::vector<RegretTrace>& traces) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out << "run,round,action,regret,cum_regret\n";
  for (const RegretTrace& trace : traces)
    for (std::size_t t = 0; t < trace.regret.size(); ++t)
      out << trace.run << ',' << t + 1 << ',' << trace.actions[t] << ','
          << format_real(trace.regret[t]) << ',' << format_real(trace.cum_regret[t]) << '\n';
}

void write_agg_csv(const std::string& path, const AgentResult& result) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out << "round,mean_regret,stderr,mean_cum,stderr_cum\n";
  for (std::size_t t = 0; t < result.mean_regret.size(); ++t)
    out << t + 1 << ',' << format_real(result.mean_regret[t]) << ','
        << format_real(result.stderr_regret[t]) << ',' << format_real(result.mean_cum[t]) << ','
        << format_real(result.stderr_cum[t]) << '\n';
}

// Two-pass mean and standard error down one round across runs.
void mean_stderr(const std::vector<Real>& values, Real& mean, Real& se) {
  const auto count = static_cast<Real>(values.size());
  mean = 0.0;
  for (Real v : values) mean += v;
  mean /= count;
  if (values.size() < 2) {
    se = 0.0;
    return;
  }
  Real ss = 0.0;
  for (Real v : values) ss += (v - mean) * (v - mean);
  se = std::sqrt(ss / (count - 1.0) / count);
}

void aggregate(AgentResult& result, int n) {
  result.mean_regret.resize(static_cast<std::size_t>(n));
  result.stderr_regret.resize(static_cast<std::size_t>(n));
  result.mean_cum.resize(static_cast<std::size_t>(n));
  result.stderr_cum.resize(static_cast<std::size_t>(n));
  std::vector<Real> regret(result.traces.size());
  std::vector<Real> cum(result.traces.size());
  for (int t = 0; t < n; ++t) {
    for (std::size_t r = 0; r < result.traces.size(); ++r) {
      regret[r] = result.traces[r].regret[static_cast<std::size_t>(t)];
      cum[r] = result.traces[r].cum_regret[static_cast<std::size_t>(t)];
    }
    const auto idx = static_cast<std::size_t>(t);
    mean_stderr(regret, result.mean_regret[idx], result.stderr_regret[idx]);
    mean_stderr(cum, result.mean_cum[idx], result.stderr_cum[idx]);
  }
  result.final_cum_mean = result.mean_cum.back();
}

}  // namespace

ExperimentConfig parse_experiment(const ConfigMap& map) {
  check_known_keys(map);
  ExperimentConfig cfg;

  cfg.env_type = map.get("env", "type", cfg.env_type);
  if (cfg.env_type != "synthetic" && cfg.env_type != "prior_file" && cfg.env_type != "movielens")
    throw ValidationError("env.type must be synthetic, prior_file, or movielens");
  cfg.d = static_cast<Index>(map.get_int("env", "d", cfg.d));
  cfg.L = static_cast<int>(map.get_int("env", "L", cfg.L));
  cfg.K = static_cast<Index>(map.get_int("env", "K", cfg.K));
  if (cfg.d < 1 || cfg.L < 1 || cfg.K < 1)
    throw ValidationError("env.d, env.L, and env.K must be positive");
  cfg.reward = map.get("env", "reward", cfg.reward);
  if (cfg.reward != "linear" && cfg.reward != "logistic")
    throw ValidationError("env.reward must be linear or logistic");
  cfg.sigma = map.get_real("env", "sigma", cfg.sigma);
  if (!(cfg.sigma > 0.0)) throw ValidationError("env.sigma must be positive");
  cfg.links = map.get("env", "links", cfg.links);
  if (cfg.links != "linear" && cfg.links != "mlp")
    throw ValidationError("env.links must be linear or mlp");
  cfg.hidden = static_cast<Index>(map.get_int("env", "hidden", cfg.hidden));
  if (cfg.hidden < 1) throw ValidationError("env.hidden must be positive");
  cfg.context = map.get("env", "context", cfg.context);
  if (cfg.context != "cube" && cfg.context != "sphere")
    throw ValidationError("env.context must be cube or sphere");
  cfg.sigma_levels = map.get_real_list("env", "sigma_l");
  for (Real v : map.get_real_list("env", "sparsity")) {
    const Real rounded = std::floor(v + 0.5);
    if (rounded != v) throw ValidationError("env.sparsity entries must be integers");
    cfg.sparsity.push_back(static_cast<Index>(rounded));
  }
  cfg.misspec = map.get_real("env", "misspec", 0.0);
  if (cfg.misspec < 0.0) throw ValidationError("env.misspec must be non-negative");
  cfg.prior_file = map.get("env", "prior_file", "");
  cfg.ratings_file = map.get("env", "ratings", "");
  if (cfg.env_type == "prior_file" && cfg.prior_file.empty())
    throw ValidationError("env.prior_file is required when env.type = prior_file");
  if (cfg.env_type == "movielens" && cfg.ratings_file.empty())
    throw ValidationError("env.ratings is required when env.type = movielens");
  if (cfg.env_type == "movielens" && cfg.reward != "linear")
    throw ValidationError("the ratings environment supports linear rewards only");
  cfg.rank = static_cast<Index>(map.get_int("env", "rank", cfg.rank));
  cfg.als_lambda = map.get_real("env", "als_lambda", cfg.als_lambda);
  cfg.als_sweeps = static_cast<int>(map.get_int("env", "als_sweeps", cfg.als_sweeps));
  if (cfg.rank < 1 || !(cfg.als_lambda > 0.0) || cfg.als_sweeps < 1)
    throw ValidationError("invalid factorization settings");
  cfg.pretrain_samples = static_cast<Index>(map.get_int("env", "pretrain_samples", 0));
  if (cfg.pretrain_samples < 0) throw ValidationError("env.pretrain_samples must be non-negative");
  cfg.pretrain.L = static_cast<int>(map.get_int("env", "pretrain_L", 10));
  cfg.pretrain.epochs = static_cast<int>(map.get_int("env", "pretrain_epochs", 2000));
  cfg.pretrain.hidden = static_cast<Index>(map.get_int("env", "pretrain_hidden", 64));
  cfg.pretrain.batch = static_cast<Index>(map.get_int("env", "pretrain_batch", 2048));
  cfg.pretrain.lr = map.get_real("env", "pretrain_lr", 1e-3);
  cfg.pretrain.beta_min = map.get_real("env", "pretrain_beta_min", 1e-4);
  cfg.pretrain.beta_max = map.get_real("env", "pretrain_beta_max", 0.2);
  if (cfg.misspec > 0.0 && cfg.pretrain_samples > 0)
    throw ValidationError("misspec and pretrain_samples are mutually exclusive");

  cfg.agents = split_names(map.get("agent", "names", "dts,lints"));
  if (cfg.agents.empty()) throw ValidationError("agent.names must list at least one agent");
  std::set<std::string> seen;
  for (const std::string& name : cfg.agents) {
    if (agent_names().count(name) == 0) throw ValidationError("unknown agent: " + name);
    if (!seen.insert(name).second) throw ValidationError("duplicate agent: " + name);
  }
  cfg.options.alpha = map.get_real("agent", "alpha", cfg.options.alpha);
  cfg.options.lambda = map.get_real("agent", "lambda", cfg.options.lambda);
  cfg.options.glmts_c = map.get_real("agent", "glmts_c", cfg.options.glmts_c);
  cfg.options.lints_marginal_prior =
      map.get_bool("agent", "lints_marginal_prior", cfg.options.lints_marginal_prior);
  cfg.options.lints_sigma0_sq =
      map.get_real("agent", "lints_sigma0_sq", cfg.options.lints_sigma0_sq);
  cfg.agent_prior_file = map.get("agent", "prior_file", "");

  cfg.n = static_cast<int>(map.get_int("run", "n", cfg.n));
  cfg.runs = static_cast<int>(map.get_int("run", "runs", cfg.runs));
  if (cfg.n < 1 || cfg.runs < 1) throw ValidationError("run.n and run.runs must be positive");
  const long long seed = map.get_int("run", "seed", 0);
  if (seed < 0) throw ValidationError("run.seed must be non-negative");
  cfg.base_seed = static_cast<std::uint64_t>(seed);
  cfg.jobs = static_cast<int>(map.get_int("run", "jobs", 0));
  if (cfg.jobs < 0) throw ValidationError("run.jobs must be non-negative");
  cfg.out_dir = map.get("run", "out", "");
  return cfg;
}

ConfigMap resolved_config(const ExperimentConfig& cfg) {
  ConfigMap map;
  map.set("env", "type", cfg.env_type);
  map.set("env", "d", std::to_string(cfg.d));
  map.set("env", "L", std::to_string(cfg.L));
  map.set("env", "K", std::to_string(cfg.K));
  map.set("env", "reward", cfg.reward);
  map.set("env", "sigma", format_real(cfg.sigma));
  map.set("env", "links", cfg.links);
  map.set("env", "hidden", std::to_string(cfg.hidden));
  map.set("env", "context", cfg.context);
  if (cfg.env_type != "movielens")
    map.set("env", "sigma_l", join_reals(resolve_sigma_levels(cfg, cfg.L)));
  if (!cfg.sparsity.empty()) {
    std::string items;
    for (std::size_t i = 0; i < cfg.sparsity.size(); ++i) {
      if (i > 0) items += ',';
      items += std::to_string(cfg.sparsity[i]);
    }
    map.set("env", "sparsity", items);
  }
  map.set("env", "misspec", format_real(cfg.misspec));
  if (!cfg.prior_file.empty()) map.set("env", "prior_file", cfg.prior_file);
  if (!cfg.ratings_file.empty()) {
    map.set("env", "ratings", cfg.ratings_file);
    map.set("env", "rank", std::to_string(cfg.rank));
    map.set("env", "als_lambda", format_real(cfg.als_lambda));
    map.set("env", "als_sweeps", std::to_string(cfg.als_sweeps));
  }
  if (cfg.pretrain_samples > 0) {
    map.set("env", "pretrain_samples", std::to_string(cfg.pretrain_samples));
    map.set("env", "pretrain_L", std::to_string(cfg.pretrain.L));
    map.set("env", "pretrain_epochs", std::to_string(cfg.pretrain.epochs));
    map.set("env", "pretrain_hidden", std::to_string(cfg.pretrain.hidden));
    map.set("env", "pretrain_batch", std::to_string(cfg.pretrain.batch));
    map.set("env", "pretrain_lr", format_real(cfg.pretrain.lr));
    map.set("env", "pretrain_beta_min", format_real(cfg.pretrain.beta_min));
    map.set("env", "pretrain_beta_max", format_real(cfg.pretrain.beta_max));
  }

  std::string names;
  for (std::size_t i = 0; i < cfg.agents.size(); ++i) {
    if (i > 0) names += ',';
    names += cfg.agents[i];
  }
  map.set("agent", "names", names);
  map.set("agent", "alpha", format_real(cfg.options.alpha));
  map.set("agent", "lambda", format_real(cfg.options.lambda));
  map.set("agent", "glmts_c", format_real(cfg.options.glmts_c));
  map.set("agent", "lints_marginal_prior", cfg.options.lints_marginal_prior ? "true" : "false");
  map.set("agent", "lints_sigma0_sq", format_real(cfg.options.lints_sigma0_sq));
  if (!cfg.agent_prior_file.empty()) map.set("agent", "prior_file", cfg.agent_prior_file);

  map.set("run", "n", std::to_string(cfg.n));
  map.set("run", "runs", std::to_string(cfg.runs));
  map.set("run", "seed", std::to_string(cfg.base_seed));
  map.set("run", "jobs", std::to_string(cfg.jobs));
  if (!cfg.out_dir.empty()) map.set("run", "out", cfg.out_dir);
  return map;
}

Environment build_environment(const ExperimentConfig& cfg) {
  Environment env;
  env.reward = cfg.reward == "logistic" ? RewardModel::logistic()
                                        : RewardModel::linear_gaussian(cfg.sigma);
  Rng setup = Rng::stream(cfg.base_seed, Stream::kSetup);

  if (cfg.env_type == "movielens") {
    const RatingsTable table = ingest_ratings(cfg.ratings_file);
    const FactorModel factors = als_factorize(table, cfg.rank, cfg.als_lambda, cfg.als_sweeps);
    const BanditInstance instance = movielens_instance(factors, cfg.sigma);
    env.fixed_instance = true;
    env.fixed_thetas = instance.thetas;
    env.contexts = instance.contexts;
    env.reward = instance.reward;
    env.K = instance.K;
    env.d = instance.d;
    env.true_prior = identity_prior(env.d);
  } else if (cfg.env_type == "prior_file") {
    env.true_prior = load_prior(cfg.prior_file);
    env.d = env.true_prior.d;
    env.K = cfg.K;
    env.contexts = cfg.context == "sphere" ? ContextSampler::unit_sphere(env.d)
                                           : ContextSampler::uniform_cube(env.d);
  } else {
    env.true_prior = build_synthetic_prior(cfg, setup);
    env.d = cfg.d;
    env.K = cfg.K;
    env.contexts = cfg.context == "sphere" ? ContextSampler::unit_sphere(env.d)
                                           : ContextSampler::uniform_cube(env.d);
  }
  env.agent_prior = env.true_prior;

  if (cfg.misspec > 0.0) {
    if (!env.agent_prior.linear())
      throw ValidationError("misspec requires linear links");
    env.agent_prior = perturb_prior(env.agent_prior, cfg.misspec, setup);
  }
  if (cfg.pretrain_samples > 0) {
    const Mat samples = pretraining_samples(env, cfg.pretrain_samples, setup);
    TrainConfig train_cfg = cfg.pretrain;
    train_cfg.seed = cfg.base_seed;
    env.agent_prior = train(samples, train_cfg).prior;
  }
  if (!cfg.agent_prior_file.empty()) {
    env.agent_prior = load_prior(cfg.agent_prior_file);
    if (env.agent_prior.d != env.d)
      throw ValidationError("agent prior dimension does not match the environment");
  }
  return env;
}

BanditInstance draw_instance(const Environment& env, Rng& rng) {
  if (env.fixed_instance) {
    BanditInstance instance;
    instance.thetas = env.fixed_thetas;
    instance.reward = env.reward;
    instance.contexts = env.contexts;
    instance.K = env.fixed_thetas.rows();
    instance.d = env.d;
    return instance;
  }
  BanditInstance instance = sample_instance(env.true_prior, env.K, env.reward, rng);
  instance.contexts = env.contexts;
  return instance;
}

RegretTrace simulate_run(const BanditInstance& instance, Agent& agent, int n, int run_id,
                         Rng& context_rng, Rng& reward_rng, Rng& agent_rng) {
  RegretTrace trace;
  trace.run = run_id;
  trace.actions.reserve(static_cast<std::size_t>(n));
  trace.regret.reserve(static_cast<std::size_t>(n));
  trace.cum_regret.reserve(static_cast<std::size_t>(n));
  Real cum = 0.0;
  for (int t = 0; t < n; ++t) {
    const Vec x = instance.contexts.sample(context_rng);
    const Decision decision = agent.act(x, agent_rng);
    const Vec dots = instance.thetas * x;
    // The mean function is monotone, so the best dot gives the best action.
    const Real regret =
        instance.reward.mean(dots.maxCoeff()) - instance.reward.mean(dots[decision.action]);
    Real y;
    if (instance.reward.kind == RewardModel::Kind::kLinearGaussian)
      y = dots[decision.action] + instance.reward.sigma * reward_rng.normal();
    else
      y = reward_rng.uniform01() < sigmoid(dots[decision.action]) ? 1.0 : 0.0;
    agent.update(x, decision.action, y);
    cum += regret;
    trace.actions.push_back(decision.action);
    trace.regret.push_back(regret);
    trace.cum_regret.push_back(cum);
  }
  return trace;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const Environment env = build_environment(cfg);

  ExperimentResult result;
  result.agents.resize(cfg.agents.size());
  for (std::size_t i = 0; i < cfg.agents.size(); ++i) {
    result.agents[i].agent = cfg.agents[i];
    result.agents[i].traces.resize(static_cast<std::size_t>(cfg.runs));
  }

  const auto process_run = [&](int r) {
    const std::uint64_t run_seed = cfg.base_seed + static_cast<std::uint64_t>(r);
    Rng instance_rng = Rng::stream(run_seed, Stream::kInstance);
    BanditInstance instance = draw_instance(env, instance_rng);
    instance.n = cfg.n;
    for (std::size_t i = 0; i < cfg.agents.size(); ++i) {
      Rng context_rng = Rng::stream(run_seed, Stream::kContexts);
      Rng reward_rng = Rng::stream(run_seed, Stream::kRewards);
      Rng agent_rng = Rng::stream(run_seed, Stream::kAgent);
      const auto agent = make_agent(cfg.agents[i], env.agent_prior, instance.reward, instance.K,
                                    cfg.options, &instance.thetas);
      result.agents[i].traces[static_cast<std::size_t>(r)] =
          simulate_run(instance, *agent, cfg.n, r, context_rng, reward_rng, agent_rng);
    }
  };

  int jobs = cfg.jobs > 0 ? cfg.jobs : static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::max(1, std::min(jobs, cfg.runs));
  if (jobs == 1) {
    for (int r = 0; r < cfg.runs; ++r) process_run(r);
  } else {
    std::atomic<int> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    const auto worker = [&]() {
      try {
        while (true) {
          const int r = next.fetch_add(1);
          if (r >= cfg.runs) break;
          process_run(r);
        }
      } catch (...) {
        const std::lock_guard<std::mutex> hold(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(jobs));
    for (int i = 0; i < jobs; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  for (AgentResult& agent_result : result.agents) aggregate(agent_result, cfg.n);

  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    for (const AgentResult& agent_result : result.agents) {
      write_trace_csv(cfg.out_dir + "/" + agent_result.agent + ".csv", agent_result.traces);
      write_agg_csv(cfg.out_dir + "/" + agent_result.agent + "_agg.csv", agent_result);
    }
    std::ofstream out(cfg.out_dir + "/config_resolved.ini");
    if (!out) throw ValidationError("cannot write " + cfg.out_dir + "/config_resolved.ini");
    out << serialize_ini(resolved_config(cfg));
  }
  return result;
}

BoundBreakdown compute_bound(const BoundParams& p, const std::string& variant) {
  if (p.n < 1 || p.d < 1 || p.K < 1 || p.L < 1) throw ValidationError("bound sizes must be positive");
  if (!(p.delta > 0.0) || !(p.delta < 1.0)) throw ValidationError("delta must lie in (0, 1)");
  if (!(p.sigma > 0.0)) throw ValidationError("sigma must be positive");
  if (p.c < 0.0) throw ValidationError("c must be non-negative");
  if (p.sigmas.size() != static_cast<std::size_t>(p.L) + 1)
    throw ValidationError("need sigma_1..sigma_{L+1}");
  for (Real s : p.sigmas)
    if (!(s > 0.0)) throw ValidationError("sigma_l entries must be positive");
  if (!p.d_sparse.empty()) {
    if (p.d_sparse.size() != static_cast<std::size_t>(p.L))
      throw ValidationError("need d_1..d_L sparse dims");
    for (Index dl : p.d_sparse)
      if (dl < 1 || dl > p.d) throw ValidationError("sparse dims must lie in [1, d]");
  }

  const Real n = static_cast<Real>(p.n);
  const Real d = static_cast<Real>(p.d);
  const Real K = static_cast<Real>(p.K);
  const auto var = [&](int level) {  // sigma_level^2, 1-based
    const Real s = p.sigmas[static_cast<std::size_t>(level - 1)];
    return s * s;
  };

  BoundBreakdown out;
  if (variant == "lints") {
    Real total_var = 0.0;
    for (int l = 1; l <= p.L + 1; ++l) total_var += var(l);
    out.sqrt_term = std::sqrt(n * d * K * total_var);
    out.total = out.sqrt_term;
    return out;
  }
  if (variant == "hierts1") {
    Real lower = 0.0;
    for (int l = 1; l <= p.L; ++l) lower += var(l);
    out.sqrt_term = std::sqrt(n * d * (K * lower + static_cast<Real>(p.L) * var(p.L + 1)));
    out.total = out.sqrt_term;
    return out;
  }
  if (variant == "hierts2") {
    Real upper = 0.0;
    for (int l = 2; l <= p.L + 1; ++l) upper += var(l);
    out.sqrt_term = std::sqrt(n * d * (K * var(1) + upper));
    out.total = out.sqrt_term;
    return out;
  }
  if (variant != "dts" && variant != "dts_sparse")
    throw ValidationError("unknown bound variant: " + variant);

  const Real noise_var = p.sigma * p.sigma;
  Real sigma_max_sq = 0.0;
  for (int l = 1; l <= p.L + 1; ++l)
    sigma_max_sq = std::max(sigma_max_sq, 1.0 + var(l) / noise_var);
  out.sigma_max_sq = sigma_max_sq;

  out.r_act = var(1) / std::log1p(var(1)) * d * K * std::log1p(n * var(1) / d);
  Real sum = out.r_act;
  Real smax_pow = 1.0;
  for (int l = 1; l <= p.L; ++l) {
    smax_pow *= sigma_max_sq;
    const Real dim = variant == "dts_sparse" && !p.d_sparse.empty()
                         ? static_cast<Real>(p.d_sparse[static_cast<std::size_t>(l - 1)])
                         : d;
    const Real c_l = var(l + 1) * smax_pow / std::log1p(var(l + 1));
    const Real r_l = c_l * dim * std::log1p(var(l + 1) / var(l));
    out.r_lat.push_back(r_l);
    sum += r_l;
  }
  out.sqrt_term = std::sqrt(2.0 * n * sum * std::log(1.0 / p.delta));
  out.tail = p.c * n * p.delta;
  out.total = out.sqrt_term + out.tail;
  return out;
}

QualityReport posterior_quality_report(const Gaussian& true_prior, const DiffusionPrior& learned,
                                       int n, std::uint64_t seed, Real sigma, Index mc_samples) {
  const Index d = true_prior.mean.size();
  if (d < 1 || d > 4) throw ValidationError("quality report supports dimensions 1 to 4");
  if (learned.d != d) throw ValidationError("prior dimension mismatch");
  if (n < 0) throw ValidationError("round count must be non-negative");
  if (!(sigma > 0.0)) throw ValidationError("sigma must be positive");
  if (mc_samples < 2) throw ValidationError("need at least two fit samples");
  learned.validate();

  Rng instance_rng = Rng::stream(seed, Stream::kInstance);
  const Vec theta_star = mvn_sample(true_prior.mean, true_prior.cov, instance_rng);
  Rng context_rng = Rng::stream(seed, Stream::kContexts);
  Rng reward_rng = Rng::stream(seed, Stream::kRewards);
  const ContextSampler sphere = ContextSampler::unit_sphere(d);

  ObservationLog log(d);
  for (int t = 0; t < n; ++t) {
    const Vec x = sphere.sample(context_rng);
    log.append(x, x.dot(theta_star) + sigma * reward_rng.normal());
  }

  QualityReport report;
  const Real inv_noise = 1.0 / (sigma * sigma);
  const Mat& p0 = true_prior.cov.precision();
  const Mat cov = chol_inverse(p0 + inv_noise * log.xtx());
  report.exact = {Vec(cov * (p0 * true_prior.mean + inv_noise * log.xty())), Covariance(cov)};

  const RewardModel model = RewardModel::linear_gaussian(sigma);
  const std::vector<ActionStats> stats{fit(log, model, 0.0)};
  const PosteriorChain chain = chain_update(
      learned, stats, learned.linear() ? ChainMode::kLinearExact : ChainMode::kNonLinearApprox);
  if (learned.linear()) {
    report.approx = action_marginal(chain, 0);
  } else {
    Rng eval_rng = Rng::stream(seed, Stream::kEval);
    Mat draws(mc_samples, d);
    for (Index i = 0; i < mc_samples; ++i)
      draws.row(i) = hierarchical_sample(chain, eval_rng).thetas.row(0);
    report.approx = {sample_mean(draws), Covariance::psd_projected(sample_cov(draws))};
  }
  report.mean_l2 = (report.approx.mean - report.exact.mean).norm();
  report.cov_frobenius = (report.approx.cov.matrix() - report.exact.cov.matrix()).norm();
  return report;
}

std::vector<SweepRow> regret_ratio_sweep(const ExperimentConfig& base, const std::string& variable,
                                         const std::vector<Real>& values,
                                         const std::string& agent_a, const std::string& agent_b) {
  if (values.empty()) throw ValidationError("sweep needs at least one value");
  if (variable != "K" && variable != "L" && variable != "d" && variable != "pretrain_samples")
    throw ValidationError("sweep variable must be K, L, d, or pretrain_samples");
  if (agent_names().count(agent_a) == 0) throw ValidationError("unknown agent: " + agent_a);
  if (agent_names().count(agent_b) == 0) throw ValidationError("unknown agent: " + agent_b);
  if ((variable == "L" || variable == "d") && base.sigma_levels.size() > 1)
    throw ValidationError("sweeping " + variable + " needs a broadcast sigma_l");
  if ((variable == "L" || variable == "d") && !base.sparsity.empty())
    throw ValidationError("sweeping " + variable + " is incompatible with fixed sparsity dims");

  std::vector<SweepRow> rows;
  rows.reserve(values.size());
  for (const Real value : values) {
    ExperimentConfig cfg = base;
    cfg.agents = {agent_a, agent_b};
    cfg.out_dir.clear();
    const auto as_count = [&](Index floor_at) {
      const Real rounded = std::floor(value + 0.5);
      if (rounded != value || rounded < static_cast<Real>(floor_at))
        throw ValidationError("sweep value must be an integer >= " + std::to_string(floor_at));
      return static_cast<Index>(rounded);
    };
    if (variable == "K")
      cfg.K = as_count(1);
    else if (variable == "L")
      cfg.L = static_cast<int>(as_count(1));
    else if (variable == "d")
      cfg.d = as_count(1);
    else
      cfg.pretrain_samples = as_count(1);

    const ExperimentResult result = run_experiment(cfg);
    SweepRow row;
    row.variable = variable;
    row.value = value;
    row.agent_a_final = result.agents[0].final_cum_mean;
    row.agent_b_final = result.agents[1].final_cum_mean;
    row.ratio = row.agent_a_final / std::max(row.agent_b_final, 1e-9);
    rows.push_back(row);
  }
  return rows;
}

void save_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  out << "variable,value,ratio,agent_a_final,agent_b_final\n";
  for (const SweepRow& row : rows)
    out << row.variable << ',' << format_real(row.value) << ',' << format_real(row.ratio) << ','
        << format_real(row.agent_a_final) << ',' << format_real(row.agent_b_final) << '\n';
}

}  // namespace dts

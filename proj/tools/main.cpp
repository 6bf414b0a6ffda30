/// Command line front end: pretraining, experiments, sweeps, bounds, and
/// posterior quality checks for the diffusion-prior bandit engine.

#include "CLI11.hpp"

#include "dts/config.hpp"
#include "dts/errors.hpp"
#include "dts/harness.hpp"
#include "dts/pretrain.hpp"
#include "dts/serialize.hpp"

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

namespace {

using dts::Real;

void apply_sets(dts::ConfigMap& map, const std::vector<std::string>& sets) {
  for (const std::string& item : sets) dts::apply_override(map, item);
}

int do_pretrain(const std::string& samples_path, const std::string& out_path,
                const std::string& loss_path, const dts::TrainConfig& cfg) {
  const dts::Mat samples = dts::load_samples_csv(samples_path);
  const dts::TrainResult result = dts::train(samples, cfg);
  dts::save_prior(out_path, result.prior);
  if (!loss_path.empty()) dts::save_loss_csv(loss_path, result.loss);
  std::cout << "wrote prior: " << out_path << " (d=" << result.prior.d
            << ", L=" << result.prior.L << ", final_loss="
            << dts::format_real(result.loss.empty() ? 0.0 : result.loss.back())
            << ")\n";
  return 0;
}

int do_run(const CLI::App* cmd, const std::string& config_path,
           const std::string& out_dir, std::uint64_t seed, int jobs,
           const std::vector<std::string>& sets) {
  dts::ConfigMap map = dts::load_ini(config_path);
  apply_sets(map, sets);
  dts::ExperimentConfig cfg = dts::parse_experiment(map);
  if (cmd->count("--out") > 0) cfg.out_dir = out_dir;
  if (cmd->count("--seed") > 0) cfg.base_seed = seed;
  if (cmd->count("--jobs") > 0) cfg.jobs = jobs;
  const dts::ExperimentResult results = dts::run_experiment(cfg);
  for (const dts::AgentResult& res : results.agents) {
    const dts::Real se =
        res.stderr_cum.empty() ? 0.0 : res.stderr_cum.back();
    std::cout << res.agent << ": final regret "
              << dts::format_real(res.final_cum_mean) << " +- "
              << dts::format_real(se) << " over " << res.traces.size()
              << " runs\n";
  }
  if (!cfg.out_dir.empty()) std::cout << "wrote results to " << cfg.out_dir << "\n";
  return 0;
}

int do_sweep(const CLI::App* cmd, const std::string& config_path,
             const std::string& variable, const std::string& values_text,
             const std::string& out_path, const std::string& agent_a,
             const std::string& agent_b, std::uint64_t seed, int jobs,
             const std::vector<std::string>& sets) {
  dts::ConfigMap map = dts::load_ini(config_path);
  apply_sets(map, sets);
  dts::ExperimentConfig cfg = dts::parse_experiment(map);
  if (cmd->count("--seed") > 0) cfg.base_seed = seed;
  if (cmd->count("--jobs") > 0) cfg.jobs = jobs;
  const std::vector<Real> values = dts::parse_real_list(values_text);
  const std::vector<dts::SweepRow> rows =
      dts::regret_ratio_sweep(cfg, variable, values, agent_a, agent_b);
  std::cout << "variable,value,ratio," << agent_a << "_final," << agent_b
            << "_final\n";
  for (const dts::SweepRow& row : rows) {
    std::cout << row.variable << ',' << dts::format_real(row.value) << ','
              << dts::format_real(row.ratio) << ','
              << dts::format_real(row.agent_a_final) << ','
              << dts::format_real(row.agent_b_final) << '\n';
  }
  if (!out_path.empty()) {
    dts::save_sweep_csv(out_path, rows);
    std::cout << "wrote sweep to " << out_path << "\n";
  }
  return 0;
}

void load_bound_section(const dts::ConfigMap& map, dts::BoundParams& p,
                        std::string& variant) {
  p.n = static_cast<int>(map.get_int("bounds", "n", p.n));
  p.d = static_cast<int>(map.get_int("bounds", "d", p.d));
  p.K = static_cast<int>(map.get_int("bounds", "K", p.K));
  p.L = static_cast<int>(map.get_int("bounds", "L", p.L));
  p.delta = map.get_real("bounds", "delta", p.delta);
  p.sigma = map.get_real("bounds", "sigma", p.sigma);
  p.c = map.get_real("bounds", "c", p.c);
  if (map.has("bounds", "sigma_l")) {
    const std::vector<Real> vals = map.get_real_list("bounds", "sigma_l");
    p.sigmas.assign(vals.begin(), vals.end());
  }
  if (map.has("bounds", "sparsity")) {
    p.d_sparse.clear();
    for (const Real v : map.get_real_list("bounds", "sparsity"))
      p.d_sparse.push_back(static_cast<int>(v));
  }
  variant = map.get("bounds", "variant", variant);
}

int do_bounds(const CLI::App* cmd, const std::string& config_path,
              dts::BoundParams p, const std::string& sigmas_text,
              const std::string& sparse_text, const std::string& variant_flag) {
  dts::BoundParams base;
  std::string variant = "dts";
  if (!config_path.empty()) {
    const dts::ConfigMap map = dts::load_ini(config_path);
    load_bound_section(map, base, variant);
  }
  // Command line flags win over config values.
  if (cmd->count("--n") == 0) p.n = base.n;
  if (cmd->count("--d") == 0) p.d = base.d;
  if (cmd->count("--K") == 0) p.K = base.K;
  if (cmd->count("--L") == 0) p.L = base.L;
  if (cmd->count("--delta") == 0) p.delta = base.delta;
  if (cmd->count("--sigma") == 0) p.sigma = base.sigma;
  if (cmd->count("--c") == 0) p.c = base.c;
  if (cmd->count("--variant") > 0) variant = variant_flag;
  if (cmd->count("--sigmas") > 0) {
    const std::vector<Real> vals = dts::parse_real_list(sigmas_text);
    p.sigmas.assign(vals.begin(), vals.end());
  } else {
    p.sigmas = base.sigmas;
  }
  if (cmd->count("--d-sparse") > 0) {
    p.d_sparse.clear();
    for (const Real v : dts::parse_real_list(sparse_text))
      p.d_sparse.push_back(static_cast<int>(v));
  } else {
    p.d_sparse = base.d_sparse;
  }
  if (p.delta <= 0.0) p.delta = 1.0 / static_cast<Real>(p.n);
  if (p.sigmas.empty()) p.sigmas.assign(static_cast<std::size_t>(p.L) + 1, 1.0);
  const dts::BoundBreakdown out = dts::compute_bound(p, variant);
  std::cout << "variant: " << variant << "\n"
            << "n=" << p.n << " d=" << p.d << " K=" << p.K << " L=" << p.L
            << " delta=" << dts::format_real(p.delta)
            << " sigma=" << dts::format_real(p.sigma) << "\n"
            << "sigma_max_sq: " << dts::format_real(out.sigma_max_sq) << "\n"
            << "r_act: " << dts::format_real(out.r_act) << "\n";
  for (std::size_t l = 0; l < out.r_lat.size(); ++l)
    std::cout << "r_lat_" << (l + 1) << ": " << dts::format_real(out.r_lat[l])
              << "\n";
  std::cout << "sqrt_term: " << dts::format_real(out.sqrt_term) << "\n"
            << "tail: " << dts::format_real(out.tail) << "\n"
            << "bound: " << dts::format_real(out.total) << "\n";
  return 0;
}

int do_quality(const std::string& prior_path, int n, std::uint64_t seed,
               Real sigma, Real true_sigma2, int mc_samples) {
  const dts::DiffusionPrior learned = dts::load_prior(prior_path);
  const dts::Gaussian truth{dts::Vec::Zero(learned.d),
                            dts::Covariance::isotropic(learned.d, true_sigma2)};
  const dts::QualityReport report = dts::posterior_quality_report(
      truth, learned, n, seed, sigma, mc_samples);
  std::cout << "mean_l2: " << dts::format_real(report.mean_l2) << "\n"
            << "cov_frobenius: " << dts::format_real(report.cov_frobenius)
            << "\n";
  return 0;
}

int do_inspect(const std::string& prior_path) {
  const dts::DiffusionPrior prior = dts::load_prior(prior_path);
  std::cout << "d: " << prior.d << "\nL: " << prior.L << "\nlinear: "
            << (prior.linear() ? "yes" : "no") << "\n";
  for (int l = 0; l < prior.L; ++l) {
    const dts::LinkFn& link = prior.links[static_cast<std::size_t>(l)];
    std::cout << "level " << (l + 1) << ": "
              << (link.kind == dts::LinkFn::Kind::kLinear ? "linear"
                                                          : "nonlinear")
              << " link, cov trace "
              << dts::format_real(
                     prior.covs[static_cast<std::size_t>(l)].matrix().trace())
              << "\n";
  }
  std::cout << "top cov trace: "
            << dts::format_real(prior.top_cov.matrix().trace()) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thompson sampling with diffusion model priors"};
  app.require_subcommand(1);

  // pretrain
  auto* pre = app.add_subcommand(
      "pretrain", "Fit a diffusion prior to parameter samples");
  std::string pre_samples;
  std::string pre_out;
  std::string pre_loss;
  dts::TrainConfig train_cfg;
  pre->add_option("--samples", pre_samples, "CSV of parameter samples (rows)")
      ->required();
  pre->add_option("--out", pre_out, "Output prior file")->required();
  pre->add_option("--loss-out", pre_loss, "Optional training loss CSV")
      ->capture_default_str();
  pre->add_option("--L", train_cfg.L, "Number of diffusion steps")
      ->capture_default_str();
  pre->add_option("--hidden", train_cfg.hidden, "Hidden width of the noise net")
      ->capture_default_str();
  pre->add_option("--lr", train_cfg.lr, "Adam learning rate")
      ->capture_default_str();
  pre->add_option("--epochs", train_cfg.epochs, "Training epochs")
      ->capture_default_str();
  pre->add_option("--batch", train_cfg.batch, "Batch size")
      ->capture_default_str();
  pre->add_option("--beta-min", train_cfg.beta_min, "Smallest noise rate")
      ->capture_default_str();
  pre->add_option("--beta-max", train_cfg.beta_max, "Largest noise rate")
      ->capture_default_str();
  pre->add_option("--seed", train_cfg.seed, "Random seed")
      ->capture_default_str();

  // run
  auto* run_cmd =
      app.add_subcommand("run", "Run a bandit experiment from a config file");
  std::string run_config;
  std::string run_out;
  std::uint64_t run_seed = 0;
  int run_jobs = 0;
  std::vector<std::string> run_sets;
  run_cmd->add_option("--config", run_config, "Experiment config (INI)")
      ->required();
  run_cmd->add_option("--out", run_out, "Output directory (overrides run.out)");
  run_cmd->add_option("--seed", run_seed, "Base seed (overrides run.seed)")
      ->capture_default_str();
  run_cmd->add_option("--jobs", run_jobs,
                      "Worker threads, 0 = all cores (overrides run.jobs)")
      ->capture_default_str();
  run_cmd->add_option("--set", run_sets,
                      "Override a config entry as section.key=value");

  // sweep
  auto* sweep_cmd = app.add_subcommand(
      "sweep", "Sweep one variable and report the regret ratio of two agents");
  std::string sweep_config;
  std::string sweep_var;
  std::string sweep_values;
  std::string sweep_out;
  std::string sweep_a = "lints";
  std::string sweep_b = "dts";
  std::uint64_t sweep_seed = 0;
  int sweep_jobs = 0;
  std::vector<std::string> sweep_sets;
  sweep_cmd->add_option("--config", sweep_config, "Experiment config (INI)")
      ->required();
  sweep_cmd
      ->add_option("--var", sweep_var,
                   "Swept variable: K, L, d, or pretrain_samples")
      ->required();
  sweep_cmd->add_option("--values", sweep_values, "Comma separated values")
      ->required();
  sweep_cmd->add_option("--out", sweep_out, "Output CSV path");
  sweep_cmd->add_option("--agent-a", sweep_a, "Numerator agent")
      ->capture_default_str();
  sweep_cmd->add_option("--agent-b", sweep_b, "Denominator agent")
      ->capture_default_str();
  sweep_cmd->add_option("--seed", sweep_seed, "Base seed (overrides run.seed)")
      ->capture_default_str();
  sweep_cmd
      ->add_option("--jobs", sweep_jobs, "Worker threads, 0 = all cores")
      ->capture_default_str();
  sweep_cmd->add_option("--set", sweep_sets,
                        "Override a config entry as section.key=value");

  // bounds
  auto* bounds_cmd = app.add_subcommand(
      "bounds", "Evaluate the analytic Bayes regret bound");
  dts::BoundParams bp;
  std::string bounds_sigmas;
  std::string bounds_sparse;
  std::string bounds_variant = "dts";
  std::string bounds_config;
  bounds_cmd->add_option("--n", bp.n, "Horizon")->capture_default_str();
  bounds_cmd->add_option("--d", bp.d, "Parameter dimension")
      ->capture_default_str();
  bounds_cmd->add_option("--K", bp.K, "Number of actions")
      ->capture_default_str();
  bounds_cmd->add_option("--L", bp.L, "Number of latent levels")
      ->capture_default_str();
  bounds_cmd->add_option("--sigmas", bounds_sigmas,
                         "Comma separated level scales sigma_1..sigma_{L+1}");
  bounds_cmd->add_option("--delta", bp.delta,
                         "Tail probability, <=0 means 1/n");
  bounds_cmd->add_option("--sigma", bp.sigma, "Reward noise scale")
      ->capture_default_str();
  bounds_cmd->add_option("--c", bp.c, "Tail regret constant")
      ->capture_default_str();
  bounds_cmd->add_option("--d-sparse", bounds_sparse,
                         "Comma separated effective dimensions d_1..d_L");
  bounds_cmd
      ->add_option("--variant", bounds_variant,
                   "dts, dts_sparse, lints, hierts1, or hierts2")
      ->capture_default_str();
  bounds_cmd->add_option("--config", bounds_config,
                         "Optional INI with a [bounds] section");

  // quality
  auto* quality_cmd = app.add_subcommand(
      "quality", "Compare a learned prior's posterior against the exact one");
  std::string quality_prior;
  int quality_n = 100;
  std::uint64_t quality_seed = 0;
  Real quality_sigma = 1.0;
  Real quality_true_sigma2 = 1.0;
  int quality_mc = 10000;
  quality_cmd->add_option("--prior", quality_prior, "Learned prior file")
      ->required();
  quality_cmd->add_option("--n", quality_n, "Number of observations")
      ->capture_default_str();
  quality_cmd->add_option("--seed", quality_seed, "Random seed")
      ->capture_default_str();
  quality_cmd->add_option("--sigma", quality_sigma, "Reward noise scale")
      ->capture_default_str();
  quality_cmd
      ->add_option("--true-sigma2", quality_true_sigma2,
                   "Isotropic variance of the reference Gaussian prior")
      ->capture_default_str();
  quality_cmd
      ->add_option("--mc", quality_mc,
                   "Posterior sample count for nonlinear priors")
      ->capture_default_str();

  // inspect-prior
  auto* inspect_cmd =
      app.add_subcommand("inspect-prior", "Print a prior file's structure");
  std::string inspect_path;
  inspect_cmd->add_option("--prior", inspect_path, "Prior file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 1;
  }

  try {
    if (pre->parsed())
      return do_pretrain(pre_samples, pre_out, pre_loss, train_cfg);
    if (run_cmd->parsed())
      return do_run(run_cmd, run_config, run_out, run_seed, run_jobs, run_sets);
    if (sweep_cmd->parsed())
      return do_sweep(sweep_cmd, sweep_config, sweep_var, sweep_values,
                      sweep_out, sweep_a, sweep_b, sweep_seed, sweep_jobs,
                      sweep_sets);
    if (bounds_cmd->parsed())
      return do_bounds(bounds_cmd, bounds_config, bp, bounds_sigmas,
                       bounds_sparse, bounds_variant);
    if (quality_cmd->parsed())
      return do_quality(quality_prior, quality_n, quality_seed, quality_sigma,
                        quality_true_sigma2, quality_mc);
    if (inspect_cmd->parsed()) return do_inspect(inspect_path);
  } catch (const dts::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

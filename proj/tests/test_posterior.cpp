/// Hierarchical-posterior unit tests: exact recursions against a brute-force
/// joint-Gaussian reference, prior recovery, sampling statistics, marginal
/// covariances, and the information-gain certificate.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "dts/posterior.hpp"
#include "dts/stats.hpp"
#include "oracles.hpp"

using namespace dts;

namespace {

DiffusionPrior identity_chain(Index d, int L, Real sigma2, Real top_sigma2) {
  DiffusionPrior prior;
  prior.d = d;
  prior.L = L;
  for (int l = 1; l <= L; ++l) {
    prior.links.push_back(LinkFn::linear(Mat::Identity(d, d), l, L));
    prior.covs.push_back(Covariance::isotropic(d, sigma2));
  }
  prior.top_cov = Covariance::isotropic(d, top_sigma2);
  return prior;
}

std::vector<ActionStats> empty_stats(Index d, Index K) {
  return std::vector<ActionStats>(static_cast<std::size_t>(K), ActionStats::empty(d));
}

struct History {
  std::vector<Index> actions;
  std::vector<Vec> contexts;
  Vec ys;
  std::vector<ActionStats> stats;
  std::vector<ObservationLog> logs;
};

History random_history(const DiffusionPrior& prior, Index K, Index T, Real sigma, Rng& rng) {
  History h;
  h.ys = Vec(T);
  h.logs.assign(static_cast<std::size_t>(K), ObservationLog(prior.d));
  const PriorDraw truth = prior_sample(prior, K, rng);
  for (Index t = 0; t < T; ++t) {
    const Index a = static_cast<Index>(rng.below(static_cast<std::uint64_t>(K)));
    const Vec x = rng.uniform_vec(prior.d, -1.0, 1.0);
    const Real y = x.dot(truth.thetas.row(a)) + sigma * rng.normal();
    h.actions.push_back(a);
    h.contexts.push_back(x);
    h.ys[t] = y;
    h.logs[static_cast<std::size_t>(a)].append(x, y);
  }
  const RewardModel model = RewardModel::linear_gaussian(sigma);
  for (Index a = 0; a < K; ++a) h.stats.push_back(fit(h.logs[static_cast<std::size_t>(a)], model, 0.0));
  return h;
}

// The worked 1-d instance: identity links, unit covariances, one observation
// (x=1, y=2) with unit reward noise.
PosteriorChain worked_chain(DiffusionPrior& prior, ChainMode mode) {
  prior = identity_chain(1, 1, 1.0, 1.0);
  ObservationLog log(1);
  Vec x(1);
  x << 1.0;
  log.append(x, 2.0);
  const ActionStats stats = fit(log, RewardModel::linear_gaussian(1.0), 0.0);
  return chain_update(prior, {stats}, mode);
}

}  // namespace

TEST_CASE("no data leaves every level at its prior") {
  Rng rng(3);
  const DiffusionPrior prior = testing::random_linear_prior(2, 3, rng);
  const PosteriorChain chain = chain_update(prior, empty_stats(2, 3), ChainMode::kLinearExact);
  for (int i = 0; i < prior.L; ++i) {
    const LatentLevelState& lvl = chain.levels[static_cast<std::size_t>(i)];
    CHECK(lvl.prior_only);
    CHECK(lvl.g_bar.isZero(1e-14));
    CHECK(lvl.b_bar.isZero(1e-14));
    const Mat& prior_cov =
        i + 1 < prior.L ? prior.covs[static_cast<std::size_t>(i + 1)].matrix() : prior.top_cov.matrix();
    CHECK((lvl.sigma_bar.matrix() - prior_cov).cwiseAbs().maxCoeff() <= 1e-12);
  }
  // Conditional action posterior equals the prior layer given the same psi.
  const Vec psi = rng.normal_vec(2);
  const Gaussian g = action_posterior(chain, 1, psi);
  CHECK(g.mean == link_apply(prior.links[0], psi));
  CHECK((g.cov.matrix() - prior.covs[0].matrix()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("one-observation scalar chain matches hand conditioning") {
  DiffusionPrior prior;
  const PosteriorChain chain = worked_chain(prior, ChainMode::kLinearExact);
  CHECK(chain.actions[0].sigma_hat.matrix()(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(chain.levels[0].g_bar(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(chain.levels[0].b_bar[0] == doctest::Approx(1.0).epsilon(1e-12));

  const Gaussian top = latent_posterior(chain, 2, Vec::Zero(1));
  CHECK(top.mean[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(top.cov.matrix()(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  const Gaussian marg = action_marginal(chain, 0);
  CHECK(marg.mean[0] == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(marg.cov.matrix()(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("identity links make both recursion modes coincide") {
  DiffusionPrior prior_a;
  const PosteriorChain exact = worked_chain(prior_a, ChainMode::kLinearExact);
  DiffusionPrior prior_b;
  const PosteriorChain approx = worked_chain(prior_b, ChainMode::kNonLinearApprox);
  CHECK((exact.levels[0].g_bar - approx.levels[0].g_bar).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK((exact.levels[0].b_bar - approx.levels[0].b_bar).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK((exact.levels[0].sigma_bar.matrix() - approx.levels[0].sigma_bar.matrix())
            .cwiseAbs()
            .maxCoeff() <= 1e-14);
}

TEST_CASE("action posterior interpolates prior and data") {
  const DiffusionPrior prior = identity_chain(1, 1, 1.0, 1.0);

  ActionStats none = ActionStats::empty(1);
  PosteriorChain chain = chain_update(prior, {none}, ChainMode::kLinearExact);
  Vec psi(1);
  psi << 0.7;
  const Gaussian pri = action_posterior(chain, 0, psi);
  CHECK(pri.mean[0] == 0.7);
  CHECK(pri.cov.matrix()(0, 0) == doctest::Approx(1.0).epsilon(1e-12));

  ActionStats unit = ActionStats::empty(1);
  unit.b_hat[0] = 2.0;
  unit.g_hat(0, 0) = 1.0;
  unit.count = 1;
  chain = chain_update(prior, {unit}, ChainMode::kLinearExact);
  const Gaussian mid = action_posterior(chain, 0, Vec::Zero(1));
  CHECK(mid.mean[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mid.cov.matrix()(0, 0) == doctest::Approx(0.5).epsilon(1e-12));

  ActionStats heavy = ActionStats::empty(1);
  heavy.b_hat[0] = 2.0;
  heavy.g_hat(0, 0) = 1e8;
  heavy.count = 1000;
  chain = chain_update(prior, {heavy}, ChainMode::kLinearExact);
  const Gaussian tight = action_posterior(chain, 0, Vec::Zero(1));
  CHECK(std::abs(tight.mean[0] - 2.0) < 1e-6);
  CHECK(tight.cov.matrix()(0, 0) <= 1e-8);
}

TEST_CASE("latent posterior decouples from its parent under heavy data") {
  DiffusionPrior prior;
  prior.d = 1;
  prior.L = 2;
  prior.links.push_back(LinkFn::linear(Mat::Identity(1, 1), 1, 2));
  prior.links.push_back(LinkFn::linear(Mat::Identity(1, 1), 2, 2));
  prior.covs.push_back(Covariance::isotropic(1, 1.0));
  prior.covs.push_back(Covariance::isotropic(1, 1e8));
  prior.top_cov = Covariance::isotropic(1, 1.0);

  ObservationLog log(1);
  Vec x(1);
  x << 1.0;
  log.append(x, 2.0);
  const ActionStats stats = fit(log, RewardModel::linear_gaussian(1.0), 0.0);
  const PosteriorChain chain = chain_update(prior, {stats}, ChainMode::kLinearExact);

  const Vec zero = Vec::Zero(1);
  const Vec one = Vec::Ones(1);
  const Real slope =
      std::abs(latent_posterior(chain, 2, one).mean[0] - latent_posterior(chain, 2, zero).mean[0]);
  CHECK(slope <= 1e-6);
  CHECK_THROWS(latent_posterior(chain, 1, zero));
  CHECK_THROWS(latent_posterior(chain, 4, zero));
}

TEST_CASE("posterior sampling reproduces the conditioned moments") {
  DiffusionPrior prior;
  const PosteriorChain chain = worked_chain(prior, ChainMode::kLinearExact);
  Rng rng(13);
  const int n = 100000;
  Vec vals(n);
  for (int i = 0; i < n; ++i) vals[i] = hierarchical_sample(chain, rng).thetas(0, 0);
  const Real mean = vals.mean();
  const Real var = (vals.array() - mean).square().sum() / static_cast<Real>(n - 1);
  CHECK(std::abs(mean - 4.0 / 3.0) < 0.02);
  CHECK(std::abs(var - 2.0 / 3.0) < 0.02);
}

TEST_CASE("sampling an empty posterior matches prior sampling") {
  const DiffusionPrior prior = identity_chain(2, 2, 1.0, 1.0);
  const PosteriorChain chain = chain_update(prior, empty_stats(2, 1), ChainMode::kLinearExact);
  const int n = 10000;
  Mat post(n, 2), pri(n, 2), ref(n, 2);
  Rng r1(101), r2(202), r3(303);
  for (int i = 0; i < n; ++i) {
    post.row(i) = hierarchical_sample(chain, r1).thetas.row(0);
    pri.row(i) = prior_sample(prior, 1, r2).thetas.row(0);
    ref.row(i) = 2.0 * r3.normal_vec(2).transpose();  // N(0, 4I) decoy
  }
  const Real match = energy_distance_sq(post, pri);
  const Real decoy = energy_distance_sq(post, ref);
  CHECK(match < 0.05);
  CHECK(match < decoy);
}

TEST_CASE("degenerate noise collapses posterior samples onto the mean chain") {
  const DiffusionPrior prior = identity_chain(1, 2, 1e-12, 1e-12);
  const PosteriorChain chain = chain_update(prior, empty_stats(1, 2), ChainMode::kLinearExact);
  Rng rng(7);
  const PriorDraw draw = hierarchical_sample(chain, rng);
  CHECK(draw.thetas.cwiseAbs().maxCoeff() < 1e-4);
  CHECK(draw.latents[0].cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("marginal covariance reproduces the prior and the worked value") {
  Rng rng(23);
  const DiffusionPrior prior = testing::random_linear_prior(2, 2, rng);
  const PosteriorChain chain = chain_update(prior, empty_stats(2, 2), ChainMode::kLinearExact);
  const DiagnosticCov diag = marginal_covariance(chain, 0);
  CHECK((diag.sigma_check.matrix() - prior_marginal_cov(prior)).cwiseAbs().maxCoeff() <= 1e-10);

  DiffusionPrior scalar;
  const PosteriorChain worked = worked_chain(scalar, ChainMode::kLinearExact);
  const DiagnosticCov check = marginal_covariance(worked, 0);
  CHECK(check.sigma_check.matrix()(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(check.projections[0](0, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("a known latent removes its share of marginal variance") {
  DiffusionPrior prior = identity_chain(1, 1, 1.0, 1.0);
  prior.top_cov = Covariance::isotropic(1, 1e-12);
  ObservationLog log(1);
  Vec x(1);
  x << 1.0;
  log.append(x, 2.0);
  const ActionStats stats = fit(log, RewardModel::linear_gaussian(1.0), 0.0);
  const PosteriorChain chain = chain_update(prior, {stats}, ChainMode::kLinearExact);
  const DiagnosticCov diag = marginal_covariance(chain, 0);
  CHECK(std::abs(diag.sigma_check.matrix()(0, 0) - chain.actions[0].sigma_hat.matrix()(0, 0)) <=
        1e-6);
}

TEST_CASE("marginal covariance refuses non-linear chains") {
  Rng rng(29);
  MlpNet net = make_mlp(2, 4, 1, rng);
  DiffusionPrior prior;
  prior.d = 1;
  prior.L = 1;
  prior.links.push_back(LinkFn::mlp_direct(net, 1, 1));
  prior.covs.push_back(Covariance::isotropic(1, 1.0));
  prior.top_cov = Covariance::isotropic(1, 1.0);
  const PosteriorChain chain =
      chain_update(prior, empty_stats(1, 1), ChainMode::kNonLinearApprox);
  CHECK_THROWS(marginal_covariance(chain, 0));
  CHECK_THROWS(action_marginal(chain, 0));
}

TEST_CASE("hierarchical composition equals brute-force joint conditioning") {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const Index d = 1 + static_cast<Index>(rng.below(3));
    const int L = 1 + static_cast<int>(rng.below(3));
    const Index K = 1 + static_cast<Index>(rng.below(4));
    const Index T = 1 + static_cast<Index>(rng.below(20));
    const Real sigma = 0.5 + rng.uniform01();
    const DiffusionPrior prior = testing::random_linear_prior(d, L, rng);
    const History h = random_history(prior, K, T, sigma, rng);
    // Reward-noise scaling enters through the fitted statistics; rebuild them
    // with the right sigma.
    std::vector<ActionStats> stats;
    const RewardModel model = RewardModel::linear_gaussian(sigma);
    for (Index a = 0; a < K; ++a) stats.push_back(fit(h.logs[static_cast<std::size_t>(a)], model, 0.0));

    const PosteriorChain chain = chain_update(prior, stats, ChainMode::kLinearExact);
    const testing::JointPosterior joint =
        testing::condition_joint(prior, K, h.actions, h.contexts, h.ys, sigma);
    for (Index a = 0; a < K; ++a) {
      const Gaussian got = action_marginal(chain, a);
      const Gaussian want = joint.action(a);
      CHECK((got.mean - want.mean).norm() <= 1e-8 * (1.0 + want.mean.norm()));
      CHECK((got.cov.matrix() - want.cov.matrix()).norm() <=
            1e-8 * (1.0 + want.cov.matrix().norm()));
    }
    const Gaussian top_got = latent_posterior(chain, L + 1, Vec::Zero(d));
    const Gaussian top_want = joint.latent(L);
    CHECK((top_got.mean - top_want.mean).norm() <= 1e-8 * (1.0 + top_want.mean.norm()));
    CHECK((top_got.cov.matrix() - top_want.cov.matrix()).norm() <=
          1e-8 * (1.0 + top_want.cov.matrix().norm()));
  }
}

TEST_CASE("marginal covariance agrees with Monte Carlo sampling") {
  Rng rng(37);
  const DiffusionPrior prior = testing::random_linear_prior(2, 2, rng, true);
  const History h = random_history(prior, 2, 12, 1.0, rng);
  const PosteriorChain chain = chain_update(prior, h.stats, ChainMode::kLinearExact);
  const Mat want = marginal_covariance(chain, 0).sigma_check.matrix();
  const int n = 100000;
  Mat draws(n, 2);
  Rng sampler(41);
  for (int i = 0; i < n; ++i) draws.row(i) = hierarchical_sample(chain, sampler).thetas.row(0);
  const Mat got = sample_cov(draws);
  CHECK((got - want).norm() / want.norm() < 0.03);
}

TEST_CASE("observation precision accumulates only on the played action") {
  Rng rng(43);
  const DiffusionPrior prior = testing::random_linear_prior(2, 1, rng);
  const RewardModel model = RewardModel::linear_gaussian(1.0);
  std::vector<ObservationLog> logs(3, ObservationLog(2));
  std::vector<ActionStats> before;
  for (auto& log : logs) before.push_back(fit(log, model, 0.0));
  PosteriorChain chain_before = chain_update(prior, before, ChainMode::kLinearExact);

  logs[1].append(rng.uniform_vec(2, -1.0, 1.0), rng.normal());
  std::vector<ActionStats> after;
  for (auto& log : logs) after.push_back(fit(log, model, 0.0));
  PosteriorChain chain_after = chain_update(prior, after, ChainMode::kLinearExact);

  for (Index a = 0; a < 3; ++a) {
    const Mat gap = chain_after.actions[static_cast<std::size_t>(a)].sigma_hat.precision() -
                    chain_before.actions[static_cast<std::size_t>(a)].sigma_hat.precision();
    if (a == 1) {
      Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(gap));
      CHECK(es.eigenvalues().minCoeff() >= -1e-10);
    } else {
      CHECK(gap.cwiseAbs().maxCoeff() <= 1e-14);
    }
  }
}

TEST_CASE("level precisions reconstruct prior precision plus gain") {
  Rng rng(47);
  const DiffusionPrior prior = testing::random_linear_prior(3, 3, rng);
  const History h = random_history(prior, 2, 25, 1.0, rng);
  const PosteriorChain chain = chain_update(prior, h.stats, ChainMode::kLinearExact);
  for (int i = 0; i < prior.L; ++i) {
    const LatentLevelState& lvl = chain.levels[static_cast<std::size_t>(i)];
    const Mat& parent_prec = i + 1 < prior.L
                                 ? prior.covs[static_cast<std::size_t>(i + 1)].precision()
                                 : prior.top_cov.precision();
    CHECK((lvl.sigma_bar.precision() - (parent_prec + lvl.g_bar)).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((lvl.precision - (parent_prec + lvl.g_bar)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("information gain certificate is non-negative on random instances") {
  // The certified inequality assumes unit-norm contexts, isotropic
  // covariances, and mixing matrices with unit spectral norm.
  Rng rng(53);
  const ContextSampler sphere = ContextSampler::unit_sphere(3);
  for (int trial = 0; trial < 20; ++trial) {
    const DiffusionPrior prior = testing::random_normalized_prior(3, 2, rng);
    const Real sigma = 0.6 + rng.uniform01();
    const RewardModel model = RewardModel::linear_gaussian(sigma);
    std::vector<ObservationLog> logs(2, ObservationLog(3));
    const PriorDraw truth = prior_sample(prior, 2, rng);
    PosteriorChain prev = chain_update(prior, {fit(logs[0], model, 0.0), fit(logs[1], model, 0.0)},
                                       ChainMode::kLinearExact);
    for (int t = 0; t < 6; ++t) {
      const Index a = static_cast<Index>(rng.below(2));
      const Vec x = sphere.sample(rng);
      logs[static_cast<std::size_t>(a)].append(x, x.dot(truth.thetas.row(a)) + sigma * rng.normal());
      const PosteriorChain next = chain_update(
          prior, {fit(logs[0], model, 0.0), fit(logs[1], model, 0.0)}, ChainMode::kLinearExact);
      for (const Real lmin : info_gain_certificate(prev, next, x, a, sigma))
        CHECK(lmin >= -1e-9);
      prev = next;
    }
  }
}

TEST_CASE("a zero context carries zero information") {
  Rng rng(59);
  const DiffusionPrior prior = testing::random_linear_prior(2, 2, rng);
  const RewardModel model = RewardModel::linear_gaussian(1.0);
  ObservationLog log(2);
  log.append(rng.uniform_vec(2, -1.0, 1.0), rng.normal());
  const PosteriorChain before =
      chain_update(prior, {fit(log, model, 0.0)}, ChainMode::kLinearExact);
  const Vec zero = Vec::Zero(2);
  log.append(zero, rng.normal());
  const PosteriorChain after =
      chain_update(prior, {fit(log, model, 0.0)}, ChainMode::kLinearExact);
  for (const Real lmin : info_gain_certificate(before, after, zero, 0, 1.0))
    CHECK(lmin == 0.0);
}

TEST_CASE("scalar certificate matches hand arithmetic") {
  const DiffusionPrior prior = identity_chain(1, 1, 1.0, 1.0);
  const RewardModel model = RewardModel::linear_gaussian(1.0);
  ObservationLog log(1);
  Vec x(1);
  x << 1.0;
  log.append(x, 2.0);
  const PosteriorChain one = chain_update(prior, {fit(log, model, 0.0)}, ChainMode::kLinearExact);
  log.append(x, 1.0);
  const PosteriorChain two = chain_update(prior, {fit(log, model, 0.0)}, ChainMode::kLinearExact);
  // Precision gain 5/3 - 3/2 = 1/6; certified lower bound 1/2 * 1/2 * 0.5^2 = 1/8.
  const std::vector<Real> lmin = info_gain_certificate(one, two, x, 0, 1.0);
  CHECK(lmin.size() == 1);
  CHECK(lmin[0] == doctest::Approx(1.0 / 6.0 - 1.0 / 8.0).epsilon(1e-10));
  CHECK(sigma_max_sq(prior, 1.0) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("shared-parameter aggregation mirrors the per-action recursion") {
  const DiffusionPrior prior = identity_chain(1, 1, 1.0, 1.0);
  const PosteriorChain empty = shared_chain_update(prior, ActionStats::empty(1));
  CHECK(empty.levels[0].prior_only);
  CHECK((empty.levels[0].sigma_bar.matrix() - prior.top_cov.matrix()).cwiseAbs().maxCoeff() <=
        1e-12);

  ObservationLog log(1);
  Vec phi(1);
  phi << 1.0;
  log.append(phi, 2.0);
  const ActionStats stats = fit(log, RewardModel::linear_gaussian(1.0), 0.0);
  const PosteriorChain chain = shared_chain_update(prior, stats);
  CHECK(chain.actions.size() == 1);
  CHECK(chain.actions[0].sigma_hat.matrix()(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(chain.levels[0].g_bar(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(chain.levels[0].b_bar[0] == doctest::Approx(1.0).epsilon(1e-12));

  // Orthogonal features decouple the shared design.
  ObservationLog log2(2);
  Vec e1(2), e2(2);
  e1 << 1.0, 0.0;
  e2 << 0.0, 1.0;
  log2.append(e1, 1.0);
  log2.append(e2, -1.0);
  const ActionStats stats2 = fit(log2, RewardModel::linear_gaussian(1.0), 0.0);
  CHECK(std::abs(stats2.g_hat(0, 1)) <= 1e-14);
  const PosteriorChain chain2 =
      shared_chain_update(identity_chain(2, 1, 1.0, 1.0), stats2);
  CHECK(std::abs(chain2.actions[0].sigma_hat.matrix()(0, 1)) <= 1e-12);
}

TEST_CASE("assembling prebuilt factors equals a fresh chain update") {
  Rng rng(61);
  const DiffusionPrior prior = testing::random_linear_prior(2, 2, rng);
  const History h = random_history(prior, 3, 15, 1.0, rng);
  const PosteriorChain direct = chain_update(prior, h.stats, ChainMode::kLinearExact);
  std::vector<ActionFactor> factors;
  for (const ActionStats& s : h.stats) factors.push_back(make_action_factor(prior, s));
  const PosteriorChain assembled = assemble_chain(prior, std::move(factors), ChainMode::kLinearExact);
  for (int i = 0; i < prior.L; ++i) {
    CHECK(assembled.levels[static_cast<std::size_t>(i)].precision ==
          direct.levels[static_cast<std::size_t>(i)].precision);
    CHECK(assembled.levels[static_cast<std::size_t>(i)].b_bar ==
          direct.levels[static_cast<std::size_t>(i)].b_bar);
  }
}

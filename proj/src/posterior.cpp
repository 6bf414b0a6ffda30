#include "dts/posterior.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace dts {

namespace {

bool wraps(const DiffusionPrior& prior, ChainMode mode) {
  return prior.linear() && mode != ChainMode::kNonLinearApprox;
}

const Covariance& parent_cov(const DiffusionPrior& prior, int level_index) {
  // Parent covariance of psi_{level_index+1}: Sigma_{level_index+2}, which is
  // the top covariance for the last level.
  return level_index + 1 < prior.L ? prior.covs[level_index + 1] : prior.top_cov;
}

// P_{a,1} = Sigma-hat Sigma_1^-1 W_1 (reduces to W_1 without data).
Mat base_projection(const PosteriorChain& chain, Index a) {
  const Mat& w1 = chain.prior->links[0].w;
  const ActionFactor& factor = chain.actions[a];
  return factor.has_data ? Mat(factor.mean_map * w1) : w1;
}

// P_{a,l+1} = P_{a,l} Sigma-bar_l Sigma_{l+1}^-1 W_{l+1}; the middle product is
// the stored level mean_map (identity for untouched levels).
Mat advance_projection(const PosteriorChain& chain, const Mat& p, int level_index) {
  const Mat& w_next = chain.prior->links[level_index + 1].w;
  const LatentLevelState& level = chain.levels[level_index];
  return level.prior_only ? Mat(p * w_next) : Mat(p * (level.mean_map * w_next));
}

void require_linear(const PosteriorChain& chain, const char* what) {
  if (chain.mode == ChainMode::kNonLinearApprox || !chain.prior->linear())
    throw std::invalid_argument(std::string(what) + " needs the exact linear chain");
}

}  // namespace

ActionFactor make_action_factor(const DiffusionPrior& prior, const ActionStats& stats) {
  const Index d = prior.d;
  ActionFactor factor;
  factor.has_data = stats.count > 0;
  if (!factor.has_data) {
    factor.sigma_hat = prior.covs[0];
    factor.mean_map = Mat::Identity(d, d);
    factor.data_term = Vec::Zero(d);
    factor.gain_term = Mat::Zero(d, d);
    return factor;
  }
  if (stats.b_hat.size() != d || stats.g_hat.rows() != d)
    throw std::invalid_argument("action stats dimension mismatch");
  const Mat& p1 = prior.covs[0].precision();
  const Mat sigma_hat = chol_inverse(p1 + stats.g_hat);
  factor.sigma_hat = Covariance(sigma_hat);
  factor.mean_map = sigma_hat * p1;
  factor.data_term = sigma_hat * (stats.g_hat * stats.b_hat);
  // Sigma_1^-1 - Sigma_1^-1 Sigma-hat Sigma_1^-1 in its cancellation-free
  // product form Sigma_1^-1 Sigma-hat G-hat: exactly zero for empty stats.
  factor.gain_term = symmetrized(p1 * (sigma_hat * stats.g_hat));
  return factor;
}

PosteriorChain assemble_chain(const DiffusionPrior& prior, std::vector<ActionFactor> factors,
                              ChainMode mode) {
  prior.validate();
  if (mode == ChainMode::kLinearExact && !prior.linear())
    throw std::invalid_argument("LinearExact mode requires linear links");
  if (mode == ChainMode::kSharedParam && factors.size() != 1)
    throw std::invalid_argument("shared mode aggregates a single stats entry");
  if (factors.empty()) throw std::invalid_argument("chain needs at least one action");

  PosteriorChain chain;
  chain.mode = mode;
  chain.prior = &prior;
  chain.actions = std::move(factors);
  reassemble_levels(chain);
  return chain;
}

void reassemble_levels(PosteriorChain& chain) {
  const DiffusionPrior& prior = *chain.prior;
  const Index d = prior.d;
  const bool wrap = wraps(prior, chain.mode);
  chain.levels.assign(prior.L, LatentLevelState{});

  bool any_data = false;
  Mat sum_gain = Mat::Zero(d, d);
  Vec sum_data = Vec::Zero(d);
  for (const ActionFactor& factor : chain.actions) {
    if (!factor.has_data) continue;
    any_data = true;
    sum_gain += factor.gain_term;
    sum_data += factor.data_term;
  }

  for (int i = 0; i < prior.L; ++i) {
    LatentLevelState& level = chain.levels[i];
    const Covariance& parent = parent_cov(prior, i);

    if (!any_data) {
      level.prior_only = true;
      level.g_bar = Mat::Zero(d, d);
      level.b_bar = Vec::Zero(d);
      level.sigma_bar = parent;
      level.precision = parent.precision();
      level.mean_map = Mat::Identity(d, d);
      level.offset = Vec::Zero(d);
      continue;
    }

    if (i == 0) {
      const Mat& p1 = prior.covs[0].precision();
      if (wrap) {
        const Mat& w1 = prior.links[0].w;
        level.g_bar = symmetrized(w1.transpose() * sum_gain * w1);
        level.b_bar = w1.transpose() * (p1 * sum_data);
      } else {
        level.g_bar = sum_gain;
        level.b_bar = p1 * sum_data;
      }
    } else {
      const LatentLevelState& prev = chain.levels[i - 1];
      const Mat& p = prior.covs[i].precision();
      // Sigma_l^-1 - Sigma_l^-1 Sigma-bar_{l-1} Sigma_l^-1, product form again.
      const Mat core = p * (prev.sigma_bar.matrix() * prev.g_bar);
      const Vec b_core = p * (prev.sigma_bar.matrix() * prev.b_bar);
      if (wrap) {
        const Mat& w = prior.links[i].w;
        level.g_bar = symmetrized(w.transpose() * core * w);
        level.b_bar = w.transpose() * b_core;
      } else {
        level.g_bar = symmetrized(core);
        level.b_bar = b_core;
      }
    }

    level.prior_only = false;
    level.precision = parent.precision() + level.g_bar;
    const Mat sigma_bar = chol_inverse(level.precision);
    level.sigma_bar = Covariance(sigma_bar);
    level.mean_map = sigma_bar * parent.precision();
    level.offset = sigma_bar * level.b_bar;
  }
}

PosteriorChain chain_update(const DiffusionPrior& prior, const std::vector<ActionStats>& stats,
                            ChainMode mode) {
  std::vector<ActionFactor> factors;
  factors.reserve(stats.size());
  for (const ActionStats& s : stats) factors.push_back(make_action_factor(prior, s));
  return assemble_chain(prior, std::move(factors), mode);
}

PosteriorChain shared_chain_update(const DiffusionPrior& prior, const ActionStats& stats) {
  std::vector<ActionFactor> factors;
  factors.push_back(make_action_factor(prior, stats));
  return assemble_chain(prior, std::move(factors), ChainMode::kSharedParam);
}

Gaussian action_posterior(const PosteriorChain& chain, Index a, const Vec& psi1) {
  if (a < 0 || a >= static_cast<Index>(chain.actions.size()))
    throw std::out_of_range("action index out of range");
  const ActionFactor& factor = chain.actions[a];
  const Vec f1 = link_apply(chain.prior->links[0], psi1);
  if (!factor.has_data) return {f1, factor.sigma_hat};
  return {Vec(factor.mean_map * f1 + factor.data_term), factor.sigma_hat};
}

Gaussian latent_posterior(const PosteriorChain& chain, int level, const Vec& psi_parent) {
  const int L = chain.prior->L;
  if (level < 2 || level > L + 1) throw std::out_of_range("latent level out of range");
  const LatentLevelState& state = chain.levels[level - 2];
  if (level == L + 1) {
    return {state.prior_only ? Vec(Vec::Zero(chain.prior->d)) : state.offset, state.sigma_bar};
  }
  const Vec f = link_apply(chain.prior->links[level - 1], psi_parent);
  if (state.prior_only) return {f, state.sigma_bar};
  return {Vec(state.mean_map * f + state.offset), state.sigma_bar};
}

PriorDraw hierarchical_sample(const PosteriorChain& chain, Rng& rng) {
  const DiffusionPrior& prior = *chain.prior;
  const int L = prior.L;
  PriorDraw draw;
  draw.latents.resize(L);

  const LatentLevelState& top = chain.levels[L - 1];
  const Vec top_mean = top.prior_only ? Vec(Vec::Zero(prior.d)) : top.offset;
  draw.latents[L - 1] = mvn_sample(top_mean, top.sigma_bar, rng);

  for (int l = L; l >= 2; --l) {
    const LatentLevelState& state = chain.levels[l - 2];
    const Vec f = link_apply(prior.links[l - 1], draw.latents[l - 1]);
    const Vec mean = state.prior_only ? f : Vec(state.mean_map * f + state.offset);
    draw.latents[l - 2] = mvn_sample(mean, state.sigma_bar, rng);
  }

  const Vec f1 = link_apply(prior.links[0], draw.latents[0]);
  const Index K = static_cast<Index>(chain.actions.size());
  draw.thetas.resize(K, prior.d);
  for (Index a = 0; a < K; ++a) {
    const ActionFactor& factor = chain.actions[a];
    const Vec mean = factor.has_data ? Vec(factor.mean_map * f1 + factor.data_term) : f1;
    draw.thetas.row(a) = mvn_sample(mean, factor.sigma_hat, rng).transpose();
  }
  return draw;
}

Gaussian action_marginal(const PosteriorChain& chain, Index a) {
  require_linear(chain, "action_marginal");
  const DiffusionPrior& prior = *chain.prior;
  const int L = prior.L;

  const LatentLevelState& top = chain.levels[L - 1];
  Vec m = top.prior_only ? Vec(Vec::Zero(prior.d)) : top.offset;
  Mat s = top.sigma_bar.matrix();
  for (int i = L - 2; i >= 0; --i) {
    const LatentLevelState& state = chain.levels[i];
    const Mat& w = prior.links[i + 1].w;
    const Mat map = state.prior_only ? w : Mat(state.mean_map * w);
    m = state.prior_only ? Vec(map * m) : Vec(map * m + state.offset);
    s = symmetrized(state.sigma_bar.matrix() + map * s * map.transpose());
  }

  const ActionFactor& factor = chain.actions[a];
  const Mat& w1 = prior.links[0].w;
  const Mat map = factor.has_data ? Mat(factor.mean_map * w1) : w1;
  const Vec mean = factor.has_data ? Vec(map * m + factor.data_term) : Vec(map * m);
  const Mat cov = symmetrized(factor.sigma_hat.matrix() + map * s * map.transpose());
  return {mean, Covariance(cov)};
}

DiagnosticCov marginal_covariance(const PosteriorChain& chain, Index a, Real reward_sigma) {
  require_linear(chain, "marginal_covariance");
  if (a < 0 || a >= static_cast<Index>(chain.actions.size()))
    throw std::out_of_range("action index out of range");
  const DiffusionPrior& prior = *chain.prior;

  DiagnosticCov diag;
  diag.sigma_max_sq = sigma_max_sq(prior, reward_sigma);
  Mat total = chain.actions[a].sigma_hat.matrix();
  Mat p = base_projection(chain, a);
  for (int i = 0; i < prior.L; ++i) {
    diag.projections.push_back(p);
    total += p * chain.levels[i].sigma_bar.matrix() * p.transpose();
    if (i + 1 < prior.L) p = advance_projection(chain, p, i);
  }
  diag.sigma_check = Covariance(symmetrized(total));
  return diag;
}

std::vector<Real> info_gain_certificate(const PosteriorChain& chain_t,
                                        const PosteriorChain& chain_next, const Vec& x, Index a,
                                        Real reward_sigma) {
  require_linear(chain_t, "info_gain_certificate");
  require_linear(chain_next, "info_gain_certificate");
  const DiffusionPrior& prior = *chain_t.prior;
  if (x.size() != prior.d) throw std::invalid_argument("context dimension mismatch");

  const Real smax = sigma_max_sq(prior, reward_sigma);
  const Real inv_noise = 1.0 / (reward_sigma * reward_sigma);
  std::vector<Real> lambda_min;
  lambda_min.reserve(prior.L);
  Mat p = base_projection(chain_t, a);
  Real scale = inv_noise;
  for (int i = 0; i < prior.L; ++i) {
    scale /= smax;  // sigma^-2 sigma_max^{-2 l} at l = i+1
    const Vec px = p.transpose() * x;
    const Mat gap = chain_next.levels[i].precision - chain_t.levels[i].precision -
                    scale * (px * px.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(gap));
    lambda_min.push_back(es.eigenvalues().minCoeff());
    if (i + 1 < prior.L) p = advance_projection(chain_t, p, i);
  }
  return lambda_min;
}

Real sigma_max_sq(const DiffusionPrior& prior, Real reward_sigma) {
  const Real inv_noise = 1.0 / (reward_sigma * reward_sigma);
  Real best = 0.0;
  for (int i = 0; i <= prior.L; ++i) {
    const Mat& cov = i < prior.L ? prior.covs[i].matrix() : prior.top_cov.matrix();
    Eigen::SelfAdjointEigenSolver<Mat> es(cov);
    best = std::max(best, 1.0 + es.eigenvalues().maxCoeff() * inv_noise);
  }
  return best;
}

Mat prior_marginal_cov(const DiffusionPrior& prior) {
  if (!prior.linear())
    throw std::invalid_argument("prior_marginal_cov needs linear links");
  Mat total = prior.covs[0].matrix();
  Mat basis = Mat::Identity(prior.d, prior.d);
  for (int l = 1; l <= prior.L; ++l) {
    basis = basis * prior.links[l - 1].w;  // B_l = W_1 ... W_l
    const Mat& next = l < prior.L ? prior.covs[l].matrix() : prior.top_cov.matrix();
    total += basis * next * basis.transpose();
  }
  return symmetrized(total);
}

}  // namespace dts

#include "dts/model.hpp"

#include <cmath>
#include <stdexcept>

namespace dts {

Vec MlpNet::apply(const Vec& input) const {
  if (input.size() != in_dim()) throw std::invalid_argument("mlp input dimension mismatch");
  Vec h = (w1 * input + b1).cwiseMax(0.0);
  return w2 * h + b2;
}

Mat MlpNet::apply_batch(const Mat& inputs) const {
  if (inputs.cols() != in_dim()) throw std::invalid_argument("mlp input dimension mismatch");
  Mat h = ((inputs * w1.transpose()).rowwise() + b1.transpose()).cwiseMax(0.0);
  return (h * w2.transpose()).rowwise() + b2.transpose();
}

MlpNet make_mlp(Index in, Index hidden, Index out, Rng& rng) {
  MlpNet net;
  const Real s1 = 1.0 / std::sqrt(static_cast<Real>(in));
  const Real s2 = 1.0 / std::sqrt(static_cast<Real>(hidden));
  net.w1 = rng.uniform_mat(hidden, in, -s1, s1);
  net.b1 = rng.uniform_vec(hidden, -s1, s1);
  net.w2 = rng.uniform_mat(out, hidden, -s2, s2);
  net.b2 = rng.uniform_vec(out, -s2, s2);
  return net;
}

Real NoiseSchedule::beta_tilde(int level) const {
  if (level < 1 || level > steps()) throw std::out_of_range("schedule level out of range");
  if (level == 1) return beta[0];
  return beta[level - 1] * (1.0 - alpha_bar[level - 2]) / (1.0 - alpha_bar[level - 1]);
}

LinkFn LinkFn::linear(Mat w, int level, int levels_total) {
  LinkFn link;
  link.kind = Kind::kLinear;
  link.w = std::move(w);
  link.level = level;
  link.levels_total = levels_total;
  return link;
}

LinkFn LinkFn::mlp_direct(MlpNet net, int level, int levels_total) {
  LinkFn link;
  link.kind = Kind::kMlpDirect;
  link.net = std::move(net);
  link.level = level;
  link.levels_total = levels_total;
  return link;
}

LinkFn LinkFn::ddpm_eps(MlpNet net, const NoiseSchedule& schedule, int level) {
  LinkFn link;
  link.kind = Kind::kDdpmEps;
  link.net = std::move(net);
  link.level = level;
  link.levels_total = schedule.steps();
  link.alpha = schedule.alpha[level - 1];
  link.alpha_bar = schedule.alpha_bar[level - 1];
  link.beta = schedule.beta[level - 1];
  return link;
}

namespace {

Vec with_step_feature(const Vec& psi, int level, int levels_total) {
  Vec input(psi.size() + 1);
  input.head(psi.size()) = psi;
  input[psi.size()] = static_cast<Real>(level) / static_cast<Real>(levels_total);
  return input;
}

}  // namespace

Vec link_apply(const LinkFn& link, const Vec& psi) {
  switch (link.kind) {
    case LinkFn::Kind::kLinear:
      if (link.w.cols() != psi.size()) throw std::invalid_argument("link dimension mismatch");
      return link.w * psi;
    case LinkFn::Kind::kMlpDirect:
      return link.net.apply(with_step_feature(psi, link.level, link.levels_total));
    case LinkFn::Kind::kDdpmEps: {
      Vec eps = link.net.apply(with_step_feature(psi, link.level, link.levels_total));
      return (psi - (link.beta / std::sqrt(1.0 - link.alpha_bar)) * eps) / std::sqrt(link.alpha);
    }
  }
  throw std::logic_error("unreachable link kind");
}

bool DiffusionPrior::linear() const {
  for (const auto& link : links)
    if (link.kind != LinkFn::Kind::kLinear) return false;
  return true;
}

void DiffusionPrior::validate() const {
  if (L < 1) throw std::invalid_argument("prior needs at least one level");
  if (static_cast<int>(links.size()) != L || static_cast<int>(covs.size()) != L)
    throw std::invalid_argument("prior links/covs must have length L");
  if (top_cov.dim() != d) throw std::invalid_argument("top covariance dimension mismatch");
  for (const auto& cov : covs)
    if (cov.dim() != d) throw std::invalid_argument("level covariance dimension mismatch");
}

PriorDraw prior_sample(const DiffusionPrior& prior, Index K, Rng& rng) {
  PriorDraw draw;
  draw.latents.resize(prior.L);
  draw.latents[prior.L - 1] = mvn_sample(Vec::Zero(prior.d), prior.top_cov, rng);
  for (int l = prior.L; l >= 2; --l) {
    const Vec mean = link_apply(prior.links[l - 1], draw.latents[l - 1]);
    draw.latents[l - 2] = mvn_sample(mean, prior.covs[l - 1], rng);
  }
  const Vec theta_mean = link_apply(prior.links[0], draw.latents[0]);
  draw.thetas.resize(K, prior.d);
  for (Index a = 0; a < K; ++a)
    draw.thetas.row(a) = mvn_sample(theta_mean, prior.covs[0], rng).transpose();
  return draw;
}

RewardModel RewardModel::linear_gaussian(Real sigma) {
  if (sigma <= 0) throw std::invalid_argument("reward noise std must be positive");
  RewardModel m;
  m.kind = Kind::kLinearGaussian;
  m.sigma = sigma;
  return m;
}

RewardModel RewardModel::logistic() {
  RewardModel m;
  m.kind = Kind::kLogistic;
  return m;
}

Real sigmoid(Real u) { return 1.0 / (1.0 + std::exp(-u)); }

Real RewardModel::mean(Real u) const {
  return kind == Kind::kLinearGaussian ? u : sigmoid(u);
}

Real expected_reward(const RewardModel& model, const Vec& x, const Vec& theta) {
  if (x.size() != theta.size()) throw std::invalid_argument("context/parameter dimension mismatch");
  return model.mean(x.dot(theta));
}

Real reward_sample(const RewardModel& model, const Vec& x, const Vec& theta, Rng& rng) {
  const Real u = x.dot(theta);
  if (model.kind == RewardModel::Kind::kLinearGaussian) return u + model.sigma * rng.normal();
  return rng.uniform01() < sigmoid(u) ? 1.0 : 0.0;
}

ContextSampler ContextSampler::uniform_cube(Index d) {
  ContextSampler s;
  s.kind = Kind::kUniformCube;
  s.d = d;
  return s;
}

ContextSampler ContextSampler::unit_sphere(Index d) {
  ContextSampler s;
  s.kind = Kind::kUnitSphere;
  s.d = d;
  return s;
}

ContextSampler ContextSampler::fixed_at(Vec x) {
  ContextSampler s;
  s.kind = Kind::kFixed;
  s.d = x.size();
  s.fixed = std::move(x);
  return s;
}

ContextSampler ContextSampler::from_pool(Mat rows) {
  if (rows.rows() == 0) throw std::invalid_argument("context pool is empty");
  ContextSampler s;
  s.kind = Kind::kPool;
  s.d = rows.cols();
  s.pool = std::move(rows);
  return s;
}

Vec ContextSampler::sample(Rng& rng) const {
  switch (kind) {
    case Kind::kUniformCube:
      return rng.uniform_vec(d, -1.0, 1.0);
    case Kind::kUnitSphere: {
      Vec x = rng.uniform_vec(d, -1.0, 1.0);
      Real n = x.norm();
      while (n < 1e-12) {
        x = rng.uniform_vec(d, -1.0, 1.0);
        n = x.norm();
      }
      return x / n;
    }
    case Kind::kFixed:
      return fixed;
    case Kind::kPool:
      return pool.row(static_cast<Index>(rng.below(pool.rows()))).transpose();
  }
  throw std::logic_error("unreachable context sampler kind");
}

}  // namespace dts

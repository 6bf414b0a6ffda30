#include "dts/pretrain.hpp"

#include <string>

#include "dts/errors.hpp"

namespace dts {

NoiseSchedule make_schedule(int L, Real beta_min, Real beta_max) {
  if (L < 1) throw ValidationError("need at least one diffusion step");
  if (!(beta_min > 0.0) || !(beta_min <= beta_max) || !(beta_max < 1.0))
    throw ValidationError("schedule bounds must satisfy 0 < beta_min <= beta_max < 1");
  NoiseSchedule s;
  s.beta.reserve(static_cast<std::size_t>(L));
  s.alpha.reserve(static_cast<std::size_t>(L));
  s.alpha_bar.reserve(static_cast<std::size_t>(L));
  Real abar = 1.0;
  for (int l = 1; l <= L; ++l) {
    const Real beta =
        L == 1 ? beta_min
               : beta_min + (static_cast<Real>(l - 1) / static_cast<Real>(L - 1)) *
                                (beta_max - beta_min);
    s.beta.push_back(beta);
    s.alpha.push_back(1.0 - beta);
    abar *= 1.0 - beta;
    s.alpha_bar.push_back(abar);
  }
  return s;
}

std::pair<Vec, Vec> forward_noise(const Vec& x0, int level, const NoiseSchedule& schedule,
                                  Rng& rng) {
  if (level < 1 || level > schedule.steps())
    throw std::invalid_argument("diffusion level out of range");
  const Real abar = schedule.alpha_bar[static_cast<std::size_t>(level - 1)];
  Vec eps = rng.normal_vec(x0.size());
  Vec noised = std::sqrt(abar) * x0 + std::sqrt(1.0 - abar) * eps;
  return {std::move(noised), std::move(eps)};
}

Real denoiser_loss(const MlpNet& net, const Mat& inputs, const Mat& targets, NetGrads* grads) {
  if (inputs.cols() != net.w1.cols() || targets.cols() != net.w2.rows() ||
      inputs.rows() != targets.rows() || inputs.rows() < 1)
    throw ValidationError("batch shape does not match the net");
  const Real denom = static_cast<Real>(inputs.rows()) * static_cast<Real>(targets.cols());

  Mat h_pre = inputs * net.w1.transpose();
  h_pre.rowwise() += net.b1.transpose();
  const Mat h = h_pre.cwiseMax(0.0);
  Mat out = h * net.w2.transpose();
  out.rowwise() += net.b2.transpose();
  const Mat resid = out - targets;
  const Real loss = resid.squaredNorm() / denom;

  if (grads != nullptr) {
    const Mat d_out = (2.0 / denom) * resid;
    grads->w2 = d_out.transpose() * h;
    grads->b2 = d_out.colwise().sum().transpose();
    const Mat d_h = d_out * net.w2;
    const Mat d_pre = (h_pre.array() > 0.0).select(d_h, Mat::Zero(h.rows(), h.cols()));
    grads->w1 = d_pre.transpose() * inputs;
    grads->b1 = d_pre.colwise().sum().transpose();
  }
  return loss;
}

TrainResult train(const Mat& samples, const TrainConfig& cfg) {
  const Index count = samples.rows();
  const Index d = samples.cols();
  if (count < 1 || d < 1) throw ValidationError("need at least one training sample");
  if (!samples.allFinite()) throw ValidationError("training samples must be finite");
  if (cfg.lr <= 0.0) throw ValidationError("learning rate must be positive");
  if (cfg.epochs < 0) throw ValidationError("epoch count must be non-negative");
  if (cfg.batch < 1 || cfg.hidden < 1) throw ValidationError("batch and width must be positive");
  const NoiseSchedule schedule = make_schedule(cfg.L, cfg.beta_min, cfg.beta_max);

  Rng rng = Rng::stream(cfg.seed, Stream::kTrain);
  MlpNet net = make_mlp(d + 1, cfg.hidden, d, rng);
  Mat m_w1 = Mat::Zero(net.w1.rows(), net.w1.cols()), v_w1 = m_w1;
  Vec m_b1 = Vec::Zero(net.b1.size()), v_b1 = m_b1;
  Mat m_w2 = Mat::Zero(net.w2.rows(), net.w2.cols()), v_w2 = m_w2;
  Vec m_b2 = Vec::Zero(net.b2.size()), v_b2 = m_b2;

  const Index batch = std::min(cfg.batch, count);
  const bool full_pass = batch == count;

  TrainResult result;
  result.loss.reserve(static_cast<std::size_t>(cfg.epochs));
  Mat inputs(batch, d + 1);
  Mat targets(batch, d);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (Index i = 0; i < batch; ++i) {
      const Index idx =
          full_pass ? i : static_cast<Index>(rng.below(static_cast<std::uint64_t>(count)));
      const int level = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.L)));
      const auto [noised, eps] = forward_noise(samples.row(idx).transpose(), level, schedule, rng);
      inputs.row(i).head(d) = noised.transpose();
      inputs(i, d) = static_cast<Real>(level) / static_cast<Real>(cfg.L);
      targets.row(i) = eps.transpose();
    }

    NetGrads grads;
    const Real loss = denoiser_loss(net, inputs, targets, &grads);
    if (!std::isfinite(loss))
      throw std::runtime_error("training diverged: non-finite loss at epoch " +
                               std::to_string(epoch));
    result.loss.push_back(loss);

    const int t = epoch + 1;
    adam_step(net.w1, grads.w1, m_w1, v_w1, cfg.lr, t);
    adam_step(net.b1, grads.b1, m_b1, v_b1, cfg.lr, t);
    adam_step(net.w2, grads.w2, m_w2, v_w2, cfg.lr, t);
    adam_step(net.b2, grads.b2, m_b2, v_b2, cfg.lr, t);
  }

  DiffusionPrior prior;
  prior.d = d;
  prior.L = cfg.L;
  for (int l = 1; l <= cfg.L; ++l) {
    prior.links.push_back(LinkFn::ddpm_eps(net, schedule, l));
    prior.covs.push_back(Covariance::isotropic(d, schedule.beta_tilde(l)));
  }
  prior.top_cov = Covariance::isotropic(d, 1.0);
  prior.validate();
  result.prior = std::move(prior);
  return result;
}

}  // namespace dts

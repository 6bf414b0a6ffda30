#include "dts/envs.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>

#include "dts/serialize.hpp"

namespace dts {

ParseError::ParseError(const std::string& what, int line_no)
    : ValidationError(what + " (line " + std::to_string(line_no) + ")"), line(line_no) {}

EmptyFileError::EmptyFileError(const std::string& path)
    : ValidationError("no ratings found in " + path) {}

Mat swiss_roll(const SwissRollConfig& config, Rng& rng) {
  if (!(config.t_min < config.t_max) || config.scale <= 0.0 || config.noise_std < 0.0 ||
      config.count < 0)
    throw ValidationError("invalid swiss roll parameters");
  Mat points(config.count, 2);
  for (Index i = 0; i < config.count; ++i) {
    const Real t = rng.uniform(config.t_min, config.t_max);
    points(i, 0) = config.scale * t * std::cos(t) + config.noise_std * rng.normal();
    points(i, 1) = config.scale * t * std::sin(t) + config.noise_std * rng.normal();
  }
  return points;
}

RatingsTable ingest_ratings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open ratings file: " + path);

  RatingsTable table;
  std::unordered_map<long long, Index> user_ids;
  std::unordered_map<long long, Index> item_ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    long long user = 0;
    long long item = 0;
    Real rating = 0.0;
    if (!(row >> user >> item >> rating) || !std::isfinite(rating))
      throw ParseError("malformed rating row", line_no);
    // An optional trailing timestamp is ignored; anything else is malformed.
    long long timestamp = 0;
    if (row >> timestamp) {
      std::string extra;
      if (row >> extra) throw ParseError("too many columns", line_no);
    } else if (!row.eof()) {
      row.clear();
      std::string extra;
      if (row >> extra) throw ParseError("malformed rating row", line_no);
    }

    const auto user_slot = user_ids.emplace(user, static_cast<Index>(user_ids.size()));
    const auto item_slot = item_ids.emplace(item, static_cast<Index>(item_ids.size()));
    table.triples.push_back({user_slot.first->second, item_slot.first->second, rating});
  }
  if (table.triples.empty()) throw EmptyFileError(path);
  table.users = static_cast<Index>(user_ids.size());
  table.items = static_cast<Index>(item_ids.size());
  return table;
}

void save_ratings(const RatingsTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write ratings file: " + path);
  for (const RatingsTable::Triple& t : table.triples)
    out << t.user << '\t' << t.item << '\t' << format_real(t.rating) << '\n';
}

FactorModel als_factorize(const RatingsTable& table, Index rank, Real lambda, int sweeps) {
  if (rank < 1) throw ValidationError("factorization rank must be at least 1");
  if (lambda <= 0.0) throw ValidationError("factorization ridge must be positive");
  if (sweeps < 1) throw ValidationError("need at least one sweep");
  if (table.triples.empty()) throw ValidationError("empty ratings table");

  FactorModel model;
  model.rank = rank;
  model.reg = lambda;
  Rng rng = Rng::stream(0, Stream::kSetup);
  model.user_factors = rng.uniform_mat(table.users, rank, 0.0, 1.0);
  model.item_factors = rng.uniform_mat(table.items, rank, 0.0, 1.0);

  const auto objective = [&]() {
    Real sq = 0.0;
    for (const RatingsTable::Triple& t : table.triples) {
      const Real err = t.rating - model.user_factors.row(t.user).dot(model.item_factors.row(t.item));
      sq += err * err;
    }
    return sq + lambda * (model.user_factors.squaredNorm() + model.item_factors.squaredNorm());
  };

  // One ridge solve per row of the side being updated, over that row's ratings.
  const auto solve_side = [&](Mat& target, const Mat& fixed, bool user_side) {
    std::vector<Mat> gram(static_cast<std::size_t>(target.rows()),
                          Mat(lambda * Mat::Identity(rank, rank)));
    std::vector<Vec> moment(static_cast<std::size_t>(target.rows()), Vec::Zero(rank));
    for (const RatingsTable::Triple& t : table.triples) {
      const Index row = user_side ? t.user : t.item;
      const Index other = user_side ? t.item : t.user;
      const Vec f = fixed.row(other).transpose();
      gram[static_cast<std::size_t>(row)] += f * f.transpose();
      moment[static_cast<std::size_t>(row)] += t.rating * f;
    }
    for (Index r = 0; r < target.rows(); ++r) {
      const auto slot = static_cast<std::size_t>(r);
      target.row(r) = gram[slot].llt().solve(moment[slot]).transpose();
    }
  };

  for (int s = 0; s < sweeps; ++s) {
    solve_side(model.user_factors, model.item_factors, true);
    solve_side(model.item_factors, model.user_factors, false);
    model.objective.push_back(objective());
  }

  Real sq = 0.0;
  for (const RatingsTable::Triple& t : table.triples) {
    const Real err = t.rating - model.user_factors.row(t.user).dot(model.item_factors.row(t.item));
    sq += err * err;
  }
  model.rmse = std::sqrt(sq / static_cast<Real>(table.triples.size()));
  return model;
}

BanditInstance sample_instance(const DiffusionPrior& prior, Index K, const RewardModel& reward,
                               Rng& rng) {
  prior.validate();
  if (K < 1) throw ValidationError("need at least one action");
  PriorDraw draw = prior_sample(prior, K, rng);
  BanditInstance instance;
  instance.thetas = std::move(draw.thetas);
  instance.true_latents = std::move(draw.latents);
  instance.reward = reward;
  instance.contexts = ContextSampler::uniform_cube(prior.d);
  instance.K = K;
  instance.d = prior.d;
  return instance;
}

BanditInstance movielens_instance(const FactorModel& factors, Real reward_noise) {
  if (factors.user_factors.rows() < 1 || factors.item_factors.rows() < 1)
    throw ValidationError("factor model has no users or items");
  if (reward_noise < 0.0) throw ValidationError("reward noise must be non-negative");

  Real max_norm = 0.0;
  for (Index u = 0; u < factors.user_factors.rows(); ++u)
    max_norm = std::max(max_norm, factors.user_factors.row(u).norm());
  if (max_norm <= 0.0) throw ValidationError("user factors are all zero");

  BanditInstance instance;
  instance.thetas = factors.item_factors * max_norm;
  instance.reward = reward_noise > 0.0 ? RewardModel::linear_gaussian(reward_noise)
                                       : RewardModel::linear_gaussian(1e-12);
  instance.contexts = ContextSampler::from_pool(factors.user_factors / max_norm);
  instance.K = factors.item_factors.rows();
  instance.d = factors.rank;
  return instance;
}

}  // namespace dts

#pragma once

#include <string>
#include <vector>

#include "dts/errors.hpp"
#include "dts/model.hpp"

namespace dts {

struct SwissRollConfig {
  Real t_min = 4.71238898038468986;   // 1.5 pi
  Real t_max = 14.13716694115406957;  // 4.5 pi
  Real scale = 0.07073553026306459;   // 1 / (4.5 pi), lands in roughly [-1, 1]^2
  Real noise_std = 0.05;
  Index count = 0;
};

// Rows are samples: scale * (t cos t, t sin t) + N(0, noise_std^2 I),
// t ~ U[t_min, t_max].
Mat swiss_roll(const SwissRollConfig& config, Rng& rng);

struct ParseError : ValidationError {
  int line;
  ParseError(const std::string& what, int line_no);
};

struct EmptyFileError : ValidationError {
  explicit EmptyFileError(const std::string& path);
};

struct RatingsTable {
  struct Triple {
    Index user;
    Index item;
    Real rating;
  };
  std::vector<Triple> triples;
  Index users = 0;
  Index items = 0;
};

// Lines are "user item rating [timestamp]", whitespace or tab separated; ids
// are remapped to dense 0-based indices in order of first appearance.
RatingsTable ingest_ratings(const std::string& path);
// Tab-separated remapped triples; ingest(save(t)) == t.
void save_ratings(const RatingsTable& table, const std::string& path);

struct FactorModel {
  Mat user_factors;  // U x rank
  Mat item_factors;  // K x rank
  Index rank = 0;
  Real reg = 0.0;
  Real rmse = 0.0;
  std::vector<Real> objective;  // squared error + reg * norms, one entry per sweep
};

// Alternating ridge regressions from a fixed internal random init; the
// objective is non-increasing across sweeps.
FactorModel als_factorize(const RatingsTable& table, Index rank, Real lambda, int sweeps);

// Fresh theta draw from the prior; contexts default to U[-1, 1]^d.
BanditInstance sample_instance(const DiffusionPrior& prior, Index K, const RewardModel& reward,
                               Rng& rng);

// Actions are items, contexts are user factor rows drawn uniformly per round.
// User factors are scaled so the largest norm is 1 and item factors are scaled
// inversely, keeping x^T theta equal to the fitted rating.
BanditInstance movielens_instance(const FactorModel& factors, Real reward_noise);

}  // namespace dts

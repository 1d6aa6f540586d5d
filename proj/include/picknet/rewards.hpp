#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "picknet/errors.hpp"
#include "picknet/metrics.hpp"
#include "picknet/seq2seq.hpp"
#include "picknet/tensor.hpp"
#include "picknet/text.hpp"

namespace picknet {

struct RewardConfig {
  double lambda_l = 1.0;
  double lambda_v = 0.1;
  std::size_t n_min = 3;
  std::size_t n_max = 10;  // schedule-driven, see nmax_schedule
  std::size_t tau = 7;
  double r_penalty = -1.0;

  void validate() const {
    if (lambda_l < 0.0 || lambda_v < 0.0) throw ConfigError("reward: lambdas must be >= 0");
    if (r_penalty >= 0.0) throw ConfigError("reward: penalty must be negative");
    if (n_min > tau || tau > n_max)
      throw ConfigError("reward: need n_min <= tau <= n_max, got " + std::to_string(n_min) +
                        ", " + std::to_string(tau) + ", " + std::to_string(n_max));
  }
};

struct RewardBreakdown {
  double r_l = 0.0;
  double r_v = 0.0;
  std::size_t n_picked = 0;
  double reward = 0.0;
  bool limited = false;
};

// Sum over feature coordinates of the population standard deviation across
// the picked frames. Zero iff the picked features are identical; scales
// linearly with the features.
inline double visual_diversity(const std::vector<const Tensor*>& picked) {
  if (picked.empty()) throw UsageError("visual_diversity: no picked features");
  const std::size_t dim = picked[0]->size();
  for (const Tensor* f : picked)
    if (f->size() != dim)
      throw ShapeError("visual_diversity: feature dims differ: " + picked[0]->shape_str() +
                       " vs " + f->shape_str());
  const double n = static_cast<double>(picked.size());
  double total = 0.0;
  for (std::size_t j = 0; j < dim; ++j) {
    double mean = 0.0;
    for (const Tensor* f : picked) mean += (*f)[j];
    mean /= n;
    double var = 0.0;
    for (const Tensor* f : picked) {
      const double d = (*f)[j] - mean;
      var += d * d;
    }
    total += std::sqrt(var / n);
  }
  return total;
}

inline double visual_diversity(const std::vector<Tensor>& picked) {
  std::vector<const Tensor*> ptrs;
  ptrs.reserve(picked.size());
  for (const Tensor& f : picked) ptrs.push_back(&f);
  return visual_diversity(ptrs);
}

// CIDEr of the caption greedily decoded from the picked frames. The idf
// table must come from training references when this drives the RL reward.
inline double language_reward(const std::vector<Tensor>& picked_features,
                              const Seq2SeqParams& captioner, const CaptionSet& refs,
                              const IdfTable& idf, const Vocabulary& vocab,
                              CiderVariant variant = CiderVariant::Plain) {
  const Tensor v = encode_sequence(picked_features, captioner);
  const TokenSeq ids = greedy_decode(v, captioner);
  return cider(vocab.decode(ids), refs, idf, variant);
}

// Out-of-range pick counts collapse the reward to the penalty regardless of
// the component rewards.
inline RewardBreakdown final_reward(double r_l, double r_v, std::size_t n_picked,
                                    const RewardConfig& cfg) {
  if (n_picked < 1) throw UsageError("final_reward: n_picked must be >= 1");
  RewardBreakdown b;
  b.r_l = r_l;
  b.r_v = r_v;
  b.n_picked = n_picked;
  b.limited = n_picked < cfg.n_min || n_picked > cfg.n_max;
  b.reward = b.limited ? cfg.r_penalty : cfg.lambda_l * r_l + cfg.lambda_v * r_v;
  return b;
}

// N_max starts at ceil(n/3), shrinks linearly to tau by the middle of the
// stage (nearest-int rounding), and stays at tau afterwards.
inline std::size_t nmax_schedule(std::size_t epoch, std::size_t total_epochs,
                                 std::size_t n_frames = 30, std::size_t tau = 7) {
  const std::size_t start = (n_frames + 2) / 3;
  if (tau > start)
    throw ConfigError("nmax_schedule: tau " + std::to_string(tau) + " exceeds ceil(n/3) = " +
                      std::to_string(start));
  const std::size_t half = total_epochs / 2;
  if (half == 0 || epoch >= half) return tau;
  const double frac = static_cast<double>(epoch) / static_cast<double>(half);
  const double value = static_cast<double>(start) + frac * (static_cast<double>(tau) - static_cast<double>(start));
  return static_cast<std::size_t>(std::llround(value));
}

}  // namespace picknet

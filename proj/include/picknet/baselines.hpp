#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <vector>

#include "picknet/errors.hpp"
#include "picknet/rng.hpp"
#include "picknet/tensor.hpp"

namespace picknet {

namespace detail {

inline double sq_dist(const Tensor& a, const Tensor& b) {
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    acc += d * d;
  }
  return acc;
}

}  // namespace detail

// k-means over the frame features (k-means++ seeding, Lloyd iterations),
// then one frame per centroid: the nearest not-yet-chosen frame, ties to the
// lowest index. Returns exactly k distinct indices, ascending.
inline std::vector<std::size_t> kmeans_pick(const std::vector<Tensor>& features, std::size_t k,
                                            std::uint64_t seed = 0) {
  const std::size_t n = features.size();
  if (k < 1 || k > n)
    throw UsageError("kmeans_pick: k = " + std::to_string(k) + " outside [1, " +
                     std::to_string(n) + "]");

  Rng rng = Rng(seed).derive(0x6b6d);
  std::vector<Tensor> centroids;
  centroids.reserve(k);
  centroids.push_back(features[rng.below(n)]);
  std::vector<double> best_d(n, 0.0);
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double d = std::numeric_limits<double>::infinity();
      for (const Tensor& c : centroids) d = std::min(d, detail::sq_dist(features[i], c));
      best_d[i] = d;
      total += d;
    }
    std::size_t chosen;
    if (total <= 0.0) {
      chosen = rng.below(n);  // all points coincide with a centroid
    } else {
      double u = rng.next_double() * total;
      chosen = n - 1;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += best_d[i];
        if (u < acc) {
          chosen = i;
          break;
        }
      }
    }
    centroids.push_back(features[chosen]);
  }

  std::vector<std::size_t> assign(n, 0);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double bd = detail::sq_dist(features[i], centroids[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = detail::sq_dist(features[i], centroids[c]);
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
    for (std::size_t c = 0; c < k; ++c) {
      Tensor mean = Tensor::vector(features[0].size());
      std::size_t count = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (assign[i] != c) continue;
        for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += features[i][j];
        ++count;
      }
      if (count == 0) continue;  // empty cluster keeps its previous centroid
      for (std::size_t j = 0; j < mean.size(); ++j) mean[j] /= static_cast<double>(count);
      centroids[c] = std::move(mean);
    }
  }

  std::vector<std::size_t> picked;
  std::vector<bool> used(n, false);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t best = n;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i]) continue;
      const double d = detail::sq_dist(features[i], centroids[c]);
      if (d < bd) {
        bd = d;
        best = i;
      }
    }
    used[best] = true;
    picked.push_back(best);
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

// Every frame kept independently with probability 1/2; the first frame is
// always kept, mirroring the forced first pick.
inline std::vector<std::size_t> random_pick(std::size_t n, Rng& rng) {
  if (n < 1) throw UsageError("random_pick: need at least one frame");
  std::vector<std::size_t> picked{0};
  for (std::size_t i = 1; i < n; ++i)
    if (rng.bernoulli(0.5)) picked.push_back(i);
  return picked;
}

}  // namespace picknet

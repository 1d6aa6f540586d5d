#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "picknet/errors.hpp"

namespace picknet {

// Token strings, not vocabulary ids: metrics must compare against raw
// references, and two out-of-vocabulary words must not match each other.
using Sentence = std::vector<std::string>;

// One video's reference captions.
struct CaptionSet {
  std::string video_id;
  std::vector<Sentence> references;
};

inline constexpr int kMaxNgram = 4;

// N-grams are keyed by their tokens joined with a 0x1f separator; ordered
// maps keep every accumulation order deterministic.
using NgramCounts = std::map<std::string, double>;

inline std::string ngram_key(const Sentence& tokens, std::size_t start, int n) {
  std::string key;
  for (int k = 0; k < n; ++k) {
    if (k) key.push_back('\x1f');
    key += tokens[start + static_cast<std::size_t>(k)];
  }
  return key;
}

inline NgramCounts ngram_counts(const Sentence& tokens, int n) {
  if (n < 1 || n > kMaxNgram) throw UsageError("ngram_counts: n must be in 1..4");
  NgramCounts counts;
  if (tokens.size() < static_cast<std::size_t>(n)) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i)
    counts[ngram_key(tokens, i, n)] += 1.0;
  return counts;
}

// Per-order idf table over a reference corpus. df(g) counts the videos whose
// reference set contains g; idf = ln(M / df). Unseen n-grams fall back to
// df = 1.
class IdfTable {
 public:
  static IdfTable build(const std::vector<CaptionSet>& corpus) {
    if (corpus.empty()) throw UsageError("IdfTable::build: need at least one video");
    IdfTable t;
    t.num_videos_ = corpus.size();
    for (int n = 1; n <= kMaxNgram; ++n) {
      auto& df = t.df_[static_cast<std::size_t>(n - 1)];
      for (const auto& set : corpus) {
        NgramCounts seen;
        for (const auto& ref : set.references)
          for (const auto& [key, cnt] : ngram_counts(ref, n)) seen[key] = 1.0;
        for (const auto& [key, one] : seen) df[key] += 1.0;
      }
    }
    return t;
  }

  double idf(const std::string& key, int n) const {
    const auto& df = df_[static_cast<std::size_t>(n - 1)];
    auto it = df.find(key);
    double d = it == df.end() ? 1.0 : it->second;
    return std::log(static_cast<double>(num_videos_) / d);
  }

  std::size_t num_videos() const { return num_videos_; }

 private:
  std::array<NgramCounts, kMaxNgram> df_;
  std::size_t num_videos_ = 1;
};

enum class CiderVariant { Plain, D };

namespace detail {

struct TfidfVec {
  NgramCounts weights;
  double norm = 0.0;
};

inline TfidfVec tfidf(const NgramCounts& counts, int n, const IdfTable& idf, bool normalize_tf) {
  TfidfVec v;
  double total = 0.0;
  for (const auto& [key, cnt] : counts) total += cnt;
  for (const auto& [key, cnt] : counts) {
    double tf = normalize_tf && total > 0.0 ? cnt / total : cnt;
    double w = tf * idf.idf(key, n);
    v.weights[key] = w;
    v.norm += w * w;
  }
  v.norm = std::sqrt(v.norm);
  return v;
}

inline double cosine(const TfidfVec& a, const TfidfVec& b) {
  if (a.norm == 0.0 || b.norm == 0.0) return 0.0;
  double num = 0.0;
  for (const auto& [key, w] : a.weights) {
    auto it = b.weights.find(key);
    if (it != b.weights.end()) num += w * it->second;
  }
  return num / (a.norm * b.norm);
}

// CIDEr-D similarity: candidate counts clipped to the reference's, times a
// Gaussian length penalty with sigma = 6.
inline double cider_d_sim(const TfidfVec& cand, const TfidfVec& ref, double len_cand,
                          double len_ref) {
  if (cand.norm == 0.0 || ref.norm == 0.0) return 0.0;
  double num = 0.0;
  for (const auto& [key, w] : cand.weights) {
    auto it = ref.weights.find(key);
    if (it != ref.weights.end()) num += std::min(w, it->second) * it->second;
  }
  double delta = len_cand - len_ref;
  return (num / (cand.norm * ref.norm)) * std::exp(-delta * delta / 72.0);
}

inline Sentence strip_markers(const Sentence& tokens) {
  Sentence out;
  out.reserve(tokens.size());
  for (const auto& t : tokens)
    if (t != "<BOS>" && t != "<EOS>" && t != "<PAD>") out.push_back(t);
  return out;
}

}  // namespace detail

// CIDEr score of a candidate against one video's references: per order, the
// cosine of TF-IDF vectors averaged over references; 10x the mean over
// orders 1..4. Degenerate inputs score 0, never NaN.
inline double cider(const Sentence& candidate, const CaptionSet& refs, const IdfTable& idf,
                    CiderVariant variant = CiderVariant::Plain) {
  const Sentence cand = detail::strip_markers(candidate);
  double total = 0.0;
  const bool plain = variant == CiderVariant::Plain;
  for (int n = 1; n <= kMaxNgram; ++n) {
    auto cand_vec = detail::tfidf(ngram_counts(cand, n), n, idf, plain);
    double acc = 0.0;
    for (const auto& ref_raw : refs.references) {
      const Sentence ref = detail::strip_markers(ref_raw);
      auto ref_vec = detail::tfidf(ngram_counts(ref, n), n, idf, plain);
      if (plain) {
        acc += detail::cosine(cand_vec, ref_vec);
      } else {
        acc += detail::cider_d_sim(cand_vec, ref_vec, static_cast<double>(cand.size()),
                                   static_cast<double>(ref.size()));
      }
    }
    if (!refs.references.empty()) acc /= static_cast<double>(refs.references.size());
    total += acc;
  }
  return 10.0 * total / static_cast<double>(kMaxNgram);
}

struct BleuReport {
  double score = 0.0;
  std::array<double, kMaxNgram> precisions{};
  double brevity_penalty = 1.0;
  std::size_t candidate_len = 0;
  std::size_t reference_len = 0;
};

// Corpus-level BLEU-4: clipped counts, uniform 1/4 weights, brevity penalty,
// no smoothing (any empty order zeroes the score).
inline BleuReport bleu4_report(const std::vector<Sentence>& candidates,
                               const std::vector<CaptionSet>& refsets) {
  if (candidates.size() != refsets.size())
    throw UsageError("bleu4: " + std::to_string(candidates.size()) + " candidates vs " +
                     std::to_string(refsets.size()) + " reference sets");
  BleuReport rep;
  std::array<double, kMaxNgram> matched{};
  std::array<double, kMaxNgram> total{};
  for (std::size_t v = 0; v < candidates.size(); ++v) {
    const Sentence cand = detail::strip_markers(candidates[v]);
    rep.candidate_len += cand.size();
    // closest reference length; ties go to the shorter one
    std::size_t best_ref = 0;
    bool first = true;
    for (const auto& ref_raw : refsets[v].references) {
      std::size_t len = detail::strip_markers(ref_raw).size();
      if (first) {
        best_ref = len;
        first = false;
        continue;
      }
      auto dist = [&](std::size_t r) {
        return r > cand.size() ? r - cand.size() : cand.size() - r;
      };
      if (dist(len) < dist(best_ref) || (dist(len) == dist(best_ref) && len < best_ref))
        best_ref = len;
    }
    rep.reference_len += best_ref;
    for (int n = 1; n <= kMaxNgram; ++n) {
      NgramCounts cand_counts = ngram_counts(cand, n);
      NgramCounts max_ref;
      for (const auto& ref_raw : refsets[v].references)
        for (const auto& [key, cnt] : ngram_counts(detail::strip_markers(ref_raw), n))
          max_ref[key] = std::max(max_ref[key], cnt);
      for (const auto& [key, cnt] : cand_counts) {
        auto it = max_ref.find(key);
        matched[static_cast<std::size_t>(n - 1)] += std::min(cnt, it == max_ref.end() ? 0.0 : it->second);
        total[static_cast<std::size_t>(n - 1)] += cnt;
      }
    }
  }
  double log_sum = 0.0;
  bool any_zero = false;
  for (int n = 0; n < kMaxNgram; ++n) {
    std::size_t ni = static_cast<std::size_t>(n);
    rep.precisions[ni] = total[ni] > 0.0 ? matched[ni] / total[ni] : 0.0;
    if (rep.precisions[ni] <= 0.0)
      any_zero = true;
    else
      log_sum += 0.25 * std::log(rep.precisions[ni]);
  }
  rep.brevity_penalty =
      rep.candidate_len > rep.reference_len || rep.candidate_len == 0
          ? 1.0
          : std::exp(1.0 - static_cast<double>(rep.reference_len) / static_cast<double>(rep.candidate_len));
  rep.score = any_zero ? 0.0 : rep.brevity_penalty * std::exp(log_sum);
  return rep;
}

inline double bleu4(const std::vector<Sentence>& candidates,
                    const std::vector<CaptionSet>& refsets) {
  return bleu4_report(candidates, refsets).score;
}

namespace detail {

inline std::size_t lcs_length(const Sentence& a, const Sentence& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace detail

// LCS F-measure with beta = 1.2, maximized over references.
inline double rouge_l(const Sentence& candidate, const CaptionSet& refs) {
  if (refs.references.empty()) throw UsageError("rouge_l: no references");
  const Sentence cand = detail::strip_markers(candidate);
  constexpr double beta = 1.2;
  double best = 0.0;
  for (const auto& ref_raw : refs.references) {
    const Sentence ref = detail::strip_markers(ref_raw);
    if (cand.empty() || ref.empty()) continue;
    double lcs = static_cast<double>(detail::lcs_length(cand, ref));
    double p = lcs / static_cast<double>(cand.size());
    double r = lcs / static_cast<double>(ref.size());
    if (p == 0.0 || r == 0.0) continue;
    double f = (1.0 + beta * beta) * p * r / (r + beta * beta * p);
    best = std::max(best, f);
  }
  return best;
}

}  // namespace picknet

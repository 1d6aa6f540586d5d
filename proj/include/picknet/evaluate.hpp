#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"
#include "picknet/baselines.hpp"
#include "picknet/dataset.hpp"
#include "picknet/errors.hpp"
#include "picknet/metrics.hpp"
#include "picknet/policy.hpp"
#include "picknet/seq2seq.hpp"
#include "picknet/stats.hpp"
#include "picknet/text.hpp"

namespace picknet {

enum class PickPolicyKind { PickNet, Random, KMeans, All };

inline PickPolicyKind parse_policy(const std::string& name) {
  if (name == "picknet") return PickPolicyKind::PickNet;
  if (name == "random") return PickPolicyKind::Random;
  if (name == "kmeans") return PickPolicyKind::KMeans;
  if (name == "all") return PickPolicyKind::All;
  throw UsageError("unknown pick policy \"" + name + "\" (picknet|random|kmeans|all)");
}

inline std::string policy_name(PickPolicyKind kind) {
  switch (kind) {
    case PickPolicyKind::PickNet: return "picknet";
    case PickPolicyKind::Random: return "random";
    case PickPolicyKind::KMeans: return "kmeans";
    case PickPolicyKind::All: return "all";
  }
  return "?";
}

struct EvalOptions {
  PickPolicyKind policy = PickPolicyKind::All;
  std::size_t kmeans_k = 0;  // 0 = mean greedy pick count of the policy net
  std::uint64_t seed = 0;    // random policy
  CiderVariant cider_variant = CiderVariant::Plain;
  bool per_video = false;
};

struct VideoEval {
  std::string id;
  std::string caption;
  double cider = 0.0;
  std::size_t n_picked = 0;
};

struct EvalResult {
  std::string policy;
  std::string split;
  std::size_t videos = 0;
  double bleu4 = 0.0;
  double rouge_l = 0.0;
  double cider = 0.0;
  double mean_np = 0.0;
  std::size_t kmeans_k_used = 0;
  std::vector<VideoEval> per_video;
  std::vector<TraceRecord> traces;

  nlohmann::json to_json() const {
    nlohmann::json j{{"policy", policy},   {"split", split},   {"videos", videos},
                     {"bleu4", bleu4},     {"rouge_l", rouge_l}, {"cider", cider},
                     {"mean_np", mean_np}};
    if (kmeans_k_used > 0) j["kmeans_k"] = kmeans_k_used;
    if (!per_video.empty()) {
      nlohmann::json rows = nlohmann::json::array();
      for (const VideoEval& v : per_video)
        rows.push_back({{"id", v.id}, {"caption", v.caption}, {"cider", v.cider}, {"n_p", v.n_picked}});
      j["per_video"] = rows;
    }
    return j;
  }
};

// Mean pick count of the greedy policy over a split (used to choose k for
// the k-means baseline).
inline double mean_greedy_picks(const Dataset& ds, const std::vector<std::size_t>& indices,
                                const PickNetParams& policy) {
  if (indices.empty()) throw UsageError("mean_greedy_picks: empty split");
  std::size_t total = 0;
  for (std::size_t i : indices) {
    const auto glances = ds.videos[i].glances();
    total += run_episode(glances, policy, PickMode::Greedy).n_picked();
  }
  return static_cast<double>(total) / static_cast<double>(indices.size());
}

// Greedy picks (where the policy applies), encode, greedy decode, then
// corpus BLEU-4, mean ROUGE-L and mean CIDEr against the split references.
// The idf table is built from this split's references.
inline EvalResult evaluate_split(const Dataset& ds, const std::string& split,
                                 const Seq2SeqParams& captioner, const PickNetParams* picknet,
                                 const Vocabulary& vocab, const EvalOptions& opt) {
  const auto indices = ds.split_indices(split);
  if (indices.empty()) throw ConfigError("evaluate_split: split \"" + split + "\" is empty");
  if ((opt.policy == PickPolicyKind::PickNet ||
       (opt.policy == PickPolicyKind::KMeans && opt.kmeans_k == 0)) &&
      picknet == nullptr)
    throw ConfigError("evaluate_split: policy \"" + policy_name(opt.policy) +
                      "\" needs pick-policy parameters");

  EvalResult result;
  result.policy = policy_name(opt.policy);
  result.split = split;
  result.videos = indices.size();

  std::size_t kmeans_k = opt.kmeans_k;
  if (opt.policy == PickPolicyKind::KMeans && kmeans_k == 0) {
    kmeans_k = static_cast<std::size_t>(std::llround(mean_greedy_picks(ds, indices, *picknet)));
    kmeans_k = std::max<std::size_t>(1, kmeans_k);
  }
  result.kmeans_k_used = opt.policy == PickPolicyKind::KMeans ? kmeans_k : 0;

  const auto refsets = ds.caption_sets(indices);
  const IdfTable idf = IdfTable::build(refsets);
  Rng random_rng(opt.seed);

  std::vector<Sentence> candidates;
  candidates.reserve(indices.size());
  std::size_t total_picks = 0;
  double cider_sum = 0.0, rouge_sum = 0.0;

  for (std::size_t row = 0; row < indices.size(); ++row) {
    const VideoData& video = ds.videos[indices[row]];
    std::vector<std::size_t> picks;
    switch (opt.policy) {
      case PickPolicyKind::All:
        picks.resize(video.meta.n_frames);
        for (std::size_t f = 0; f < picks.size(); ++f) picks[f] = f;
        break;
      case PickPolicyKind::PickNet: {
        const auto glances = video.glances();
        EpisodeTrace trace = run_episode(glances, *picknet, PickMode::Greedy);
        picks = trace.picked;
        result.traces.push_back(to_trace_record(trace, video.meta.id));
        break;
      }
      case PickPolicyKind::Random: {
        Rng per_video = random_rng.derive(indices[row]);
        picks = random_pick(video.meta.n_frames, per_video);
        break;
      }
      case PickPolicyKind::KMeans: {
        picks = kmeans_pick(video.features, std::min(kmeans_k, video.meta.n_frames), opt.seed);
        break;
      }
    }
    total_picks += picks.size();

    const Tensor v = encode_sequence(video.picked_features(picks), captioner);
    const TokenSeq ids = greedy_decode(v, captioner);
    Sentence caption = vocab.decode(ids);
    const double c = cider(caption, refsets[row], idf, opt.cider_variant);
    cider_sum += c;
    rouge_sum += rouge_l(caption, refsets[row]);
    if (opt.per_video)
      result.per_video.push_back({video.meta.id, join_tokens(caption), c, picks.size()});
    candidates.push_back(std::move(caption));
  }

  result.bleu4 = bleu4(candidates, refsets);
  result.rouge_l = rouge_sum / static_cast<double>(indices.size());
  result.cider = cider_sum / static_cast<double>(indices.size());
  result.mean_np = static_cast<double>(total_picks) / static_cast<double>(indices.size());
  return result;
}

}  // namespace picknet

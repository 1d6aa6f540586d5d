#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "picknet/adam.hpp"
#include "picknet/baselines.hpp"
#include "picknet/checkpoint.hpp"
#include "picknet/dataset.hpp"
#include "picknet/errors.hpp"
#include "picknet/evaluate.hpp"
#include "picknet/policy.hpp"
#include "picknet/rewards.hpp"
#include "picknet/seq2seq.hpp"
#include "picknet/text.hpp"

namespace picknet {

struct StageConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 128;  // shrunk automatically on smaller datasets
  double lr = 3e-4;
  double clip_norm = 5.0;
  double sched_samp_start = 0.0;  // supervision feedback probability ramp
  double sched_samp_end = 0.25;
  double adapt_feedback_prob = 0.25;  // feedback probability during adaptation

  void validate() const {
    if (epochs < 1) throw ConfigError("stage: epochs must be >= 1");
    if (lr <= 0.0) throw ConfigError("stage: lr must be positive");
    if (batch_size < 1) throw ConfigError("stage: batch_size must be >= 1");
  }
};

struct EpochStats {
  std::size_t epoch = 0;
  std::string stage;
  double xent = std::numeric_limits<double>::quiet_NaN();
  double reward_mean = std::numeric_limits<double>::quiet_NaN();
  double mean_np = std::numeric_limits<double>::quiet_NaN();
  double val_cider = 0.0;
  double val_reward = std::numeric_limits<double>::quiet_NaN();  // greedy picks
  double val_mean_np = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0.0;  // console-level diagnostic, not a serialized field
};

using EpochCallback = std::function<void(const EpochStats&)>;

struct TrainStats {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;  // 0 = the stage's starting parameters
  double best_val_cider = 0.0;
};

namespace detail {

inline std::vector<Tensor> snapshot_values(const std::vector<Param*>& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const Param* p : params) out.push_back(p->value);
  return out;
}

inline void restore_values(const std::vector<Param*>& params, const std::vector<Tensor>& snap) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = snap[i];
}

inline void scale_grads(const std::vector<Param*>& params, double scale) {
  for (Param* p : params)
    for (double& g : p->grad.data()) g *= scale;
}

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[rng.below(i)]);
}

inline double lerp_epoch(double start, double end, std::size_t epoch, std::size_t total) {
  if (total <= 1) return start;
  return start + (end - start) * static_cast<double>(epoch) / static_cast<double>(total - 1);
}

inline std::chrono::steady_clock::time_point now() { return std::chrono::steady_clock::now(); }

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(now() - t0).count();
}

}  // namespace detail

// Encodes one caption into decoder targets: token ids plus the terminal EOS
// the model must learn to emit.
inline TokenSeq caption_targets(const std::string& caption, const Vocabulary& vocab) {
  TokenSeq ids = vocab.encode(tokenize(caption));
  ids.push_back(kEos);
  return ids;
}

inline double validation_cider(const Dataset& ds, const Seq2SeqParams& captioner,
                               const PickNetParams* picknet, const Vocabulary& vocab,
                               CiderVariant variant) {
  EvalOptions opt;
  opt.policy = picknet == nullptr ? PickPolicyKind::All : PickPolicyKind::PickNet;
  opt.cider_variant = variant;
  return evaluate_split(ds, "validation", captioner, picknet, vocab, opt).cider;
}

// ---------------------------------------------------------------------------
// Supervision stage: cross-entropy over all frames with scheduled sampling.

inline TrainStats train_supervision(const Dataset& ds, Seq2SeqParams& params,
                                    const Vocabulary& vocab, const StageConfig& cfg,
                                    std::uint64_t seed,
                                    CiderVariant variant = CiderVariant::Plain,
                                    const EpochCallback& on_epoch = {}) {
  cfg.validate();
  const auto train_idx = ds.split_indices("train");
  if (train_idx.empty() || ds.split_indices("validation").empty())
    throw ConfigError("train_supervision: train and validation splits must be non-empty");

  std::vector<std::pair<std::size_t, std::size_t>> samples;  // (video, caption)
  for (std::size_t i : train_idx)
    for (std::size_t c = 0; c < ds.videos[i].meta.captions.size(); ++c) samples.emplace_back(i, c);

  Rng rng = Rng(seed).derive(0x5301);
  const auto param_ptrs = params.all();
  Adam opt(param_ptrs, AdamConfig{.lr = cfg.lr});
  const std::size_t batch = std::min<std::size_t>(cfg.batch_size, samples.size());

  TrainStats stats;
  stats.best_val_cider = validation_cider(ds, params, nullptr, vocab, variant);
  auto best = detail::snapshot_values(param_ptrs);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = detail::now();
    const double eps =
        detail::lerp_epoch(cfg.sched_samp_start, cfg.sched_samp_end, epoch, cfg.epochs);
    detail::shuffle(samples, rng);
    double loss_sum = 0.0;
    std::size_t done = 0;
    while (done < samples.size()) {
      const std::size_t take = std::min(batch, samples.size() - done);
      for (std::size_t k = 0; k < take; ++k) {
        const auto [vi, ci] = samples[done + k];
        const VideoData& video = ds.videos[vi];
        loss_sum += xent_loss_and_grads(video.features,
                                        caption_targets(video.meta.captions[ci], vocab), params,
                                        eps, &rng)
                        .loss;
      }
      done += take;
      detail::scale_grads(param_ptrs, 1.0 / static_cast<double>(take));
      clip_global_norm(param_ptrs, cfg.clip_norm);
      opt.step();
    }

    EpochStats es;
    es.epoch = epoch + 1;
    es.stage = "supervision";
    es.xent = loss_sum / static_cast<double>(samples.size());
    es.val_cider = validation_cider(ds, params, nullptr, vocab, variant);
    es.wall_seconds = detail::seconds_since(t0);
    if (es.val_cider > stats.best_val_cider) {
      stats.best_val_cider = es.val_cider;
      stats.best_epoch = es.epoch;
      best = detail::snapshot_values(param_ptrs);
    }
    stats.epochs.push_back(es);
    if (on_epoch) on_epoch(es);
  }
  detail::restore_values(param_ptrs, best);
  return stats;
}

// ---------------------------------------------------------------------------
// Reinforcement stage: REINFORCE with the self-critical greedy baseline.

struct ReinforceUpdate {
  EpisodeTrace sampled;
  EpisodeTrace greedy;
  RewardBreakdown reward_sampled;
  RewardBreakdown reward_greedy;
  double advantage = 0.0;
};

// Core of one REINFORCE step against an arbitrary episode reward. Gradients
// for the sampled episode accumulate into the policy; a zero advantage
// leaves them untouched.
template <typename RewardFn>
ReinforceUpdate reinforce_step_custom(const std::vector<Glance>& glances, PickNetParams& policy,
                                      RewardFn&& reward_of, Rng& rng) {
  ReinforceUpdate up;
  up.sampled = run_episode(glances, policy, PickMode::Stochastic, &rng);
  up.greedy = run_episode(glances, policy, PickMode::Greedy);
  up.reward_sampled = reward_of(up.sampled);
  up.reward_greedy = reward_of(up.greedy);
  up.advantage = up.reward_sampled.reward - up.reward_greedy.reward;
  accumulate_episode_gradient(up.sampled, up.advantage, policy);
  return up;
}

// Production reward: CIDEr of the greedy caption decoded from the picked
// frames plus weighted visual diversity, with the pick-count limits applied.
inline RewardBreakdown episode_reward(const EpisodeTrace& trace, const VideoData& video,
                                      const Seq2SeqParams& frozen, const CaptionSet& refs,
                                      const IdfTable& idf_train, const Vocabulary& vocab,
                                      const RewardConfig& reward_cfg, CiderVariant variant) {
  const auto picked = video.picked_features(trace.picked);
  const double r_l = language_reward(picked, frozen, refs, idf_train, vocab, variant);
  const double r_v = visual_diversity(picked);
  return final_reward(r_l, r_v, trace.n_picked(), reward_cfg);
}

inline ReinforceUpdate reinforce_step(const VideoData& video, PickNetParams& policy,
                                      const Seq2SeqParams& frozen, const CaptionSet& refs,
                                      const IdfTable& idf_train, const Vocabulary& vocab,
                                      const RewardConfig& reward_cfg, CiderVariant variant,
                                      Rng& rng) {
  const auto glances = video.glances();
  return reinforce_step_custom(
      glances, policy,
      [&](const EpisodeTrace& trace) {
        return episode_reward(trace, video, frozen, refs, idf_train, vocab, reward_cfg, variant);
      },
      rng);
}

struct ValidationPass {
  double cider_mean = 0.0;   // metric CIDEr with the validation split's idf
  double reward_mean = 0.0;  // training reward of the greedy picks (train idf)
  double mean_np = 0.0;
};

// One greedy episode + decode per validation video, scored both as a metric
// (validation idf) and as the training reward (train idf, pick limits).
inline ValidationPass validation_reward_pass(const Dataset& ds, const Seq2SeqParams& captioner,
                                             const PickNetParams& policy, const Vocabulary& vocab,
                                             const IdfTable& idf_train,
                                             const RewardConfig& reward_cfg,
                                             CiderVariant variant) {
  const auto val_idx = ds.split_indices("validation");
  if (val_idx.empty()) throw ConfigError("validation split is empty");
  const auto refsets = ds.caption_sets(val_idx);
  const IdfTable idf_val = IdfTable::build(refsets);
  ValidationPass out;
  for (std::size_t row = 0; row < val_idx.size(); ++row) {
    const VideoData& video = ds.videos[val_idx[row]];
    const EpisodeTrace trace = run_episode(video.glances(), policy, PickMode::Greedy);
    const auto picked = video.picked_features(trace.picked);
    const Sentence caption = vocab.decode(greedy_decode(encode_sequence(picked, captioner), captioner));
    out.cider_mean += cider(caption, refsets[row], idf_val, variant);
    const double r_l = cider(caption, refsets[row], idf_train, variant);
    const double r_v = visual_diversity(picked);
    out.reward_mean += final_reward(r_l, r_v, trace.n_picked(), reward_cfg).reward;
    out.mean_np += static_cast<double>(trace.n_picked());
  }
  const double n = static_cast<double>(val_idx.size());
  out.cider_mean /= n;
  out.reward_mean /= n;
  out.mean_np /= n;
  return out;
}

// E[r_v] under the random pick policy over the training split; used to put
// the diversity reward on a dataset-independent scale.
inline double mean_random_diversity(const Dataset& ds, std::uint64_t seed) {
  const auto train_idx = ds.split_indices("train");
  if (train_idx.empty()) throw ConfigError("mean_random_diversity: empty train split");
  Rng rng = Rng(seed).derive(0xd1f);
  double total = 0.0;
  for (std::size_t i : train_idx) {
    const VideoData& video = ds.videos[i];
    const auto picks = random_pick(video.meta.n_frames, rng);
    total += visual_diversity(video.picked_features(picks));
  }
  return total / static_cast<double>(train_idx.size());
}

// lambda_v interpreted as a target contribution: the effective weight is
// lambda_v / E[r_v under random picks], estimated once per dataset.
inline double effective_lambda_v(const Dataset& ds, double lambda_v, bool auto_normalize,
                                 std::uint64_t seed) {
  if (!auto_normalize) return lambda_v;
  const double mean_rv = mean_random_diversity(ds, seed);
  return mean_rv > 1e-12 ? lambda_v / mean_rv : lambda_v;
}

inline TrainStats train_reinforcement(const Dataset& ds, PickNetParams& policy,
                                      const Seq2SeqParams& frozen, const Vocabulary& vocab,
                                      const StageConfig& cfg, RewardConfig reward_cfg,
                                      bool lambda_v_auto, std::uint64_t seed,
                                      CiderVariant variant = CiderVariant::Plain,
                                      const EpochCallback& on_epoch = {}) {
  cfg.validate();
  const auto train_idx = ds.split_indices("train");
  if (train_idx.empty() || ds.split_indices("validation").empty())
    throw ConfigError("train_reinforcement: train and validation splits must be non-empty");

  const auto refsets = ds.caption_sets(train_idx);
  const IdfTable idf_train = IdfTable::build(refsets);
  reward_cfg.lambda_v = effective_lambda_v(ds, reward_cfg.lambda_v, lambda_v_auto, seed);

  std::size_t n_frames = 0;
  for (std::size_t i : train_idx) n_frames = std::max(n_frames, ds.videos[i].meta.n_frames);

  Rng rng = Rng(seed).derive(0x5402);
  const auto param_ptrs = policy.all();
  Adam opt(param_ptrs, AdamConfig{.lr = cfg.lr});
  const std::size_t batch = std::min<std::size_t>(cfg.batch_size, train_idx.size());

  std::vector<std::size_t> order(train_idx.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainStats stats;
  stats.best_val_cider = validation_cider(ds, frozen, &policy, vocab, variant);
  auto best = detail::snapshot_values(param_ptrs);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = detail::now();
    reward_cfg.n_max = nmax_schedule(epoch, cfg.epochs, n_frames, reward_cfg.tau);
    reward_cfg.validate();
    detail::shuffle(order, rng);
    double reward_sum = 0.0;
    double np_sum = 0.0;
    std::size_t done = 0;
    while (done < order.size()) {
      const std::size_t take = std::min(batch, order.size() - done);
      for (std::size_t k = 0; k < take; ++k) {
        const std::size_t row = order[done + k];
        const auto up = reinforce_step(ds.videos[train_idx[row]], policy, frozen, refsets[row],
                                       idf_train, vocab, reward_cfg, variant, rng);
        reward_sum += up.reward_sampled.reward;
        np_sum += static_cast<double>(up.sampled.n_picked());
      }
      done += take;
      detail::scale_grads(param_ptrs, 1.0 / static_cast<double>(take));
      clip_global_norm(param_ptrs, cfg.clip_norm);
      opt.step();
    }

    EpochStats es;
    es.epoch = epoch + 1;
    es.stage = "reinforcement";
    es.reward_mean = reward_sum / static_cast<double>(order.size());
    es.mean_np = np_sum / static_cast<double>(order.size());
    const ValidationPass vp =
        validation_reward_pass(ds, frozen, policy, vocab, idf_train, reward_cfg, variant);
    es.val_cider = vp.cider_mean;
    es.val_reward = vp.reward_mean;
    es.val_mean_np = vp.mean_np;
    es.wall_seconds = detail::seconds_since(t0);
    if (es.val_cider > stats.best_val_cider) {
      stats.best_val_cider = es.val_cider;
      stats.best_epoch = es.epoch;
      best = detail::snapshot_values(param_ptrs);
    }
    stats.epochs.push_back(es);
    if (on_epoch) on_epoch(es);
  }
  detail::restore_values(param_ptrs, best);
  return stats;
}

// ---------------------------------------------------------------------------
// Adaptation stage: approximate joint training. The stochastic picks are
// fixed inputs for the captioner's cross-entropy pass (no gradient reaches
// the policy through it); the policy keeps learning via REINFORCE. One Adam
// instance updates both parameter sets.

inline TrainStats train_adaptation(const Dataset& ds, PickNetParams& policy,
                                   Seq2SeqParams& captioner, const Vocabulary& vocab,
                                   const StageConfig& cfg, RewardConfig reward_cfg,
                                   bool lambda_v_auto, std::uint64_t seed,
                                   CiderVariant variant = CiderVariant::Plain,
                                   const EpochCallback& on_epoch = {}) {
  cfg.validate();
  const auto train_idx = ds.split_indices("train");
  if (train_idx.empty() || ds.split_indices("validation").empty())
    throw ConfigError("train_adaptation: train and validation splits must be non-empty");

  const auto refsets = ds.caption_sets(train_idx);
  const IdfTable idf_train = IdfTable::build(refsets);
  reward_cfg.lambda_v = effective_lambda_v(ds, reward_cfg.lambda_v, lambda_v_auto, seed);
  reward_cfg.n_max = reward_cfg.tau;  // the schedule has already bottomed out
  reward_cfg.validate();

  std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> samples;  // (row, video, caption)
  for (std::size_t row = 0; row < train_idx.size(); ++row)
    for (std::size_t c = 0; c < ds.videos[train_idx[row]].meta.captions.size(); ++c)
      samples.emplace_back(row, train_idx[row], c);

  Rng rng = Rng(seed).derive(0x5403);
  std::vector<Param*> joint = captioner.all();
  for (Param* p : policy.all()) joint.push_back(p);
  Adam opt(joint, AdamConfig{.lr = cfg.lr});
  const std::size_t batch = std::min<std::size_t>(cfg.batch_size, samples.size());

  TrainStats stats;
  stats.best_val_cider = validation_cider(ds, captioner, &policy, vocab, variant);
  auto best = detail::snapshot_values(joint);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = detail::now();
    detail::shuffle(samples, rng);
    double loss_sum = 0.0, reward_sum = 0.0, np_sum = 0.0;
    std::size_t done = 0;
    while (done < samples.size()) {
      const std::size_t take = std::min(batch, samples.size() - done);
      for (std::size_t k = 0; k < take; ++k) {
        const auto [row, vi, ci] = samples[done + k];
        const VideoData& video = ds.videos[vi];
        const auto up = reinforce_step(video, policy, captioner, refsets[row], idf_train, vocab,
                                       reward_cfg, variant, rng);
        reward_sum += up.reward_sampled.reward;
        np_sum += static_cast<double>(up.sampled.n_picked());
        loss_sum += xent_loss_and_grads(video.picked_features(up.sampled.picked),
                                        caption_targets(video.meta.captions[ci], vocab),
                                        captioner, cfg.adapt_feedback_prob, &rng)
                        .loss;
      }
      done += take;
      detail::scale_grads(joint, 1.0 / static_cast<double>(take));
      clip_global_norm(joint, cfg.clip_norm);
      opt.step();
    }

    EpochStats es;
    es.epoch = epoch + 1;
    es.stage = "adaptation";
    es.xent = loss_sum / static_cast<double>(samples.size());
    es.reward_mean = reward_sum / static_cast<double>(samples.size());
    es.mean_np = np_sum / static_cast<double>(samples.size());
    const ValidationPass vp =
        validation_reward_pass(ds, captioner, policy, vocab, idf_train, reward_cfg, variant);
    es.val_cider = vp.cider_mean;
    es.val_reward = vp.reward_mean;
    es.val_mean_np = vp.mean_np;
    es.wall_seconds = detail::seconds_since(t0);
    if (es.val_cider > stats.best_val_cider) {
      stats.best_val_cider = es.val_cider;
      stats.best_epoch = es.epoch;
      best = detail::snapshot_values(joint);
    }
    stats.epochs.push_back(es);
    if (on_epoch) on_epoch(es);
  }
  detail::restore_values(joint, best);
  return stats;
}

// ---------------------------------------------------------------------------
// Checkpoint plumbing shared by the stages and the CLI.

inline Checkpoint seq2seq_checkpoint(const Seq2SeqParams& params, const Vocabulary& vocab,
                                     const std::string& stage) {
  Checkpoint ckpt;
  append_params(ckpt, params.all());
  ckpt.config = nlohmann::json{{"stage", stage},
                               {"model", params.cfg.to_json()},
                               {"vocab_hash", vocab.hash()},
                               {"init", "xavier_uniform"}};
  return ckpt;
}

inline Checkpoint picknet_checkpoint(const PickNetParams& policy, const std::string& stage) {
  Checkpoint ckpt;
  append_params(ckpt, policy.all());
  ckpt.config = nlohmann::json{
      {"stage", stage},
      {"picknet", {{"input_dim", policy.cfg.input_dim}, {"hidden_dim", policy.cfg.hidden_dim}}}};
  return ckpt;
}

inline Checkpoint joint_checkpoint(const Seq2SeqParams& params, const PickNetParams& policy,
                                   const Vocabulary& vocab, const std::string& stage) {
  Checkpoint ckpt = seq2seq_checkpoint(params, vocab, stage);
  append_params(ckpt, policy.all());
  ckpt.config["picknet"] = {{"input_dim", policy.cfg.input_dim},
                            {"hidden_dim", policy.cfg.hidden_dim}};
  return ckpt;
}

inline Seq2SeqParams load_seq2seq(const Checkpoint& ckpt, const std::string& path) {
  if (!ckpt.config.contains("model"))
    throw FormatError(path + ": checkpoint has no captioner config");
  const ModelConfig cfg = ModelConfig::from_json(ckpt.config["model"]);
  Rng dummy(0);
  Seq2SeqParams params = Seq2SeqParams::init(cfg, dummy);
  load_params(ckpt, params.all(), path);
  return params;
}

inline PickNetParams load_picknet(const Checkpoint& ckpt, const std::string& path) {
  if (!ckpt.config.contains("picknet"))
    throw FormatError(path + ": checkpoint has no pick-policy config");
  PickNetConfig cfg;
  cfg.input_dim = ckpt.config["picknet"].at("input_dim").get<std::size_t>();
  cfg.hidden_dim = ckpt.config["picknet"].at("hidden_dim").get<std::size_t>();
  Rng dummy(0);
  PickNetParams policy = PickNetParams::init(cfg, dummy);
  load_params(ckpt, policy.all(), path);
  return policy;
}

inline void verify_vocab_hash(const Checkpoint& ckpt, const Vocabulary& vocab,
                              const std::string& path) {
  if (!ckpt.config.contains("vocab_hash")) return;
  const std::string expected = ckpt.config["vocab_hash"].get<std::string>();
  if (expected != vocab.hash())
    throw ConfigError(path + ": checkpoint was trained with a different vocabulary (hash " +
                      expected + " vs " + vocab.hash() + ")");
}

}  // namespace picknet

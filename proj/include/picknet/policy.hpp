#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "picknet/errors.hpp"
#include "picknet/glance.hpp"
#include "picknet/ops.hpp"
#include "picknet/rng.hpp"
#include "picknet/tensor.hpp"

namespace picknet {

// Action indices in the policy's two-way output.
inline constexpr std::size_t kActionPick = 0;
inline constexpr std::size_t kActionDrop = 1;

struct PickNetConfig {
  std::size_t input_dim = kGlancePixels;
  std::size_t hidden_dim = 1024;
};

// Two-layer pick/drop policy: s = W2 relu(W1 d + b1) + b2.
struct PickNetParams {
  PickNetConfig cfg;
  Param W1, b1, W2, b2;

  static PickNetParams init(const PickNetConfig& cfg, Rng& rng) {
    PickNetParams p;
    p.cfg = cfg;
    p.W1 = Param("pick.W1", Tensor::matrix(cfg.hidden_dim, cfg.input_dim));
    p.b1 = Param("pick.b1", Tensor::vector(cfg.hidden_dim));
    p.W2 = Param("pick.W2", Tensor::matrix(2, cfg.hidden_dim));
    p.b2 = Param("pick.b2", Tensor::vector(2));
    glorot_init(p.W1.value, rng);
    glorot_init(p.W2.value, rng);
    return p;
  }

  std::vector<Param*> all() { return {&W1, &b1, &W2, &b2}; }
  std::vector<const Param*> all() const { return {&W1, &b1, &W2, &b2}; }

  void zero_grads() {
    for (Param* p : all()) p->zero_grad();
  }
};

struct PickDecision {
  Tensor logits;  // s, 2 entries
  Tensor probs;   // softmax(s)
  Tensor hidden;  // relu(W1 d + b1), kept for the backward pass
};

inline PickDecision pick_policy(const Tensor& d, const PickNetParams& p) {
  if (d.size() != p.cfg.input_dim)
    throw ShapeError("pick_policy: input is " + d.shape_str() + ", expected [" +
                     std::to_string(p.cfg.input_dim) + "]");
  PickDecision out;
  out.hidden = relu(affine(p.W1.value, d, p.b1.value));
  out.logits = affine(p.W2.value, out.hidden, p.b2.value);
  out.probs = softmax_stable(out.logits);
  return out;
}

// Accumulates scale * d/dtheta of -log p(action) for one decision, i.e.
// grad_s = scale * (probs - onehot(action)) pushed through the MLP.
inline void accumulate_pick_grad(const Tensor& d, const PickDecision& dec, std::size_t action,
                                 double scale, PickNetParams& p) {
  Tensor ds = Tensor::vector(2);
  ds[0] = scale * (dec.probs[0] - (action == 0 ? 1.0 : 0.0));
  ds[1] = scale * (dec.probs[1] - (action == 1 ? 1.0 : 0.0));
  outer_add(p.W2.grad, ds, dec.hidden);
  add_inplace(p.b2.grad, ds);
  Tensor dh = Tensor::vector(p.cfg.hidden_dim);
  matvec_transpose_add(p.W2.value, ds, dh);
  for (std::size_t j = 0; j < p.cfg.hidden_dim; ++j)
    if (dec.hidden[j] <= 0.0) dh[j] = 0.0;
  outer_add(p.W1.grad, dh, d);
  add_inplace(p.b1.grad, dh);
}

enum class PickMode { Stochastic, Greedy };

struct PickAction {
  bool picked = false;
  double prob = 1.0;   // probability of the chosen action, (0, 1]
  Tensor probs;        // full pick/drop distribution (empty for the forced pick)
  bool forced = false;
};

// One pass of the policy over a video. The first frame is always picked
// (forced) and seeds the template; later frames feed g_t - template to the
// policy. Decisions depend only on frames seen so far.
struct EpisodeTrace {
  PickMode mode = PickMode::Greedy;
  std::vector<PickAction> actions;            // one per frame
  std::vector<std::size_t> picked;            // 0-based frame indices, increasing
  std::vector<std::size_t> template_history;  // template frame index used at each step
  std::vector<Tensor> diffs;                  // policy input per non-first frame
  std::vector<Tensor> hiddens;                // relu activations per non-first frame

  std::size_t n_frames() const { return actions.size(); }
  std::size_t n_picked() const { return picked.size(); }
};

inline EpisodeTrace run_episode(const std::vector<Glance>& glances, const PickNetParams& params,
                                PickMode mode, Rng* rng = nullptr) {
  if (glances.empty()) throw UsageError("run_episode: no glances");
  if (mode == PickMode::Stochastic && rng == nullptr)
    throw UsageError("run_episode: stochastic mode needs an rng");
  EpisodeTrace trace;
  trace.mode = mode;
  trace.actions.reserve(glances.size());

  PickAction first;
  first.picked = true;
  first.forced = true;
  first.prob = 1.0;
  trace.actions.push_back(std::move(first));
  trace.picked.push_back(0);
  std::size_t template_idx = 0;

  for (std::size_t t = 1; t < glances.size(); ++t) {
    trace.template_history.push_back(template_idx);
    Tensor d = glance_diff(glances[t], glances[template_idx]);
    PickDecision dec = pick_policy(d, params);
    std::size_t action;
    if (mode == PickMode::Stochastic) {
      action = sample_categorical(dec.probs, *rng);
    } else {
      action = dec.probs[kActionPick] >= dec.probs[kActionDrop] ? kActionPick : kActionDrop;
    }
    PickAction act;
    act.picked = action == kActionPick;
    act.prob = dec.probs[action];
    act.probs = dec.probs;
    trace.actions.push_back(std::move(act));
    trace.diffs.push_back(std::move(d));
    trace.hiddens.push_back(std::move(dec.hidden));
    if (action == kActionPick) {
      trace.picked.push_back(t);
      template_idx = t;
    }
  }
  return trace;
}

// REINFORCE accumulation for a sampled episode: every non-forced decision
// contributes advantage * (probs - onehot(action)) through the MLP. A zero
// advantage leaves the gradients untouched.
inline void accumulate_episode_gradient(const EpisodeTrace& trace, double advantage,
                                        PickNetParams& params) {
  if (advantage == 0.0) return;
  for (std::size_t t = 1; t < trace.actions.size(); ++t) {
    const PickAction& act = trace.actions[t];
    PickDecision dec;
    dec.hidden = trace.hiddens[t - 1];
    dec.probs = act.probs;
    accumulate_pick_grad(trace.diffs[t - 1], dec, act.picked ? kActionPick : kActionDrop,
                         advantage, params);
  }
}

}  // namespace picknet

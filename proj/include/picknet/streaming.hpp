#pragma once

#include <cstddef>
#include <string>

#include "json.hpp"
#include "picknet/glance.hpp"
#include "picknet/policy.hpp"
#include "picknet/seq2seq.hpp"
#include "picknet/text.hpp"

namespace picknet {

struct StreamEvent {
  double t = 0.0;  // seconds since stream start
  bool picked = false;
  std::string caption;  // meaningful iff picked
  std::size_t n_p = 0;  // picks so far

  nlohmann::json to_json() const {
    return nlohmann::json{{"t", t},
                          {"picked", picked},
                          {"caption", picked ? nlohmann::json(caption) : nlohmann::json(nullptr)},
                          {"n_p", n_p}};
  }
};

// Causal captioning over an unbounded frame stream. Frames arrive one at a
// time; the first is always picked. A picked frame advances the encoder by
// one step and triggers a fresh greedy decode from the current state, so
// the caption after picks {i1..ik} matches the offline caption for that
// pick set exactly. No pick cap applies here: the pick limits are a
// training-time device.
class StreamCaptioner {
 public:
  StreamCaptioner(const Seq2SeqParams& captioner, const PickNetParams& policy,
                  const Vocabulary& vocab, double fps = 1.0)
      : captioner_(captioner),
        policy_(policy),
        vocab_(vocab),
        fps_(fps),
        state_(EncoderState::zero(captioner.cfg.hidden_dim)),
        template_(make_empty_glance()) {
    if (fps <= 0.0) throw UsageError("StreamCaptioner: fps must be positive");
  }

  StreamEvent feed(const Glance& glance, const Tensor& raw_feature) {
    StreamEvent ev;
    ev.t = static_cast<double>(frame_) / fps_;
    bool pick;
    if (frame_ == 0) {
      pick = true;  // forced first pick
    } else {
      PickDecision dec = pick_policy(glance_diff(glance, template_), policy_);
      pick = dec.probs[kActionPick] >= dec.probs[kActionDrop];
    }
    if (pick) {
      template_ = glance;
      state_ = lstm_step(embed_feature(raw_feature, captioner_), state_, captioner_).first;
      ++n_p_;
      ev.picked = true;
      ev.caption = vocab_.decode_text(greedy_decode(state_.h, captioner_));
    }
    ev.n_p = n_p_;
    ++frame_;
    return ev;
  }

  const EncoderState& encoder_state() const { return state_; }
  std::size_t picks_so_far() const { return n_p_; }

 private:
  const Seq2SeqParams& captioner_;
  const PickNetParams& policy_;
  const Vocabulary& vocab_;
  double fps_;
  EncoderState state_;
  Glance template_;
  std::size_t frame_ = 0;
  std::size_t n_p_ = 0;
};

}  // namespace picknet

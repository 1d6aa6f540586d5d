#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"
#include "picknet/errors.hpp"
#include "picknet/ops.hpp"
#include "picknet/rng.hpp"
#include "picknet/tensor.hpp"
#include "picknet/text.hpp"

namespace picknet {

struct ModelConfig {
  std::size_t feature_dim = 2048;
  std::size_t embed_dim = 512;
  std::size_t hidden_dim = 1024;
  std::size_t vocab_size = kNumReserved;
  // The output gate is tanh by default; standard_output_gate switches it to
  // the sigmoid form. Either way |h| < 1 elementwise.
  bool standard_output_gate = false;
  double dropout_retain = 0.5;
  std::size_t max_len = 20;

  nlohmann::json to_json() const {
    return nlohmann::json{{"feature_dim", feature_dim},
                          {"embed_dim", embed_dim},
                          {"hidden_dim", hidden_dim},
                          {"vocab_size", vocab_size},
                          {"standard_output_gate", standard_output_gate},
                          {"dropout_retain", dropout_retain},
                          {"max_len", max_len}};
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.feature_dim = j.at("feature_dim").get<std::size_t>();
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.standard_output_gate = j.value("standard_output_gate", false);
    c.dropout_retain = j.value("dropout_retain", 0.5);
    c.max_len = j.value("max_len", std::size_t{20});
    return c;
  }
};

// All learned weights of the encoder-decoder. Feature embedding maps raw
// D-dim features to embed_dim before the LSTM; word embedding rows live in
// W_w; W_p projects the decoder state to vocabulary logits (no bias).
struct Seq2SeqParams {
  ModelConfig cfg;

  Param feat_W, feat_b;
  Param W_ix, W_ih, b_i;
  Param W_fx, W_fh, b_f;
  Param W_gx, W_gh, b_g;
  Param W_ox, W_oh, b_o;
  Param W_zw, W_zv, W_zp, b_z;
  Param W_rw, W_rv, W_rp, b_r;
  Param W_pw, W_pv, W_pp, b_p;
  Param W_w;
  Param W_p;

  static Seq2SeqParams init(const ModelConfig& cfg, Rng& rng) {
    Seq2SeqParams p;
    p.cfg = cfg;
    const std::size_t D = cfg.feature_dim, E = cfg.embed_dim, H = cfg.hidden_dim,
                      V = cfg.vocab_size;
    auto mat = [&](const char* name, std::size_t r, std::size_t c) {
      Param prm(name, Tensor::matrix(r, c));
      glorot_init(prm.value, rng);
      return prm;
    };
    auto vec = [&](const char* name, std::size_t n) { return Param(name, Tensor::vector(n)); };
    p.feat_W = mat("enc.feat_W", E, D);
    p.feat_b = vec("enc.feat_b", E);
    p.W_ix = mat("enc.W_ix", H, E); p.W_ih = mat("enc.W_ih", H, H); p.b_i = vec("enc.b_i", H);
    p.W_fx = mat("enc.W_fx", H, E); p.W_fh = mat("enc.W_fh", H, H); p.b_f = vec("enc.b_f", H);
    p.W_gx = mat("enc.W_gx", H, E); p.W_gh = mat("enc.W_gh", H, H); p.b_g = vec("enc.b_g", H);
    p.W_ox = mat("enc.W_ox", H, E); p.W_oh = mat("enc.W_oh", H, H); p.b_o = vec("enc.b_o", H);
    p.W_zw = mat("dec.W_zw", H, E); p.W_zv = mat("dec.W_zv", H, H); p.W_zp = mat("dec.W_zp", H, H);
    p.b_z = vec("dec.b_z", H);
    p.W_rw = mat("dec.W_rw", H, E); p.W_rv = mat("dec.W_rv", H, H); p.W_rp = mat("dec.W_rp", H, H);
    p.b_r = vec("dec.b_r", H);
    p.W_pw = mat("dec.W_pw", H, E); p.W_pv = mat("dec.W_pv", H, H); p.W_pp = mat("dec.W_pp", H, H);
    p.b_p = vec("dec.b_p", H);
    p.W_w = mat("dec.W_w", V, E);
    p.W_p = mat("dec.W_p", V, H);
    return p;
  }

  std::vector<Param*> all() {
    return {&feat_W, &feat_b, &W_ix, &W_ih, &b_i, &W_fx, &W_fh, &b_f, &W_gx, &W_gh,
            &b_g,    &W_ox,   &W_oh, &b_o,  &W_zw, &W_zv, &W_zp, &b_z, &W_rw, &W_rv,
            &W_rp,   &b_r,    &W_pw, &W_pv, &W_pp, &b_p,  &W_w,  &W_p};
  }

  std::vector<const Param*> all() const {
    auto* self = const_cast<Seq2SeqParams*>(this);
    std::vector<const Param*> out;
    for (Param* p : self->all()) out.push_back(p);
    return out;
  }

  void zero_grads() {
    for (Param* p : all()) p->zero_grad();
  }
};

struct EncoderState {
  Tensor h, c;

  static EncoderState zero(std::size_t hidden) {
    return EncoderState{Tensor::vector(hidden), Tensor::vector(hidden)};
  }
};

struct LstmStepTrace {
  Tensor x;  // the input actually consumed (post-dropout embedded feature)
  Tensor h_prev, c_prev;
  Tensor i, f, g, o;
  Tensor c, tc;  // tc = tanh(c)
  Tensor h;
};

// One encoder step, exactly the gate equations. c' = f.c + i.g, h' = o.tanh(c').
inline std::pair<EncoderState, LstmStepTrace> lstm_step(const Tensor& x,
                                                        const EncoderState& state,
                                                        const Seq2SeqParams& p) {
  if (x.size() != p.cfg.embed_dim)
    throw ShapeError("lstm_step: input is " + x.shape_str() + ", expected [" +
                     std::to_string(p.cfg.embed_dim) + "]");
  LstmStepTrace t;
  t.x = x;
  t.h_prev = state.h;
  t.c_prev = state.c;
  Tensor a_i = affine(p.W_ix.value, x, p.b_i.value);
  matvec_add(p.W_ih.value, state.h, a_i);
  Tensor a_f = affine(p.W_fx.value, x, p.b_f.value);
  matvec_add(p.W_fh.value, state.h, a_f);
  Tensor a_g = affine(p.W_gx.value, x, p.b_g.value);
  matvec_add(p.W_gh.value, state.h, a_g);
  Tensor a_o = affine(p.W_ox.value, x, p.b_o.value);
  matvec_add(p.W_oh.value, state.h, a_o);
  t.i = sigmoid(a_i);
  t.f = sigmoid(a_f);
  t.g = tanh_vec(a_g);
  t.o = p.cfg.standard_output_gate ? sigmoid(a_o) : tanh_vec(a_o);
  const std::size_t H = p.cfg.hidden_dim;
  t.c = Tensor::vector(H);
  t.tc = Tensor::vector(H);
  t.h = Tensor::vector(H);
  for (std::size_t j = 0; j < H; ++j) {
    t.c[j] = t.f[j] * state.c[j] + t.i[j] * t.g[j];
    t.tc[j] = std::tanh(t.c[j]);
    t.h[j] = t.o[j] * t.tc[j];
  }
  return {EncoderState{t.h, t.c}, t};
}

// Backward through one encoder step. dh/dc are gradients flowing into this
// step's outputs; returns gradients for the consumed input and the previous
// state, accumulating parameter gradients in place.
inline void lstm_step_backward(const LstmStepTrace& t, const Tensor& dh, const Tensor& dc_in,
                               Seq2SeqParams& p, Tensor& dx, Tensor& dh_prev, Tensor& dc_prev) {
  const std::size_t H = p.cfg.hidden_dim;
  Tensor da_i = Tensor::vector(H), da_f = Tensor::vector(H), da_g = Tensor::vector(H),
         da_o = Tensor::vector(H);
  for (std::size_t j = 0; j < H; ++j) {
    const double do_j = dh[j] * t.tc[j];
    da_o[j] = p.cfg.standard_output_gate ? do_j * t.o[j] * (1.0 - t.o[j])
                                         : do_j * (1.0 - t.o[j] * t.o[j]);
    const double dc = dc_in[j] + dh[j] * t.o[j] * (1.0 - t.tc[j] * t.tc[j]);
    da_i[j] = dc * t.g[j] * t.i[j] * (1.0 - t.i[j]);
    da_f[j] = dc * t.c_prev[j] * t.f[j] * (1.0 - t.f[j]);
    da_g[j] = dc * t.i[j] * (1.0 - t.g[j] * t.g[j]);
    dc_prev[j] = dc * t.f[j];
  }
  dx.fill(0.0);
  dh_prev.fill(0.0);
  matvec_transpose_add(p.W_ix.value, da_i, dx);
  matvec_transpose_add(p.W_fx.value, da_f, dx);
  matvec_transpose_add(p.W_gx.value, da_g, dx);
  matvec_transpose_add(p.W_ox.value, da_o, dx);
  matvec_transpose_add(p.W_ih.value, da_i, dh_prev);
  matvec_transpose_add(p.W_fh.value, da_f, dh_prev);
  matvec_transpose_add(p.W_gh.value, da_g, dh_prev);
  matvec_transpose_add(p.W_oh.value, da_o, dh_prev);
  outer_add(p.W_ix.grad, da_i, t.x);
  outer_add(p.W_ih.grad, da_i, t.h_prev);
  add_inplace(p.b_i.grad, da_i);
  outer_add(p.W_fx.grad, da_f, t.x);
  outer_add(p.W_fh.grad, da_f, t.h_prev);
  add_inplace(p.b_f.grad, da_f);
  outer_add(p.W_gx.grad, da_g, t.x);
  outer_add(p.W_gh.grad, da_g, t.h_prev);
  add_inplace(p.b_g.grad, da_g);
  outer_add(p.W_ox.grad, da_o, t.x);
  outer_add(p.W_oh.grad, da_o, t.h_prev);
  add_inplace(p.b_o.grad, da_o);
}

inline Tensor embed_feature(const Tensor& raw, const Seq2SeqParams& p) {
  return affine(p.feat_W.value, raw, p.feat_b.value);
}

inline Tensor embed_word(int word, const Seq2SeqParams& p) {
  if (word < 0 || static_cast<std::size_t>(word) >= p.cfg.vocab_size)
    throw UsageError("embed_word: id " + std::to_string(word) + " out of range");
  Tensor e = Tensor::vector(p.cfg.embed_dim);
  for (std::size_t j = 0; j < p.cfg.embed_dim; ++j)
    e[j] = p.W_w.value(static_cast<std::size_t>(word), j);
  return e;
}

// Encodes raw features to the video code v = h_T (evaluation mode, no
// dropout). PickNet guarantees at least one picked frame upstream.
inline Tensor encode_sequence(const std::vector<Tensor>& features, const Seq2SeqParams& p) {
  if (features.empty()) throw UsageError("encode_sequence: empty feature sequence");
  EncoderState state = EncoderState::zero(p.cfg.hidden_dim);
  for (const Tensor& raw : features) state = lstm_step(embed_feature(raw, p), state, p).first;
  return state.h;
}

struct DecoderState {
  Tensor p;

  static DecoderState zero(std::size_t hidden) { return DecoderState{Tensor::vector(hidden)}; }
};

struct GruStepTrace {
  int prev_word = kBos;
  Tensor e;  // embedded previous word actually consumed (post-dropout)
  Tensor v;  // video code actually consumed
  Tensor p_prev;
  Tensor z, r, q;  // q = r . p_prev
  Tensor ptilde, p;
};

// One decoder step from the embedded previous word.
// p' = (1-z).p_prev + z.ptilde.
inline std::pair<DecoderState, GruStepTrace> gru_step_embedded(const Tensor& e, const Tensor& v,
                                                               const DecoderState& state,
                                                               const Seq2SeqParams& p) {
  if (e.size() != p.cfg.embed_dim || v.size() != p.cfg.hidden_dim)
    throw ShapeError("gru_step: word embedding is " + e.shape_str() + ", v is " + v.shape_str());
  GruStepTrace t;
  t.e = e;
  t.v = v;
  t.p_prev = state.p;
  Tensor a_z = affine(p.W_zw.value, e, p.b_z.value);
  matvec_add(p.W_zv.value, v, a_z);
  matvec_add(p.W_zp.value, state.p, a_z);
  Tensor a_r = affine(p.W_rw.value, e, p.b_r.value);
  matvec_add(p.W_rv.value, v, a_r);
  matvec_add(p.W_rp.value, state.p, a_r);
  t.z = sigmoid(a_z);
  t.r = sigmoid(a_r);
  const std::size_t H = p.cfg.hidden_dim;
  t.q = Tensor::vector(H);
  for (std::size_t j = 0; j < H; ++j) t.q[j] = t.r[j] * state.p[j];
  Tensor a_p = affine(p.W_pw.value, e, p.b_p.value);
  matvec_add(p.W_pv.value, v, a_p);
  matvec_add(p.W_pp.value, t.q, a_p);
  t.ptilde = tanh_vec(a_p);
  t.p = Tensor::vector(H);
  for (std::size_t j = 0; j < H; ++j)
    t.p[j] = (1.0 - t.z[j]) * state.p[j] + t.z[j] * t.ptilde[j];
  return {DecoderState{t.p}, t};
}

inline std::pair<DecoderState, GruStepTrace> gru_step(int prev_word, const Tensor& v,
                                                      const DecoderState& state,
                                                      const Seq2SeqParams& p) {
  auto [next, trace] = gru_step_embedded(embed_word(prev_word, p), v, state, p);
  trace.prev_word = prev_word;
  return {next, trace};
}

// Backward through one decoder step. dp is the gradient on this step's
// output state; de/dv/dp_prev come back, parameter gradients accumulate.
inline void gru_step_backward(const GruStepTrace& t, const Tensor& dp, Seq2SeqParams& p,
                              Tensor& de, Tensor& dv, Tensor& dp_prev) {
  const std::size_t H = p.cfg.hidden_dim;
  Tensor da_z = Tensor::vector(H), da_r = Tensor::vector(H), da_p = Tensor::vector(H);
  Tensor dq = Tensor::vector(H);
  for (std::size_t j = 0; j < H; ++j) {
    const double dpt = dp[j] * t.z[j];
    da_p[j] = dpt * (1.0 - t.ptilde[j] * t.ptilde[j]);
    const double dz = dp[j] * (t.ptilde[j] - t.p_prev[j]);
    da_z[j] = dz * t.z[j] * (1.0 - t.z[j]);
  }
  matvec_transpose_add(p.W_pp.value, da_p, dq);
  for (std::size_t j = 0; j < H; ++j) {
    const double dr = dq[j] * t.p_prev[j];
    da_r[j] = dr * t.r[j] * (1.0 - t.r[j]);
  }
  dp_prev.fill(0.0);
  for (std::size_t j = 0; j < H; ++j) dp_prev[j] = dp[j] * (1.0 - t.z[j]) + dq[j] * t.r[j];
  matvec_transpose_add(p.W_zp.value, da_z, dp_prev);
  matvec_transpose_add(p.W_rp.value, da_r, dp_prev);
  de.fill(0.0);
  matvec_transpose_add(p.W_zw.value, da_z, de);
  matvec_transpose_add(p.W_rw.value, da_r, de);
  matvec_transpose_add(p.W_pw.value, da_p, de);
  matvec_transpose_add(p.W_zv.value, da_z, dv);
  matvec_transpose_add(p.W_rv.value, da_r, dv);
  matvec_transpose_add(p.W_pv.value, da_p, dv);
  outer_add(p.W_zw.grad, da_z, t.e);
  outer_add(p.W_zv.grad, da_z, t.v);
  outer_add(p.W_zp.grad, da_z, t.p_prev);
  add_inplace(p.b_z.grad, da_z);
  outer_add(p.W_rw.grad, da_r, t.e);
  outer_add(p.W_rv.grad, da_r, t.v);
  outer_add(p.W_rp.grad, da_r, t.p_prev);
  add_inplace(p.b_r.grad, da_r);
  outer_add(p.W_pw.grad, da_p, t.e);
  outer_add(p.W_pv.grad, da_p, t.v);
  outer_add(p.W_pp.grad, da_p, t.q);
  add_inplace(p.b_p.grad, da_p);
}

// softmax(W_p p_t) over the vocabulary.
inline Tensor word_distribution(const DecoderState& state, const Seq2SeqParams& p) {
  Tensor logits = Tensor::vector(p.cfg.vocab_size);
  matvec_add(p.W_p.value, state.p, logits);
  return softmax_stable(logits);
}

// Argmax over the vocabulary with BOS and PAD structurally excluded, so a
// decoded caption can never contain them. EOS stays eligible (it terminates).
inline int argmax_word(const Tensor& dist) {
  int best = -1;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (i == static_cast<std::size_t>(kBos) || i == static_cast<std::size_t>(kPad)) continue;
    if (best < 0 || dist[i] > dist[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

// Greedy decoding: start from BOS, take the argmax word each step, stop at
// EOS or after max_len tokens. EOS is not part of the returned sequence.
inline TokenSeq greedy_decode(const Tensor& v, const Seq2SeqParams& p, std::size_t max_len) {
  if (max_len < 1) throw UsageError("greedy_decode: max_len must be >= 1");
  TokenSeq out;
  DecoderState state = DecoderState::zero(p.cfg.hidden_dim);
  int prev = kBos;
  for (std::size_t step = 0; step < max_len; ++step) {
    auto [next, trace] = gru_step(prev, v, state, p);
    state = next;
    const int word = argmax_word(word_distribution(state, p));
    if (word == kEos) break;
    out.push_back(word);
    prev = word;
  }
  return out;
}

inline TokenSeq greedy_decode(const Tensor& v, const Seq2SeqParams& p) {
  return greedy_decode(v, p, p.cfg.max_len);
}

namespace detail {

// Inverted-dropout mask: entries are 1/retain with probability retain, else
// 0. retain >= 1 or a null rng disables dropout (all ones).
inline Tensor dropout_mask(std::size_t n, double retain, Rng* rng) {
  Tensor m = Tensor::vector(n);
  if (rng == nullptr || retain >= 1.0) {
    m.fill(1.0);
    return m;
  }
  for (std::size_t j = 0; j < n; ++j) m[j] = rng->bernoulli(retain) ? 1.0 / retain : 0.0;
  return m;
}

inline Tensor apply_mask(const Tensor& x, const Tensor& m) {
  Tensor y = Tensor::vector(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) y[j] = x[j] * m[j];
  return y;
}

}  // namespace detail

struct XentResult {
  double loss = 0.0;
  std::size_t steps = 0;
  std::vector<int> fed;  // word actually fed at each step (BOS first)
};

// Cross-entropy loss over the target sequence with backpropagation through
// time into every parameter, encoder included (through v). The word fed at
// step t is the model's own argmax prediction with probability
// feedback_prob, otherwise the ground truth. rng == nullptr runs the exact
// teacher-forced, dropout-free pass (the gradient-check mode);
// feedback_prob must then be 0.
inline XentResult xent_loss_and_grads(const std::vector<Tensor>& features, const TokenSeq& targets,
                                      Seq2SeqParams& p, double feedback_prob, Rng* rng) {
  if (features.empty()) throw UsageError("xent_loss_and_grads: empty feature sequence");
  if (targets.empty()) throw UsageError("xent_loss_and_grads: empty target sequence");
  if (feedback_prob < 0.0 || feedback_prob > 1.0)
    throw UsageError("xent_loss_and_grads: feedback_prob outside [0,1]");
  if (rng == nullptr && feedback_prob != 0.0)
    throw UsageError("xent_loss_and_grads: scheduled sampling needs an rng");

  const std::size_t H = p.cfg.hidden_dim;
  const double retain = p.cfg.dropout_retain;

  // encoder forward
  std::vector<LstmStepTrace> enc_traces;
  std::vector<Tensor> enc_masks;
  enc_traces.reserve(features.size());
  EncoderState state = EncoderState::zero(H);
  for (const Tensor& raw : features) {
    Tensor mask = detail::dropout_mask(p.cfg.embed_dim, retain, rng);
    Tensor e = detail::apply_mask(embed_feature(raw, p), mask);
    auto [next, trace] = lstm_step(e, state, p);
    state = next;
    enc_traces.push_back(std::move(trace));
    enc_masks.push_back(std::move(mask));
  }
  const Tensor v_mask = detail::dropout_mask(H, retain, rng);
  const Tensor v = detail::apply_mask(state.h, v_mask);

  // decoder forward
  XentResult result;
  DecoderState dstate = DecoderState::zero(H);
  std::vector<GruStepTrace> dec_traces;
  std::vector<Tensor> word_masks, out_masks, probs, p_outs;
  std::vector<int> fed_words;
  int model_prev = kBos;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    int fed;
    if (t == 0) {
      fed = kBos;
    } else if (rng != nullptr && rng->bernoulli(feedback_prob)) {
      fed = model_prev;
    } else {
      fed = targets[t - 1];
    }
    Tensor wmask = detail::dropout_mask(p.cfg.embed_dim, retain, rng);
    Tensor e = detail::apply_mask(embed_word(fed, p), wmask);
    auto [next, trace] = gru_step_embedded(e, v, dstate, p);
    trace.prev_word = fed;
    dstate = next;
    Tensor omask = detail::dropout_mask(H, retain, rng);
    Tensor p_out = detail::apply_mask(dstate.p, omask);
    Tensor logits = Tensor::vector(p.cfg.vocab_size);
    matvec_add(p.W_p.value, p_out, logits);
    Tensor dist = softmax_stable(logits);
    const int target = targets[t];
    if (target < 0 || static_cast<std::size_t>(target) >= p.cfg.vocab_size)
      throw UsageError("xent_loss_and_grads: target id " + std::to_string(target) +
                       " out of range");
    result.loss -= std::log(std::max(dist[static_cast<std::size_t>(target)], 1e-300));
    model_prev = argmax_word(dist);
    dec_traces.push_back(std::move(trace));
    word_masks.push_back(std::move(wmask));
    out_masks.push_back(std::move(omask));
    probs.push_back(std::move(dist));
    p_outs.push_back(std::move(p_out));
    fed_words.push_back(fed);
  }
  result.steps = targets.size();
  result.fed = fed_words;

  // decoder backward
  Tensor dv = Tensor::vector(H);
  Tensor dp_next = Tensor::vector(H);
  Tensor de = Tensor::vector(p.cfg.embed_dim);
  Tensor dp_prev = Tensor::vector(H);
  for (std::size_t t = targets.size(); t-- > 0;) {
    Tensor dlogits = probs[t];
    dlogits[static_cast<std::size_t>(targets[t])] -= 1.0;
    outer_add(p.W_p.grad, dlogits, p_outs[t]);
    Tensor dp_out = Tensor::vector(H);
    matvec_transpose_add(p.W_p.value, dlogits, dp_out);
    Tensor dp = dp_next;
    for (std::size_t j = 0; j < H; ++j) dp[j] += dp_out[j] * out_masks[t][j];
    gru_step_backward(dec_traces[t], dp, p, de, dv, dp_prev);
    const int fed = fed_words[t];
    for (std::size_t j = 0; j < p.cfg.embed_dim; ++j)
      p.W_w.grad(static_cast<std::size_t>(fed), j) += de[j] * word_masks[t][j];
    dp_next = dp_prev;
  }

  // encoder backward
  Tensor dh = Tensor::vector(H);
  for (std::size_t j = 0; j < H; ++j) dh[j] = dv[j] * v_mask[j];
  Tensor dc = Tensor::vector(H);
  Tensor dx = Tensor::vector(p.cfg.embed_dim);
  Tensor dh_prev = Tensor::vector(H);
  Tensor dc_prev = Tensor::vector(H);
  for (std::size_t t = features.size(); t-- > 0;) {
    lstm_step_backward(enc_traces[t], dh, dc, p, dx, dh_prev, dc_prev);
    Tensor de_feat = Tensor::vector(p.cfg.embed_dim);
    for (std::size_t j = 0; j < p.cfg.embed_dim; ++j) de_feat[j] = dx[j] * enc_masks[t][j];
    outer_add(p.feat_W.grad, de_feat, features[t]);
    add_inplace(p.feat_b.grad, de_feat);
    dh = dh_prev;
    dc = dc_prev;
  }
  return result;
}

}  // namespace picknet

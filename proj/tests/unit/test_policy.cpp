#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "picknet/grad_check.hpp"
#include "picknet/policy.hpp"

using namespace picknet;

namespace {

PickNetConfig tiny_cfg(std::size_t input = kGlancePixels, std::size_t hidden = 8) {
  PickNetConfig cfg;
  cfg.input_dim = input;
  cfg.hidden_dim = hidden;
  return cfg;
}

std::vector<Glance> random_glances(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Glance> out;
  for (std::size_t f = 0; f < n; ++f) {
    Glance g = make_empty_glance();
    for (std::size_t i = 0; i < kGlancePixels; ++i) g[i] = rng.next_double();
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace

TEST_CASE("pick_policy zero params give an even split") {
  Rng rng(1);
  PickNetParams p = PickNetParams::init(tiny_cfg(), rng);
  for (Param* prm : p.all()) prm->value.fill(0.0);
  Tensor d = Tensor::vector(kGlancePixels);
  PickDecision dec = pick_policy(d, p);
  CHECK(dec.probs[kActionPick] == Catch::Approx(0.5));
  CHECK(dec.probs[kActionDrop] == Catch::Approx(0.5));
}

TEST_CASE("pick_policy bias saturation") {
  Rng rng(2);
  PickNetParams p = PickNetParams::init(tiny_cfg(), rng);
  for (Param* prm : p.all()) prm->value.fill(0.0);
  p.b2.value[kActionPick] = 10.0;
  p.b2.value[kActionDrop] = -10.0;
  Tensor d = Tensor::vector(kGlancePixels);
  PickDecision dec = pick_policy(d, p);
  CHECK(dec.probs[kActionPick] == Catch::Approx(1.0).margin(1e-8));
  CHECK_THROWS_AS(pick_policy(Tensor::vector(5), p), ShapeError);
}

TEST_CASE("policy log-prob gradient matches finite differences") {
  for (std::uint64_t seed : {5ull, 6ull, 7ull}) {
    PickNetConfig cfg = tiny_cfg(6, 5);  // tiny input for the check
    Rng rng(seed);
    PickNetParams p = PickNetParams::init(cfg, rng);
    for (double& v : p.b1.value.data()) v = rng.uniform(-0.3, 0.3);
    for (double& v : p.b2.value.data()) v = rng.uniform(-0.3, 0.3);
    Tensor d = Tensor::vector(cfg.input_dim);
    for (double& v : d.data()) v = rng.uniform(-1.0, 1.0);
    const std::size_t action = seed % 2 == 0 ? kActionPick : kActionDrop;

    p.zero_grads();
    PickDecision dec = pick_policy(d, p);
    accumulate_pick_grad(d, dec, action, 1.0, p);  // grads of -log p(action)

    auto loss = [&] {
      PickNetParams q = p;
      return -std::log(pick_policy(d, q).probs[action]);
    };
    auto report = grad_check(loss, p.all(), 1e-5);
    CHECK(report.max_rel_err < 1e-4);
  }
}

TEST_CASE("run_episode forces the first pick") {
  Rng rng(11);
  PickNetParams p = PickNetParams::init(tiny_cfg(), rng);
  auto glances = random_glances(6, 12);

  Rng episode_rng(13);
  EpisodeTrace trace = run_episode(glances, p, PickMode::Stochastic, &episode_rng);
  REQUIRE_FALSE(trace.actions.empty());
  CHECK(trace.actions[0].forced);
  CHECK(trace.actions[0].picked);
  CHECK(trace.picked[0] == 0);
  CHECK(trace.n_picked() >= 1);
  for (std::size_t i = 1; i < trace.picked.size(); ++i)
    CHECK(trace.picked[i] > trace.picked[i - 1]);
  for (const PickAction& a : trace.actions) {
    CHECK(a.prob > 0.0);
    CHECK(a.prob <= 1.0);
  }
}

TEST_CASE("drop-favoring params pick only the first frame in greedy mode") {
  Rng rng(21);
  PickNetParams p = PickNetParams::init(tiny_cfg(), rng);
  for (Param* prm : p.all()) prm->value.fill(0.0);
  p.b2.value[kActionPick] = -10.0;
  p.b2.value[kActionDrop] = 10.0;
  auto glances = random_glances(8, 22);
  EpisodeTrace trace = run_episode(glances, p, PickMode::Greedy);
  CHECK(trace.picked == std::vector<std::size_t>{0});
}

TEST_CASE("stochastic traces replay under a fixed seed; greedy needs no rng") {
  Rng rng(31);
  PickNetParams p = PickNetParams::init(tiny_cfg(), rng);
  auto glances = random_glances(10, 32);

  Rng r1(7), r2(7);
  EpisodeTrace t1 = run_episode(glances, p, PickMode::Stochastic, &r1);
  EpisodeTrace t2 = run_episode(glances, p, PickMode::Stochastic, &r2);
  CHECK(t1.picked == t2.picked);
  for (std::size_t i = 0; i < t1.actions.size(); ++i)
    CHECK(t1.actions[i].picked == t2.actions[i].picked);

  EpisodeTrace g1 = run_episode(glances, p, PickMode::Greedy);
  EpisodeTrace g2 = run_episode(glances, p, PickMode::Greedy, &r1);  // rng ignored
  CHECK(g1.picked == g2.picked);

  CHECK_THROWS_AS(run_episode(glances, p, PickMode::Stochastic, nullptr), UsageError);
  CHECK_THROWS_AS(run_episode({}, p, PickMode::Greedy), UsageError);
}

TEST_CASE("symmetric logits sample picks at one half") {
  Rng rng(41);
  PickNetParams p = PickNetParams::init(tiny_cfg(), rng);
  for (Param* prm : p.all()) prm->value.fill(0.0);
  auto glances = random_glances(4, 42);  // 3 non-forced decisions per episode

  Rng episode_rng(43);
  std::size_t picks = 0, decisions = 0;
  for (int e = 0; e < 10000; ++e) {
    EpisodeTrace t = run_episode(glances, p, PickMode::Stochastic, &episode_rng);
    for (std::size_t i = 1; i < t.actions.size(); ++i) {
      ++decisions;
      if (t.actions[i].picked) ++picks;
    }
  }
  const double rate = static_cast<double>(picks) / static_cast<double>(decisions);
  CHECK(rate > 0.49);
  CHECK(rate < 0.51);
}

TEST_CASE("decisions are causal in the frame sequence") {
  Rng rng(51);
  PickNetParams p = PickNetParams::init(tiny_cfg(), rng);
  auto a = random_glances(8, 52);
  auto b = a;
  // change only the tail
  for (std::size_t f = 5; f < b.size(); ++f)
    for (std::size_t i = 0; i < kGlancePixels; ++i) b[f][i] = 1.0 - b[f][i];
  EpisodeTrace ta = run_episode(a, p, PickMode::Greedy);
  EpisodeTrace tb = run_episode(b, p, PickMode::Greedy);
  for (std::size_t f = 0; f < 5; ++f) CHECK(ta.actions[f].picked == tb.actions[f].picked);
}

TEST_CASE("zero advantage accumulates exactly nothing") {
  Rng rng(61);
  PickNetParams p = PickNetParams::init(tiny_cfg(), rng);
  auto glances = random_glances(6, 62);
  Rng episode_rng(63);
  EpisodeTrace trace = run_episode(glances, p, PickMode::Stochastic, &episode_rng);
  p.zero_grads();
  accumulate_episode_gradient(trace, 0.0, p);
  for (const Param* prm : p.all())
    for (double g : prm->grad.data()) CHECK(g == 0.0);

  accumulate_episode_gradient(trace, 1.0, p);
  double norm = 0.0;
  for (const Param* prm : p.all())
    for (double g : prm->grad.data()) norm += g * g;
  CHECK(norm > 0.0);
}

TEST_CASE("forced first frame contributes no gradient term") {
  Rng rng(71);
  PickNetParams p = PickNetParams::init(tiny_cfg(), rng);
  // single-frame video: only the forced pick happens
  auto glances = random_glances(1, 72);
  Rng episode_rng(73);
  EpisodeTrace trace = run_episode(glances, p, PickMode::Stochastic, &episode_rng);
  CHECK(trace.n_picked() == 1);
  p.zero_grads();
  accumulate_episode_gradient(trace, 2.5, p);
  for (const Param* prm : p.all())
    for (double g : prm->grad.data()) CHECK(g == 0.0);
}

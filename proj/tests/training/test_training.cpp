#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <vector>

#include "picknet/training.hpp"

using namespace picknet;

namespace {

ModelConfig desk_model(std::size_t feature_dim, std::size_t vocab) {
  ModelConfig cfg;
  cfg.feature_dim = feature_dim;
  cfg.embed_dim = 16;
  cfg.hidden_dim = 32;
  cfg.vocab_size = vocab;
  cfg.dropout_retain = 1.0;
  cfg.max_len = 12;
  return cfg;
}

Vocabulary build_train_vocab(const Dataset& ds, int min_freq = 3) {
  std::vector<std::vector<std::string>> corpus;
  for (std::size_t i : ds.split_indices("train"))
    for (const std::string& c : ds.videos[i].meta.captions) corpus.push_back(tokenize(c));
  return Vocabulary::build(corpus, min_freq);
}

// Tiny single-scene dataset: the three captions of each video coincide, so
// the captioner can drive the loss toward zero.
Dataset overfit_dataset() {
  SynthOptions opt;
  opt.seed = 3;
  opt.n_train = 5;
  opt.n_val = 2;
  opt.n_test = 2;
  opt.n_frames = 8;
  opt.feature_dim = 8;
  opt.scenes_min = 1;
  opt.scenes_max = 1;
  return generate_synthetic(opt);
}

}  // namespace

TEST_CASE("supervision overfits a 5-video set") {
  Dataset ds = overfit_dataset();
  Vocabulary vocab = build_train_vocab(ds, 1);
  ModelConfig mcfg = desk_model(ds.feature_dim, static_cast<std::size_t>(vocab.size()));
  Rng init_rng(17);
  Seq2SeqParams params = Seq2SeqParams::init(mcfg, init_rng);

  StageConfig cfg;
  cfg.epochs = 500;
  cfg.batch_size = 16;
  cfg.lr = 3e-4;
  cfg.sched_samp_start = 0.0;
  cfg.sched_samp_end = 0.25;

  TrainStats stats = train_supervision(ds, params, vocab, cfg, 99);
  REQUIRE(stats.epochs.size() == 500);
  const double initial = stats.epochs.front().xent;
  double best_loss = initial;
  for (const EpochStats& e : stats.epochs) best_loss = std::min(best_loss, e.xent);
  INFO("initial " << initial << " best " << best_loss);
  CHECK(best_loss < 0.1 * initial);

  // scheduled sampling endpoints
  CHECK(detail::lerp_epoch(cfg.sched_samp_start, cfg.sched_samp_end, 0, cfg.epochs) == 0.0);
  CHECK(detail::lerp_epoch(cfg.sched_samp_start, cfg.sched_samp_end, cfg.epochs - 1, cfg.epochs) ==
        Catch::Approx(0.25));
}

TEST_CASE("supervision is deterministic under a fixed seed") {
  Dataset ds = overfit_dataset();
  Vocabulary vocab = build_train_vocab(ds, 1);
  ModelConfig mcfg = desk_model(ds.feature_dim, static_cast<std::size_t>(vocab.size()));

  auto run = [&] {
    Rng init_rng(21);
    Seq2SeqParams params = Seq2SeqParams::init(mcfg, init_rng);
    StageConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 8;
    TrainStats stats = train_supervision(ds, params, vocab, cfg, 7);
    return std::make_pair(std::move(params), std::move(stats));
  };
  auto [p1, s1] = run();
  auto [p2, s2] = run();
  for (std::size_t e = 0; e < s1.epochs.size(); ++e) {
    CHECK(s1.epochs[e].xent == s2.epochs[e].xent);
    CHECK(s1.epochs[e].val_cider == s2.epochs[e].val_cider);
  }
  auto t1 = p1.all(), t2 = p2.all();
  for (std::size_t k = 0; k < t1.size(); ++k)
    for (std::size_t i = 0; i < t1[k]->value.size(); ++i)
      CHECK(t1[k]->value[i] == t2[k]->value[i]);
}

TEST_CASE("reinforce_step zero advantage is a parameter identity") {
  Rng rng(5);
  PickNetConfig pcfg;
  pcfg.hidden_dim = 8;
  PickNetParams policy = PickNetParams::init(pcfg, rng);
  std::vector<Glance> glances;
  Rng grng(6);
  for (int f = 0; f < 10; ++f) {
    Glance g = make_empty_glance();
    for (std::size_t i = 0; i < kGlancePixels; ++i) g[i] = grng.next_double();
    glances.push_back(std::move(g));
  }

  Rng episode_rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    policy.zero_grads();
    auto up = reinforce_step_custom(
        glances, policy, [](const EpisodeTrace&) { return RewardBreakdown{0, 0, 1, 0.75, false}; },
        episode_rng);
    CHECK(up.advantage == 0.0);
    for (const Param* p : policy.all())
      for (double g : p->grad.data()) CHECK(g == 0.0);
  }
}

TEST_CASE("positive advantage raises the sampled episode's probability") {
  Rng rng(15);
  PickNetConfig pcfg;
  pcfg.hidden_dim = 16;
  PickNetParams policy = PickNetParams::init(pcfg, rng);
  std::vector<Glance> glances;
  Rng grng(16);
  for (int f = 0; f < 8; ++f) {
    Glance g = make_empty_glance();
    for (std::size_t i = 0; i < kGlancePixels; ++i) g[i] = grng.next_double();
    glances.push_back(std::move(g));
  }

  Rng episode_rng(17);
  EpisodeTrace sampled = run_episode(glances, policy, PickMode::Stochastic, &episode_rng);
  auto log_prob = [&](const PickNetParams& p) {
    double acc = 0.0;
    std::size_t tmpl = 0;
    for (std::size_t t = 1; t < glances.size(); ++t) {
      PickDecision dec = pick_policy(glance_diff(glances[t], glances[tmpl]), p);
      const std::size_t action = sampled.actions[t].picked ? kActionPick : kActionDrop;
      acc += std::log(dec.probs[action]);
      if (sampled.actions[t].picked) tmpl = t;
    }
    return acc;
  };

  const double before = log_prob(policy);
  policy.zero_grads();
  accumulate_episode_gradient(sampled, 1.0, policy);  // pretend advantage +1
  Adam opt(policy.all(), AdamConfig{.lr = 1e-4});
  opt.step();
  const double after = log_prob(policy);
  CHECK(after >= before);
}

TEST_CASE("policy learns a rigged key-frame task") {
  // 10 visually distinct key frames among 30; reward = fraction of keys hit.
  const std::size_t n_frames = 30;
  std::vector<std::size_t> keys;
  for (std::size_t k = 0; k < 10; ++k) keys.push_back(3 * k + 2);

  std::vector<Glance> glances(n_frames);
  Rng grng(23);
  Glance current = make_empty_glance();
  for (std::size_t f = 0; f < n_frames; ++f) {
    const bool is_key = std::find(keys.begin(), keys.end(), f) != keys.end();
    if (is_key || f == 0) {
      for (std::size_t i = 0; i < kGlancePixels; ++i) current[i] = grng.next_double();
    }
    glances[f] = current;  // non-key frames repeat the previous texture
  }

  Rng rng(24);
  PickNetConfig pcfg;
  pcfg.hidden_dim = 32;
  PickNetParams policy = PickNetParams::init(pcfg, rng);
  Adam opt(policy.all(), AdamConfig{.lr = 1e-3});

  auto reward_of = [&](const EpisodeTrace& trace) {
    std::size_t hit = 0;
    for (std::size_t f : trace.picked)
      if (std::find(keys.begin(), keys.end(), f) != keys.end()) ++hit;
    RewardBreakdown b;
    b.n_picked = trace.n_picked();
    b.reward = static_cast<double>(hit) / static_cast<double>(keys.size());
    return b;
  };

  Rng episode_rng(25);
  for (int update = 0; update < 2000; ++update) {
    policy.zero_grads();
    reinforce_step_custom(glances, policy, reward_of, episode_rng);
    clip_global_norm(policy.all(), 5.0);
    opt.step();
  }
  EpisodeTrace greedy = run_episode(glances, policy, PickMode::Greedy);
  std::size_t recovered = 0;
  for (std::size_t key : keys)
    if (std::find(greedy.picked.begin(), greedy.picked.end(), key) != greedy.picked.end())
      ++recovered;
  INFO("recovered " << recovered << " of " << keys.size() << " keys, n_picked "
                    << greedy.n_picked());
  CHECK(recovered >= 9);
}

TEST_CASE("self-critical baseline reduces gradient-norm variance") {
  // The baseline is a control variate: it pays off once the greedy episode
  // tracks the sampled one, i.e. at a trained policy against a captioner
  // with per-video reward structure. Train both, then freeze the policy and
  // measure 200 episodes.
  SynthOptions opt;
  opt.seed = 29;
  opt.n_train = 24;
  opt.n_val = 6;
  opt.n_test = 6;
  opt.n_frames = 30;
  opt.feature_dim = 16;
  opt.scenes_min = 1;
  opt.scenes_max = 3;
  Dataset ds = generate_synthetic(opt);
  Vocabulary vocab = build_train_vocab(ds, 1);
  ModelConfig mcfg = desk_model(ds.feature_dim, static_cast<std::size_t>(vocab.size()));
  Rng init(31);
  Seq2SeqParams captioner = Seq2SeqParams::init(mcfg, init);
  StageConfig sup;
  sup.epochs = 120;
  sup.batch_size = 4;
  train_supervision(ds, captioner, vocab, sup, 30);

  PickNetConfig pcfg;
  pcfg.hidden_dim = 16;
  PickNetParams policy = PickNetParams::init(pcfg, init);

  const auto train_idx = ds.split_indices("train");
  const auto refsets = ds.caption_sets(train_idx);
  const IdfTable idf = IdfTable::build(refsets);
  RewardConfig rcfg;
  rcfg.n_max = 10;
  rcfg.lambda_v = effective_lambda_v(ds, 0.1, true, opt.seed);

  Adam policy_opt(policy.all(), AdamConfig{.lr = 1e-3});
  Rng train_rng(77);
  for (int update = 0; update < 8000; ++update) {
    const std::size_t row = static_cast<std::size_t>(update) % train_idx.size();
    policy.zero_grads();
    reinforce_step(ds.videos[train_idx[row]], policy, captioner, refsets[row], idf, vocab, rcfg,
                   CiderVariant::Plain, train_rng);
    clip_global_norm(policy.all(), 5.0);
    policy_opt.step();
  }

  auto grad_norm = [&] {
    double acc = 0.0;
    for (const Param* p : policy.all())
      for (double g : p->grad.data()) acc += g * g;
    return std::sqrt(acc);
  };

  std::vector<double> with_baseline, without_baseline;
  Rng episode_rng(33);
  for (int e = 0; e < 200; ++e) {
    const std::size_t row = static_cast<std::size_t>(e) % train_idx.size();
    const VideoData& video = ds.videos[train_idx[row]];
    const auto glances = video.glances();

    EpisodeTrace sampled = run_episode(glances, policy, PickMode::Stochastic, &episode_rng);
    EpisodeTrace greedy = run_episode(glances, policy, PickMode::Greedy);
    const double r_s = episode_reward(sampled, video, captioner, refsets[row], idf, vocab, rcfg,
                                      CiderVariant::Plain)
                           .reward;
    const double r_g = episode_reward(greedy, video, captioner, refsets[row], idf, vocab, rcfg,
                                      CiderVariant::Plain)
                           .reward;

    policy.zero_grads();
    accumulate_episode_gradient(sampled, r_s - r_g, policy);
    with_baseline.push_back(grad_norm());
    policy.zero_grads();
    accumulate_episode_gradient(sampled, r_s, policy);  // b = 0
    without_baseline.push_back(grad_norm());
  }
  auto variance = [](const std::vector<double>& xs) {
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    double acc = 0.0;
    for (double x : xs) acc += (x - mean) * (x - mean);
    return acc / xs.size();
  };
  INFO("variance with baseline " << variance(with_baseline) << " without "
                                 << variance(without_baseline));
  CHECK(variance(with_baseline) < variance(without_baseline));
}

TEST_CASE("reinforcement stage improves the validation reward and respects pick limits") {
  SynthOptions opt;
  opt.seed = 57;
  opt.n_train = 24;
  opt.n_val = 6;
  opt.n_test = 6;
  opt.n_frames = 30;
  opt.feature_dim = 16;
  opt.scenes_min = 1;
  opt.scenes_max = 3;
  Dataset ds = generate_synthetic(opt);
  Vocabulary vocab = build_train_vocab(ds, 1);
  ModelConfig mcfg = desk_model(ds.feature_dim, static_cast<std::size_t>(vocab.size()));
  Rng init(58);
  Seq2SeqParams captioner = Seq2SeqParams::init(mcfg, init);
  StageConfig sup;
  sup.epochs = 120;
  sup.batch_size = 4;
  train_supervision(ds, captioner, vocab, sup, 59);

  PickNetParams policy = PickNetParams::init(PickNetConfig{.hidden_dim = 16}, init);
  StageConfig reinf;
  reinf.epochs = 100;
  reinf.batch_size = 1;
  reinf.lr = 1e-3;
  RewardConfig rcfg;
  TrainStats stats = train_reinforcement(ds, policy, captioner, vocab, reinf, rcfg, true, 60);

  // the greedy validation reward must not decay over the first 10 epochs
  // (one dip of at most 5% allowed)
  int dips = 0;
  for (std::size_t e = 1; e < 10; ++e) {
    const double prev = stats.epochs[e - 1].val_reward;
    const double cur = stats.epochs[e].val_reward;
    if (cur < prev) {
      ++dips;
      const double scale = std::max(std::abs(prev), 1e-9);
      CHECK((prev - cur) / scale <= 0.05);
    }
  }
  CHECK(dips <= 1);

  // learning actually happened, and the penalty keeps greedy picks in range
  // by the end of the stage
  CHECK(stats.epochs.back().val_reward > stats.epochs.front().val_reward);
  const EpochStats& last = stats.epochs.back();
  CHECK(last.val_mean_np >= static_cast<double>(rcfg.n_min));
  CHECK(last.val_mean_np <= 10.0);
  INFO("best val cider " << stats.best_val_cider);
  CHECK(stats.best_val_cider > 0.0);
}

TEST_CASE("adaptation with a pick-all policy matches a supervision update") {
  Dataset ds = overfit_dataset();
  Vocabulary vocab = build_train_vocab(ds, 1);
  ModelConfig mcfg = desk_model(ds.feature_dim, static_cast<std::size_t>(vocab.size()));
  Rng init(41);
  Seq2SeqParams a = Seq2SeqParams::init(mcfg, init);
  Seq2SeqParams b = a;

  const VideoData& video = ds.videos[0];
  const TokenSeq targets = caption_targets(video.meta.captions[0], vocab);

  // adaptation-style update on all frames (picks fixed, feedback off)
  a.zero_grads();
  auto full = xent_loss_and_grads(video.features, targets, a, 0.0, nullptr);

  // supervision-style update on the full sequence
  b.zero_grads();
  std::vector<std::size_t> all_picks(video.meta.n_frames);
  for (std::size_t i = 0; i < all_picks.size(); ++i) all_picks[i] = i;
  auto picked = xent_loss_and_grads(video.picked_features(all_picks), targets, b, 0.0, nullptr);

  CHECK(full.loss == picked.loss);
  auto pa = a.all(), pb = b.all();
  for (std::size_t k = 0; k < pa.size(); ++k)
    for (std::size_t i = 0; i < pa[k]->grad.size(); ++i)
      CHECK(pa[k]->grad[i] == pb[k]->grad[i]);
}

TEST_CASE("xent ignores non-picked frames exactly") {
  Dataset ds = overfit_dataset();
  Vocabulary vocab = build_train_vocab(ds, 1);
  ModelConfig mcfg = desk_model(ds.feature_dim, static_cast<std::size_t>(vocab.size()));
  Rng init(43);
  Seq2SeqParams params = Seq2SeqParams::init(mcfg, init);

  VideoData video = ds.videos[1];
  const TokenSeq targets = caption_targets(video.meta.captions[0], vocab);
  const std::vector<std::size_t> picks = {0, 3, 5};

  Seq2SeqParams p1 = params;
  p1.zero_grads();
  const double before =
      xent_loss_and_grads(video.picked_features(picks), targets, p1, 0.0, nullptr).loss;

  // perturbing a non-picked frame's features cannot change anything
  for (std::size_t j = 0; j < video.features[1].size(); ++j) video.features[1][j] += 100.0;
  Seq2SeqParams p2 = params;
  p2.zero_grads();
  const double after =
      xent_loss_and_grads(video.picked_features(picks), targets, p2, 0.0, nullptr).loss;
  CHECK(before == after);
}

TEST_CASE("three-stage mini pipeline runs, checkpoints, and resumes deterministically") {
  SynthOptions opt;
  opt.seed = 47;
  opt.n_train = 10;
  opt.n_val = 3;
  opt.n_test = 3;
  opt.n_frames = 12;
  opt.feature_dim = 12;
  Dataset ds = generate_synthetic(opt);
  Vocabulary vocab = build_train_vocab(ds, 1);
  ModelConfig mcfg = desk_model(ds.feature_dim, static_cast<std::size_t>(vocab.size()));
  mcfg.embed_dim = 12;
  mcfg.hidden_dim = 16;

  Rng init(49);
  Seq2SeqParams captioner = Seq2SeqParams::init(mcfg, init);
  StageConfig sup;
  sup.epochs = 3;
  sup.batch_size = 8;
  train_supervision(ds, captioner, vocab, sup, 50);

  PickNetConfig pcfg;
  pcfg.hidden_dim = 8;
  PickNetParams policy = PickNetParams::init(pcfg, init);
  StageConfig reinf;
  reinf.epochs = 2;
  reinf.batch_size = 8;
  RewardConfig rcfg;
  rcfg.tau = 4;  // small videos
  rcfg.n_min = 2;
  rcfg.n_max = 4;
  TrainStats r1 = train_reinforcement(ds, policy, captioner, vocab, reinf, rcfg, true, 51);

  // checkpoint round trip preserves the exact parameters
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "picknet_train_test";
  fs::create_directories(dir);
  const std::string cap_path = (dir / "sup.pknc").string();
  const std::string pol_path = (dir / "reinf.pknc").string();
  save_checkpoint(cap_path, seq2seq_checkpoint(captioner, vocab, "supervision"));
  save_checkpoint(pol_path, picknet_checkpoint(policy, "reinforcement"));
  Seq2SeqParams cap2 = load_seq2seq(load_checkpoint(cap_path), cap_path);
  PickNetParams pol2 = load_picknet(load_checkpoint(pol_path), pol_path);
  verify_vocab_hash(load_checkpoint(cap_path), vocab, cap_path);

  {
    auto orig = captioner.all();
    auto loaded = cap2.all();
    for (std::size_t k = 0; k < orig.size(); ++k)
      for (std::size_t i = 0; i < orig[k]->value.size(); ++i)
        CHECK(orig[k]->value[i] == loaded[k]->value[i]);
  }

  // adaptation from the in-memory pair and from the reloaded pair coincide
  StageConfig adapt;
  adapt.epochs = 2;
  adapt.batch_size = 8;
  adapt.lr = 1e-4;
  Seq2SeqParams cap_a = captioner;
  PickNetParams pol_a = policy;
  TrainStats a1 = train_adaptation(ds, pol_a, cap_a, vocab, adapt, rcfg, true, 53);
  TrainStats a2 = train_adaptation(ds, pol2, cap2, vocab, adapt, rcfg, true, 53);
  REQUIRE(a1.epochs.size() == a2.epochs.size());
  for (std::size_t e = 0; e < a1.epochs.size(); ++e) {
    CHECK(a1.epochs[e].xent == a2.epochs[e].xent);
    CHECK(a1.epochs[e].reward_mean == a2.epochs[e].reward_mean);
    CHECK(a1.epochs[e].val_cider == a2.epochs[e].val_cider);
  }
  {
    auto x = cap_a.all();
    auto y = cap2.all();
    for (std::size_t k = 0; k < x.size(); ++k)
      for (std::size_t i = 0; i < x[k]->value.size(); ++i) CHECK(x[k]->value[i] == y[k]->value[i]);
  }
  fs::remove_all(dir);

  // the adapted pair's validation score never falls below its starting point
  CHECK(a1.best_val_cider >= r1.best_val_cider - 1e-12);
}

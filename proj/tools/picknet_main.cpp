#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "picknet/baselines.hpp"
#include "picknet/cost_model.hpp"
#include "picknet/dataset.hpp"
#include "picknet/evaluate.hpp"
#include "picknet/run_config.hpp"
#include "picknet/stats.hpp"
#include "picknet/streaming.hpp"
#include "picknet/training.hpp"

namespace fs = std::filesystem;
using namespace picknet;

namespace {

std::uint64_t apply_env_seed(std::uint64_t seed) {
  const char* env = std::getenv("PICKNET_SEED");
  if (env == nullptr || *env == '\0') return seed;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (end == env || *end != '\0')
    throw ConfigError(std::string("PICKNET_SEED is not an integer: ") + env);
  return static_cast<std::uint64_t>(v);
}

Vocabulary load_vocab_file(const std::string& path) {
  nlohmann::json j = nlohmann::json::parse(io::read_text_file(path), nullptr, false);
  if (j.is_discarded()) throw FormatError(path + ": not valid JSON");
  return Vocabulary::from_json(j);
}

std::string sibling_vocab(const std::string& checkpoint_path) {
  return (fs::path(checkpoint_path).parent_path() / "vocab.json").string();
}

nlohmann::json epoch_json(const EpochStats& es) {
  nlohmann::json j{{"epoch", es.epoch}, {"stage", es.stage}, {"val_cider", es.val_cider}};
  if (!std::isnan(es.xent)) j["xent"] = es.xent;
  if (!std::isnan(es.reward_mean)) j["reward_mean"] = es.reward_mean;
  if (!std::isnan(es.mean_np)) j["mean_np"] = es.mean_np;
  if (!std::isnan(es.val_reward)) j["val_reward"] = es.val_reward;
  if (!std::isnan(es.val_mean_np)) j["val_mean_np"] = es.val_mean_np;
  return j;
}

void console_epoch(const EpochStats& es) {
  std::cout << es.stage << " epoch " << es.epoch;
  if (!std::isnan(es.xent)) std::cout << "  xent " << es.xent;
  if (!std::isnan(es.reward_mean)) std::cout << "  reward " << es.reward_mean;
  if (!std::isnan(es.mean_np)) std::cout << "  n_p " << es.mean_np;
  std::cout << "  val_cider " << es.val_cider << "  (" << es.wall_seconds << "s)\n";
}

struct GenDataArgs {
  SynthOptions opt;
  std::string out;
};

int cmd_gen_data(const GenDataArgs& args) {
  SynthOptions opt = args.opt;
  opt.seed = apply_env_seed(opt.seed);
  Dataset ds = generate_synthetic(opt);
  save_dataset(ds, args.out);
  std::cout << "wrote " << ds.videos.size() << " videos (" << opt.n_train << " train / "
            << opt.n_val << " validation / " << opt.n_test << " test) to " << args.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string stage;
  std::string config_path;
  std::string dataset;
  std::string out;
  std::string captioner;
  std::string picknet;
  std::string vocab;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
};

std::string canonical_stage(const std::string& stage) {
  if (stage == "supervision") return "supervision";
  if (stage == "reinforce") return "reinforcement";
  if (stage == "adapt") return "adaptation";
  throw ConfigError("train: unknown stage \"" + stage + "\" (supervision | reinforce | adapt)");
}

int cmd_train(const TrainArgs& args) {
  const std::string stage = canonical_stage(args.stage);
  RunConfig cfg;
  if (!args.config_path.empty()) cfg = load_run_config(args.config_path);
  if (!args.dataset.empty()) cfg.dataset = args.dataset;
  if (!args.out.empty()) cfg.out_dir = args.out;
  if (args.seed) cfg.seed = *args.seed;
  cfg.seed = apply_env_seed(cfg.seed);
  if (cfg.dataset.empty()) throw ConfigError("train: no dataset (use --dataset or a config file)");
  if (cfg.out_dir.empty()) throw ConfigError("train: no output directory (use --out)");
  if (args.epochs) {
    cfg.supervision.epochs = *args.epochs;
    cfg.reinforcement.epochs = *args.epochs;
    cfg.adaptation.epochs = *args.epochs;
  }
  cfg.reward.validate();

  Dataset ds = load_dataset(cfg.dataset);
  fs::create_directories(cfg.out_dir);
  const fs::path out(cfg.out_dir);
  io::write_text_file((out / ("train_config_" + stage + ".json")).string(),
                      run_config_to_json(cfg).dump(2) + "\n");

  std::ofstream stats_out((out / (stage + "_stats.ndjson")).string(),
                          std::ios::trunc | std::ios::binary);
  auto on_epoch = [&](const EpochStats& es) {
    stats_out << epoch_json(es).dump() << "\n";
    stats_out.flush();
    console_epoch(es);
  };

  if (args.stage == "supervision") {
    std::vector<std::vector<std::string>> corpus;
    for (std::size_t i : ds.split_indices("train"))
      for (const std::string& c : ds.videos[i].meta.captions) corpus.push_back(tokenize(c));
    Vocabulary vocab = Vocabulary::build(corpus, cfg.vocab_min_freq);
    io::write_text_file((out / "vocab.json").string(), vocab.to_json().dump() + "\n");

    ModelConfig mcfg;
    mcfg.feature_dim = ds.feature_dim;
    mcfg.embed_dim = cfg.embed_dim;
    mcfg.hidden_dim = cfg.hidden_dim;
    mcfg.vocab_size = static_cast<std::size_t>(vocab.size());
    mcfg.standard_output_gate = cfg.standard_output_gate;
    mcfg.dropout_retain = cfg.dropout_retain;
    mcfg.max_len = cfg.max_len;
    Rng init = Rng(cfg.seed).derive(0x1017);
    Seq2SeqParams params = Seq2SeqParams::init(mcfg, init);
    TrainStats stats =
        train_supervision(ds, params, vocab, cfg.supervision, cfg.seed, cfg.cider_variant, on_epoch);
    save_checkpoint((out / "supervision.pknc").string(),
                    seq2seq_checkpoint(params, vocab, "supervision"));
    std::cout << "best validation CIDEr " << stats.best_val_cider << " at epoch "
              << stats.best_epoch << "; wrote " << (out / "supervision.pknc").string() << "\n";
    return 0;
  }

  const std::string vocab_path = args.vocab.empty() ? (out / "vocab.json").string() : args.vocab;
  Vocabulary vocab = load_vocab_file(vocab_path);
  const std::string cap_path =
      args.captioner.empty() ? (out / "supervision.pknc").string() : args.captioner;
  Checkpoint cap_ckpt = load_checkpoint(cap_path);
  verify_vocab_hash(cap_ckpt, vocab, cap_path);
  Seq2SeqParams captioner = load_seq2seq(cap_ckpt, cap_path);

  if (args.stage == "reinforce") {
    Rng init = Rng(cfg.seed).derive(0x1018);
    PickNetParams policy =
        PickNetParams::init(PickNetConfig{.hidden_dim = cfg.picknet_hidden}, init);
    TrainStats stats = train_reinforcement(ds, policy, captioner, vocab, cfg.reinforcement,
                                           cfg.reward, cfg.lambda_v_auto, cfg.seed,
                                           cfg.cider_variant, on_epoch);
    save_checkpoint((out / "reinforcement.pknc").string(),
                    picknet_checkpoint(policy, "reinforcement"));
    std::cout << "best validation CIDEr " << stats.best_val_cider << " at epoch "
              << stats.best_epoch << "; wrote " << (out / "reinforcement.pknc").string() << "\n";
    return 0;
  }

  if (args.stage == "adapt") {
    const std::string pol_path =
        args.picknet.empty() ? (out / "reinforcement.pknc").string() : args.picknet;
    PickNetParams policy = load_picknet(load_checkpoint(pol_path), pol_path);
    TrainStats stats =
        train_adaptation(ds, policy, captioner, vocab, cfg.adaptation, cfg.reward,
                         cfg.lambda_v_auto, cfg.seed, cfg.cider_variant, on_epoch);
    save_checkpoint((out / "adaptation.pknc").string(),
                    joint_checkpoint(captioner, policy, vocab, "adaptation"));
    std::cout << "best validation CIDEr " << stats.best_val_cider << " at epoch "
              << stats.best_epoch << "; wrote " << (out / "adaptation.pknc").string() << "\n";
    return 0;
  }

  return 0;
}

struct EvalArgs {
  std::string dataset;
  std::string split = "test";
  std::string policy;
  std::string captioner;
  std::string picknet;
  std::string vocab;
  std::string out;
  std::string traces_out;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  bool per_video = false;
  std::string cider_variant = "plain";
};

int cmd_eval(const EvalArgs& args) {
  Dataset ds = load_dataset(args.dataset);
  const std::string vocab_path =
      args.vocab.empty() ? sibling_vocab(args.captioner) : args.vocab;
  Vocabulary vocab = load_vocab_file(vocab_path);
  Checkpoint cap_ckpt = load_checkpoint(args.captioner);
  verify_vocab_hash(cap_ckpt, vocab, args.captioner);
  Seq2SeqParams captioner = load_seq2seq(cap_ckpt, args.captioner);

  std::optional<PickNetParams> policy;
  if (!args.picknet.empty())
    policy = load_picknet(load_checkpoint(args.picknet), args.picknet);

  EvalOptions opt;
  opt.policy = parse_policy(args.policy);
  opt.kmeans_k = args.k;
  opt.seed = apply_env_seed(args.seed);
  opt.per_video = args.per_video;
  opt.cider_variant = args.cider_variant == "d" ? CiderVariant::D : CiderVariant::Plain;

  EvalResult result = evaluate_split(ds, args.split, captioner,
                                     policy ? &*policy : nullptr, vocab, opt);
  std::cout << "policy=" << result.policy << " split=" << result.split
            << " videos=" << result.videos << " bleu4=" << result.bleu4
            << " rouge_l=" << result.rouge_l << " cider=" << result.cider
            << " mean_np=" << result.mean_np;
  if (result.kmeans_k_used > 0) std::cout << " k=" << result.kmeans_k_used;
  std::cout << "\n";
  if (!args.out.empty()) io::write_text_file(args.out, result.to_json().dump(2) + "\n");
  if (!args.traces_out.empty()) {
    if (result.traces.empty())
      throw ConfigError("eval: --traces-out needs the picknet policy (no traces produced)");
    write_traces_ndjson(result.traces, args.traces_out);
  }
  return 0;
}

struct CaptionArgs {
  std::string dataset;
  std::string video;
  std::string captioner;
  std::string picknet;
  std::string vocab;
  std::string policy = "";
  std::size_t k = 0;
  std::uint64_t seed = 0;
};

int cmd_caption(const CaptionArgs& args) {
  Dataset ds = load_dataset(args.dataset);
  const VideoData* video = nullptr;
  for (const VideoData& v : ds.videos)
    if (v.meta.id == args.video) video = &v;
  if (video == nullptr)
    throw UsageError("caption: video \"" + args.video + "\" not in the dataset");

  const std::string vocab_path =
      args.vocab.empty() ? sibling_vocab(args.captioner) : args.vocab;
  Vocabulary vocab = load_vocab_file(vocab_path);
  Checkpoint cap_ckpt = load_checkpoint(args.captioner);
  verify_vocab_hash(cap_ckpt, vocab, args.captioner);
  Seq2SeqParams captioner = load_seq2seq(cap_ckpt, args.captioner);

  const std::string policy_choice =
      args.policy.empty() ? (args.picknet.empty() ? "all" : "picknet") : args.policy;
  std::vector<std::size_t> picks;
  switch (parse_policy(policy_choice)) {
    case PickPolicyKind::All:
      picks.resize(video->meta.n_frames);
      for (std::size_t i = 0; i < picks.size(); ++i) picks[i] = i;
      break;
    case PickPolicyKind::PickNet: {
      if (args.picknet.empty()) throw ConfigError("caption: picknet policy needs --picknet");
      PickNetParams policy = load_picknet(load_checkpoint(args.picknet), args.picknet);
      picks = run_episode(video->glances(), policy, PickMode::Greedy).picked;
      break;
    }
    case PickPolicyKind::Random: {
      Rng rng = Rng(apply_env_seed(args.seed)).derive(0xCA97);
      picks = random_pick(video->meta.n_frames, rng);
      break;
    }
    case PickPolicyKind::KMeans: {
      if (args.k == 0) throw ConfigError("caption: kmeans policy needs --k");
      picks = kmeans_pick(video->features, std::min(args.k, video->meta.n_frames),
                          apply_env_seed(args.seed));
      break;
    }
  }
  const Tensor v = encode_sequence(video->picked_features(picks), captioner);
  const std::string caption = vocab.decode_text(greedy_decode(v, captioner));
  std::vector<std::size_t> one_based;
  for (std::size_t p : picks) one_based.push_back(p + 1);
  nlohmann::json j{{"video", video->meta.id},
                   {"policy", policy_choice},
                   {"picks", one_based},
                   {"n_p", picks.size()},
                   {"caption", caption}};
  std::cout << j.dump() << "\n";
  return 0;
}

struct StreamArgs {
  std::string input;
  std::string captioner;
  std::string picknet;
  std::string vocab;
  double fps = 1.0;
};

int cmd_stream(const StreamArgs& args) {
  fs::path glance_path(args.input);
  if (glance_path.extension() != ".glance")
    throw ConfigError("stream: --input expects a .glance file (with a matching .feat file)");
  fs::path feat_path = glance_path;
  feat_path.replace_extension(".feat");
  if (!fs::exists(feat_path)) {
    // dataset layout: glances/x.glance alongside features/x.feat
    fs::path alt = glance_path.parent_path().parent_path() / "features" /
                   (glance_path.stem().string() + ".feat");
    if (fs::exists(alt)) feat_path = alt;
  }

  const auto glances = load_glances(glance_path.string());
  const auto features = load_features(feat_path.string());
  if (glances.size() != features.size())
    throw FormatError("stream: " + glance_path.string() + " has " +
                      std::to_string(glances.size()) + " frames but " + feat_path.string() +
                      " has " + std::to_string(features.size()));

  const std::string vocab_path =
      args.vocab.empty() ? sibling_vocab(args.captioner) : args.vocab;
  Vocabulary vocab = load_vocab_file(vocab_path);
  Checkpoint cap_ckpt = load_checkpoint(args.captioner);
  verify_vocab_hash(cap_ckpt, vocab, args.captioner);
  Seq2SeqParams captioner = load_seq2seq(cap_ckpt, args.captioner);
  PickNetParams policy = load_picknet(load_checkpoint(args.picknet), args.picknet);

  StreamCaptioner stream(captioner, policy, vocab, args.fps);
  for (std::size_t f = 0; f < glances.size(); ++f) {
    StreamEvent ev = stream.feed(glances[f], features[f]);
    std::cout << ev.to_json().dump() << "\n";
  }
  return 0;
}

struct StatsArgs {
  std::string traces;
  std::string out;
};

int cmd_stats(const StatsArgs& args) {
  const auto records = read_traces_ndjson(args.traces);
  const PickHistogram h = pick_statistics(records);
  fs::create_directories(args.out);
  const fs::path out(args.out);
  io::write_text_file((out / "n_picks.csv").string(), n_picks_csv(h));
  io::write_text_file((out / "positions.csv").string(), positions_csv(h));
  nlohmann::json summary{{"videos", h.video_count}, {"mean_np", h.mean_np}};
  io::write_text_file((out / "summary.json").string(), summary.dump(2) + "\n");
  std::cout << "videos=" << h.video_count << " mean_np=" << h.mean_np << "\n";
  return 0;
}

struct EstimateArgs {
  std::string config;
  std::string builtin;
  std::string out;
};

int cmd_estimate_time(const EstimateArgs& args) {
  CostTable table;
  if (!args.builtin.empty()) {
    table = builtin_cost_table(args.builtin);
  } else if (!args.config.empty()) {
    nlohmann::json j = nlohmann::json::parse(io::read_text_file(args.config), nullptr, false);
    if (j.is_discarded()) throw FormatError(args.config + ": not valid JSON");
    table = cost_table_from_json(j);
  } else {
    throw ConfigError("estimate-time: pass --config FILE or --builtin msvd|msrvtt");
  }
  const auto rows = estimate_time(table.entries, table.baseline_frames);
  std::string csv = "model,time\n";
  for (const auto& row : rows) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f", row.time);
    csv += row.name + "," + buf + "\n";
    std::cout << row.name << "\t" << buf << "x\n";
  }
  if (!args.out.empty()) io::write_text_file(args.out, csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reinforcement-learned informative-frame picking for video captioning"};
  app.require_subcommand(1);

  GenDataArgs gen_args;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen->add_option("--seed", gen_args.opt.seed, "Generator seed")->capture_default_str();
  gen->add_option("--out", gen_args.out, "Output directory")->required();
  gen->add_option("--videos-train", gen_args.opt.n_train)->capture_default_str();
  gen->add_option("--videos-val", gen_args.opt.n_val)->capture_default_str();
  gen->add_option("--videos-test", gen_args.opt.n_test)->capture_default_str();
  gen->add_option("--frames", gen_args.opt.n_frames, "Frames per video")->capture_default_str();
  gen->add_option("--dim", gen_args.opt.feature_dim, "Feature dimension")->capture_default_str();
  gen->add_option("--scenes-min", gen_args.opt.scenes_min)->capture_default_str();
  gen->add_option("--scenes-max", gen_args.opt.scenes_max)->capture_default_str();

  TrainArgs train_args;
  std::uint64_t train_seed = 0;
  std::size_t train_epochs = 0;
  auto* train = app.add_subcommand("train", "Run one training stage");
  train->add_option("--stage", train_args.stage, "supervision | reinforce | adapt")->required();
  train->add_option("--config", train_args.config_path, "Run configuration JSON");
  train->add_option("--dataset", train_args.dataset, "Dataset manifest path");
  train->add_option("--out", train_args.out, "Output directory");
  train->add_option("--captioner", train_args.captioner, "Captioner checkpoint (later stages)");
  train->add_option("--picknet", train_args.picknet, "Pick-policy checkpoint (adapt stage)");
  train->add_option("--vocab", train_args.vocab, "Vocabulary JSON");
  auto* seed_opt = train->add_option("--seed", train_seed, "Seed override");
  auto* epochs_opt = train->add_option("--epochs", train_epochs, "Epoch override for the stage");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Evaluate a pick policy on a split");
  eval->add_option("--dataset", eval_args.dataset)->required();
  eval->add_option("--split", eval_args.split, "train | validation | test")->capture_default_str();
  eval->add_option("--policy", eval_args.policy, "picknet | random | kmeans | all")->required();
  eval->add_option("--captioner", eval_args.captioner, "Captioner checkpoint")->required();
  eval->add_option("--picknet", eval_args.picknet, "Pick-policy checkpoint");
  eval->add_option("--vocab", eval_args.vocab, "Vocabulary JSON");
  eval->add_option("--k", eval_args.k, "k for the k-means policy (0 = derive)");
  eval->add_option("--seed", eval_args.seed, "Seed for the random policy");
  eval->add_option("--out", eval_args.out, "Write the JSON report here");
  eval->add_option("--traces-out", eval_args.traces_out, "Write picknet episode traces (NDJSON)");
  eval->add_option("--cider-variant", eval_args.cider_variant, "plain | d")->capture_default_str();
  eval->add_flag("--per-video", eval_args.per_video, "Include per-video rows in the report");

  CaptionArgs caption_args;
  auto* caption = app.add_subcommand("caption", "Caption one video offline");
  caption->add_option("--dataset", caption_args.dataset)->required();
  caption->add_option("--video", caption_args.video, "Video id")->required();
  caption->add_option("--captioner", caption_args.captioner)->required();
  caption->add_option("--picknet", caption_args.picknet);
  caption->add_option("--vocab", caption_args.vocab);
  caption->add_option("--policy", caption_args.policy, "picknet | random | kmeans | all");
  caption->add_option("--k", caption_args.k);
  caption->add_option("--seed", caption_args.seed);

  StreamArgs stream_args;
  auto* stream = app.add_subcommand("stream", "Caption a frame stream causally (NDJSON out)");
  stream->add_option("--input", stream_args.input, ".glance file with a sibling .feat")->required();
  stream->add_option("--captioner", stream_args.captioner)->required();
  stream->add_option("--picknet", stream_args.picknet)->required();
  stream->add_option("--vocab", stream_args.vocab);
  stream->add_option("--fps", stream_args.fps, "Sampling rate for timestamps")->capture_default_str();

  StatsArgs stats_args;
  auto* stats = app.add_subcommand("stats", "Pick statistics from episode traces");
  stats->add_option("--traces", stats_args.traces, "NDJSON trace file")->required();
  stats->add_option("--out", stats_args.out, "Output directory")->required();

  EstimateArgs est_args;
  auto* est = app.add_subcommand("estimate-time", "Relative running-time model");
  est->add_option("--config", est_args.config, "Cost table JSON");
  est->add_option("--builtin", est_args.builtin, "msvd | msrvtt");
  est->add_option("--out", est_args.out, "Write CSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (seed_opt->count() > 0) train_args.seed = train_seed;
    if (epochs_opt->count() > 0) train_args.epochs = train_epochs;
    if (gen->parsed()) return cmd_gen_data(gen_args);
    if (train->parsed()) return cmd_train(train_args);
    if (eval->parsed()) return cmd_eval(eval_args);
    if (caption->parsed()) return cmd_caption(caption_args);
    if (stream->parsed()) return cmd_stream(stream_args);
    if (stats->parsed()) return cmd_stats(stats_args);
    if (est->parsed()) return cmd_estimate_time(est_args);
  } catch (const std::exception& e) {
    std::cerr << "picknet: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#pragma once

#include <cstdint>
#include <set>
#include <string>

#include "json.hpp"
#include "picknet/errors.hpp"
#include "picknet/metrics.hpp"
#include "picknet/rewards.hpp"
#include "picknet/training.hpp"

namespace picknet {

// Run configuration for `picknet train`. The structural rules live in
// schemas/run_config.schema.json; the checks here enforce the same contract
// before any work starts.
struct RunConfig {
  std::string dataset;
  std::string out_dir;
  std::uint64_t seed = 0;
  CiderVariant cider_variant = CiderVariant::Plain;
  int vocab_min_freq = 3;
  double clip_norm = 5.0;

  std::size_t embed_dim = 512;
  std::size_t hidden_dim = 1024;
  std::size_t picknet_hidden = 1024;
  bool standard_output_gate = false;
  double dropout_retain = 0.5;
  std::size_t max_len = 20;

  StageConfig supervision{.epochs = 100, .batch_size = 128, .lr = 3e-4};
  StageConfig reinforcement{.epochs = 100, .batch_size = 128, .lr = 3e-4};
  StageConfig adaptation{.epochs = 100, .batch_size = 128, .lr = 1e-4};

  RewardConfig reward;
  bool lambda_v_auto = true;
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, const std::set<std::string>& known,
                                const std::string& where) {
  for (const auto& [key, value] : obj.items())
    if (!known.count(key))
      throw ConfigError("run config: unknown key \"" + key + "\" in " + where);
}

inline double require_number(const nlohmann::json& obj, const std::string& key, double fallback,
                             double lo, double hi, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number())
    throw ConfigError("run config: " + where + "." + key + " must be a number");
  const double v = obj[key].get<double>();
  if (v < lo || v > hi)
    throw ConfigError("run config: " + where + "." + key + " = " + std::to_string(v) +
                      " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return v;
}

inline std::int64_t require_int(const nlohmann::json& obj, const std::string& key,
                                std::int64_t fallback, std::int64_t lo, std::int64_t hi,
                                const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer())
    throw ConfigError("run config: " + where + "." + key + " must be an integer");
  const std::int64_t v = obj[key].get<std::int64_t>();
  if (v < lo || v > hi)
    throw ConfigError("run config: " + where + "." + key + " = " + std::to_string(v) +
                      " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return v;
}

inline bool require_bool(const nlohmann::json& obj, const std::string& key, bool fallback,
                         const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_boolean())
    throw ConfigError("run config: " + where + "." + key + " must be a boolean");
  return obj[key].get<bool>();
}

inline void parse_stage(const nlohmann::json& obj, const std::string& where, StageConfig& stage,
                        bool supervision_fields, bool adaptation_fields) {
  std::set<std::string> known = {"epochs", "batch_size", "lr"};
  if (supervision_fields) {
    known.insert("sched_samp_start");
    known.insert("sched_samp_end");
  }
  if (adaptation_fields) known.insert("feedback_prob");
  reject_unknown_keys(obj, known, where);
  stage.epochs = static_cast<std::size_t>(
      require_int(obj, "epochs", static_cast<std::int64_t>(stage.epochs), 1, 100, where));
  stage.batch_size = static_cast<std::size_t>(
      require_int(obj, "batch_size", static_cast<std::int64_t>(stage.batch_size), 1, 1 << 20, where));
  stage.lr = require_number(obj, "lr", stage.lr, 1e-12, 1e3, where);
  if (supervision_fields) {
    stage.sched_samp_start =
        require_number(obj, "sched_samp_start", stage.sched_samp_start, 0.0, 1.0, where);
    stage.sched_samp_end =
        require_number(obj, "sched_samp_end", stage.sched_samp_end, 0.0, 1.0, where);
  }
  if (adaptation_fields)
    stage.adapt_feedback_prob =
        require_number(obj, "feedback_prob", stage.adapt_feedback_prob, 0.0, 1.0, where);
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("run config: top level must be a JSON object");
  detail::reject_unknown_keys(j,
                              {"dataset", "out_dir", "seed", "cider_variant", "vocab_min_freq",
                               "clip_norm", "model", "stages", "reward"},
                              "top level");
  RunConfig cfg;
  if (!j.contains("dataset") || !j["dataset"].is_string() || j["dataset"].get<std::string>().empty())
    throw ConfigError("run config: \"dataset\" must be a non-empty string");
  if (!j.contains("out_dir") || !j["out_dir"].is_string() || j["out_dir"].get<std::string>().empty())
    throw ConfigError("run config: \"out_dir\" must be a non-empty string");
  cfg.dataset = j["dataset"].get<std::string>();
  cfg.out_dir = j["out_dir"].get<std::string>();
  cfg.seed = static_cast<std::uint64_t>(
      detail::require_int(j, "seed", 0, 0, std::numeric_limits<std::int64_t>::max(), "top level"));
  if (j.contains("cider_variant")) {
    const std::string v = j["cider_variant"].get<std::string>();
    if (v == "plain")
      cfg.cider_variant = CiderVariant::Plain;
    else if (v == "d")
      cfg.cider_variant = CiderVariant::D;
    else
      throw ConfigError("run config: cider_variant must be \"plain\" or \"d\"");
  }
  cfg.vocab_min_freq =
      static_cast<int>(detail::require_int(j, "vocab_min_freq", 3, 1, 1 << 20, "top level"));
  cfg.clip_norm = detail::require_number(j, "clip_norm", 5.0, 0.0, 1e9, "top level");

  if (j.contains("model")) {
    const auto& m = j["model"];
    detail::reject_unknown_keys(m,
                                {"embed_dim", "hidden_dim", "picknet_hidden",
                                 "standard_output_gate", "dropout_retain", "max_len"},
                                "model");
    cfg.embed_dim = static_cast<std::size_t>(
        detail::require_int(m, "embed_dim", 512, 1, 1 << 20, "model"));
    cfg.hidden_dim = static_cast<std::size_t>(
        detail::require_int(m, "hidden_dim", 1024, 1, 1 << 20, "model"));
    cfg.picknet_hidden = static_cast<std::size_t>(
        detail::require_int(m, "picknet_hidden", 1024, 1, 1 << 20, "model"));
    cfg.standard_output_gate = detail::require_bool(m, "standard_output_gate", false, "model");
    cfg.dropout_retain = detail::require_number(m, "dropout_retain", 0.5, 1e-9, 1.0, "model");
    cfg.max_len =
        static_cast<std::size_t>(detail::require_int(m, "max_len", 20, 1, 10000, "model"));
  }

  if (j.contains("stages")) {
    const auto& s = j["stages"];
    detail::reject_unknown_keys(s, {"supervision", "reinforcement", "adaptation"}, "stages");
    if (s.contains("supervision"))
      detail::parse_stage(s["supervision"], "stages.supervision", cfg.supervision, true, false);
    if (s.contains("reinforcement"))
      detail::parse_stage(s["reinforcement"], "stages.reinforcement", cfg.reinforcement, false,
                          false);
    if (s.contains("adaptation"))
      detail::parse_stage(s["adaptation"], "stages.adaptation", cfg.adaptation, false, true);
  }

  if (j.contains("reward")) {
    const auto& r = j["reward"];
    detail::reject_unknown_keys(
        r, {"lambda_l", "lambda_v", "lambda_v_auto", "n_min", "tau", "r_penalty"}, "reward");
    cfg.reward.lambda_l = detail::require_number(r, "lambda_l", 1.0, 0.0, 1e9, "reward");
    cfg.reward.lambda_v = detail::require_number(r, "lambda_v", 0.1, 0.0, 1e9, "reward");
    cfg.lambda_v_auto = detail::require_bool(r, "lambda_v_auto", true, "reward");
    cfg.reward.n_min =
        static_cast<std::size_t>(detail::require_int(r, "n_min", 3, 1, 1 << 20, "reward"));
    cfg.reward.tau =
        static_cast<std::size_t>(detail::require_int(r, "tau", 7, 1, 1 << 20, "reward"));
    cfg.reward.r_penalty = detail::require_number(r, "r_penalty", -1.0, -1e9, -1e-12, "reward");
  }
  // defaults keep clip settings in every stage
  cfg.supervision.clip_norm = cfg.clip_norm;
  cfg.reinforcement.clip_norm = cfg.clip_norm;
  cfg.adaptation.clip_norm = cfg.clip_norm;
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  nlohmann::json j = nlohmann::json::parse(io::read_text_file(path), nullptr, false);
  if (j.is_discarded()) throw ConfigError(path + ": not valid JSON");
  try {
    return parse_run_config(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline nlohmann::json run_config_to_json(const RunConfig& cfg) {
  return nlohmann::json{
      {"dataset", cfg.dataset},
      {"out_dir", cfg.out_dir},
      {"seed", cfg.seed},
      {"cider_variant", cfg.cider_variant == CiderVariant::Plain ? "plain" : "d"},
      {"vocab_min_freq", cfg.vocab_min_freq},
      {"clip_norm", cfg.clip_norm},
      {"model",
       {{"embed_dim", cfg.embed_dim},
        {"hidden_dim", cfg.hidden_dim},
        {"picknet_hidden", cfg.picknet_hidden},
        {"standard_output_gate", cfg.standard_output_gate},
        {"dropout_retain", cfg.dropout_retain},
        {"max_len", cfg.max_len}}},
      {"stages",
       {{"supervision",
         {{"epochs", cfg.supervision.epochs},
          {"batch_size", cfg.supervision.batch_size},
          {"lr", cfg.supervision.lr},
          {"sched_samp_start", cfg.supervision.sched_samp_start},
          {"sched_samp_end", cfg.supervision.sched_samp_end}}},
        {"reinforcement",
         {{"epochs", cfg.reinforcement.epochs},
          {"batch_size", cfg.reinforcement.batch_size},
          {"lr", cfg.reinforcement.lr}}},
        {"adaptation",
         {{"epochs", cfg.adaptation.epochs},
          {"batch_size", cfg.adaptation.batch_size},
          {"lr", cfg.adaptation.lr},
          {"feedback_prob", cfg.adaptation.adapt_feedback_prob}}}}},
      {"reward",
       {{"lambda_l", cfg.reward.lambda_l},
        {"lambda_v", cfg.reward.lambda_v},
        {"lambda_v_auto", cfg.lambda_v_auto},
        {"n_min", cfg.reward.n_min},
        {"tau", cfg.reward.tau},
        {"r_penalty", cfg.reward.r_penalty}}}};
}

}  // namespace picknet

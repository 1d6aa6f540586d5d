#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"
#include "picknet/errors.hpp"

namespace picknet {

// One row of the relative running-time model: cost scales with the feature
// extractor (appearance multiplier), doubles when motion features are used,
// and is proportional to the number of processed frames.
struct CostModelEntry {
  std::string name;
  double appearance = 1.0;
  double motion = 1.0;  // 1 = appearance only, 2 = motion features too
  double frames = 0.0;
};

struct CostEstimate {
  std::string name;
  double time = 0.0;  // relative, rounded to one decimal
};

inline std::vector<CostEstimate> estimate_time(const std::vector<CostModelEntry>& entries,
                                               double baseline_frames) {
  if (baseline_frames < 1.0) throw UsageError("estimate_time: baseline frames must be >= 1");
  std::vector<CostEstimate> out;
  out.reserve(entries.size());
  for (const CostModelEntry& e : entries) {
    if (e.appearance <= 0.0 || e.frames <= 0.0)
      throw ConfigError("estimate_time: entry \"" + e.name + "\" has non-positive multipliers");
    if (e.motion != 1.0 && e.motion != 2.0)
      throw ConfigError("estimate_time: entry \"" + e.name + "\" motion multiplier must be 1 or 2");
    const double raw = e.appearance * e.motion * (e.frames / baseline_frames);
    out.push_back({e.name, std::round(raw * 10.0) / 10.0});
  }
  return out;
}

struct CostTable {
  double baseline_frames = 1.0;
  std::vector<CostModelEntry> entries;
};

// The two bundled tables: captioning systems compared at a 10 s / 36 fps
// clip, normalized to this model's picked-frame count (6 or 8).
inline CostTable builtin_cost_table(const std::string& which) {
  if (which == "msvd") {
    return CostTable{6.0,
                     {{"TA", 0.5, 2.0, 26.0},
                      {"S2VT", 0.5, 2.0, 80.0},
                      {"LSTM-E", 0.5, 2.0, 30.0},
                      {"p-RNN", 0.5, 2.0, 30.0},
                      {"HRNE", 0.5, 2.0, 200.0},
                      {"BA", 0.5, 2.0, 72.0},
                      {"Baseline", 1.0, 1.0, 30.0},
                      {"Random", 1.0, 1.0, 15.0},
                      {"k-means", 1.0, 1.0, 6.0},
                      {"PickNet", 1.0, 1.0, 6.0}}};
  }
  if (which == "msrvtt") {
    return CostTable{8.0,
                     {{"ruc-uva", 0.5, 2.0, 36.0},
                      {"Aalto", 0.5, 2.0, 36.0},
                      {"DenseCap", 0.5, 2.0, 30.0},
                      {"MS-RNN", 1.0, 2.0, 40.0},
                      {"Baseline", 1.0, 1.0, 30.0},
                      {"Random", 1.0, 1.0, 15.0},
                      {"k-means", 1.0, 1.0, 8.0},
                      {"PickNet", 1.0, 1.0, 8.0}}};
  }
  throw ConfigError("builtin_cost_table: unknown table \"" + which + "\" (msvd or msrvtt)");
}

inline CostTable cost_table_from_json(const nlohmann::json& j) {
  CostTable t;
  t.baseline_frames = j.at("baseline_frames").get<double>();
  for (const auto& e : j.at("entries")) {
    t.entries.push_back({e.at("name").get<std::string>(), e.at("appearance").get<double>(),
                         e.at("motion").get<double>(), e.at("frames").get<double>()});
  }
  return t;
}

}  // namespace picknet

#pragma once

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "picknet/errors.hpp"
#include "picknet/io_util.hpp"
#include "picknet/policy.hpp"

namespace picknet {

// One serialized episode. Picked positions are 1-based in every report and
// on the wire; in-memory episode traces are 0-based.
struct TraceRecord {
  std::string video;
  std::vector<std::size_t> picks;  // 1-based positions
  std::size_t n = 0;               // total frames
};

inline TraceRecord to_trace_record(const EpisodeTrace& trace, const std::string& video_id) {
  TraceRecord rec;
  rec.video = video_id;
  rec.n = trace.n_frames();
  for (std::size_t idx : trace.picked) rec.picks.push_back(idx + 1);
  return rec;
}

inline std::string trace_record_line(const TraceRecord& rec) {
  nlohmann::json j{{"video", rec.video}, {"picks", rec.picks}, {"n", rec.n}};
  return j.dump();
}

inline void write_traces_ndjson(const std::vector<TraceRecord>& records, const std::string& path) {
  std::ostringstream out;
  for (const TraceRecord& r : records) out << trace_record_line(r) << "\n";
  io::write_text_file(path, out.str());
}

inline std::vector<TraceRecord> read_traces_ndjson(const std::string& path) {
  std::istringstream in(io::read_text_file(path));
  std::vector<TraceRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw FormatError(path + ": line " + std::to_string(lineno) + " is not valid JSON");
    TraceRecord rec;
    rec.video = j.at("video").get<std::string>();
    rec.n = j.at("n").get<std::size_t>();
    for (const auto& p : j.at("picks")) rec.picks.push_back(p.get<std::size_t>());
    records.push_back(std::move(rec));
  }
  return records;
}

struct PickHistogram {
  std::map<std::size_t, std::size_t> n_picks;    // N_p -> videos
  std::map<std::size_t, std::size_t> positions;  // 1-based position -> picks
  std::size_t video_count = 0;
  double mean_np = 0.0;
};

inline PickHistogram pick_statistics(const std::vector<TraceRecord>& records) {
  if (records.empty()) throw UsageError("pick_statistics: no traces");
  PickHistogram h;
  h.video_count = records.size();
  std::size_t total = 0;
  for (const TraceRecord& rec : records) {
    ++h.n_picks[rec.picks.size()];
    for (std::size_t pos : rec.picks) ++h.positions[pos];
    total += rec.picks.size();
  }
  h.mean_np = static_cast<double>(total) / static_cast<double>(records.size());
  return h;
}

inline PickHistogram pick_statistics(const std::vector<EpisodeTrace>& traces) {
  std::vector<TraceRecord> records;
  records.reserve(traces.size());
  for (std::size_t i = 0; i < traces.size(); ++i)
    records.push_back(to_trace_record(traces[i], "episode" + std::to_string(i)));
  return pick_statistics(records);
}

inline std::string n_picks_csv(const PickHistogram& h) {
  std::ostringstream out;
  out << "n_picks,videos\n";
  for (const auto& [np, count] : h.n_picks) out << np << "," << count << "\n";
  return out.str();
}

inline std::string positions_csv(const PickHistogram& h) {
  std::ostringstream out;
  out << "position,picks\n";
  for (const auto& [pos, count] : h.positions) out << pos << "," << count << "\n";
  return out.str();
}

}  // namespace picknet

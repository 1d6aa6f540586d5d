#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "picknet/errors.hpp"
#include "picknet/glance.hpp"
#include "picknet/io_util.hpp"
#include "picknet/metrics.hpp"
#include "picknet/rng.hpp"
#include "picknet/tensor.hpp"
#include "picknet/text.hpp"

namespace picknet {

// Feature file: magic "PKNF", u32 version=1, u32 n_frames, u32 D, then
// f32 LE row-major. Values are widened to f64 in memory.
inline constexpr std::uint32_t kFeatureFileVersion = 1;

inline void save_features(const std::string& path, const std::vector<Tensor>& features) {
  if (features.empty()) throw UsageError("save_features: empty sequence");
  const std::size_t dim = features[0].size();
  auto out = io::open_out(path);
  io::write_bytes(out, "PKNF", 4);
  io::write_u32(out, kFeatureFileVersion);
  io::write_u32(out, static_cast<std::uint32_t>(features.size()));
  io::write_u32(out, static_cast<std::uint32_t>(dim));
  for (const Tensor& f : features) {
    if (f.size() != dim)
      throw UsageError("save_features: inconsistent dims " + std::to_string(dim) + " vs " +
                       std::to_string(f.size()));
    for (std::size_t j = 0; j < dim; ++j) io::write_f32(out, static_cast<float>(f[j]));
  }
}

inline std::vector<Tensor> load_features(const std::string& path) {
  auto in = io::open_in(path);
  io::Reader r(in, path);
  r.expect_magic("PKNF");
  const std::uint32_t version = r.read_u32();
  if (version != kFeatureFileVersion)
    throw FormatError(path + ": unsupported feature file version " + std::to_string(version));
  const std::uint32_t n_frames = r.read_u32();
  const std::uint32_t dim = r.read_u32();
  std::vector<Tensor> features;
  features.reserve(n_frames);
  for (std::uint32_t f = 0; f < n_frames; ++f) {
    Tensor t = Tensor::vector(dim);
    for (std::uint32_t j = 0; j < dim; ++j) t[j] = static_cast<double>(r.read_f32());
    features.push_back(std::move(t));
  }
  if (!r.at_eof())
    throw FormatError(path + ": trailing bytes after frame data at byte offset " +
                      std::to_string(r.offset()));
  return features;
}

struct VideoRecord {
  std::string id;
  std::string split;  // train | validation | test
  std::size_t n_frames = 0;
  std::vector<std::string> captions;
  std::string feature_path;  // relative to the manifest directory
  std::string glance_path;
  // Synthetic-generator metadata; absent for imported data.
  std::vector<int> scenes;
  std::vector<std::size_t> scene_starts;
};

struct VideoData {
  VideoRecord meta;
  std::vector<Tensor> features;             // n_frames, each D-dim
  std::vector<std::uint8_t> glance_bytes;   // n_frames * 3136, row-major

  std::vector<Glance> glances() const {
    std::vector<Glance> out;
    out.reserve(meta.n_frames);
    for (std::size_t f = 0; f < meta.n_frames; ++f) {
      Glance g = make_empty_glance();
      for (std::size_t i = 0; i < kGlancePixels; ++i)
        g[i] = glance_bytes[f * kGlancePixels + i] / 255.0;
      out.push_back(std::move(g));
    }
    return out;
  }

  std::vector<Tensor> picked_features(const std::vector<std::size_t>& picks) const {
    std::vector<Tensor> out;
    out.reserve(picks.size());
    for (std::size_t idx : picks) out.push_back(features[idx]);
    return out;
  }
};

struct Dataset {
  std::size_t feature_dim = 0;
  std::vector<VideoData> videos;

  std::vector<std::size_t> split_indices(const std::string& split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < videos.size(); ++i)
      if (videos[i].meta.split == split) out.push_back(i);
    return out;
  }

  std::vector<CaptionSet> caption_sets(const std::vector<std::size_t>& indices) const {
    std::vector<CaptionSet> sets;
    sets.reserve(indices.size());
    for (std::size_t i : indices) {
      CaptionSet set;
      set.video_id = videos[i].meta.id;
      for (const std::string& c : videos[i].meta.captions) set.references.push_back(tokenize(c));
      sets.push_back(std::move(set));
    }
    return sets;
  }
};

inline constexpr int kManifestVersion = 1;

inline nlohmann::json manifest_to_json(const Dataset& ds) {
  nlohmann::json videos = nlohmann::json::array();
  for (const VideoData& v : ds.videos) {
    nlohmann::json rec{{"id", v.meta.id},
                       {"split", v.meta.split},
                       {"n_frames", v.meta.n_frames},
                       {"captions", v.meta.captions},
                       {"features", v.meta.feature_path},
                       {"glances", v.meta.glance_path}};
    if (!v.meta.scenes.empty()) {
      rec["scenes"] = v.meta.scenes;
      rec["scene_starts"] = v.meta.scene_starts;
    }
    videos.push_back(std::move(rec));
  }
  return nlohmann::json{
      {"version", kManifestVersion}, {"feature_dim", ds.feature_dim}, {"videos", videos}};
}

// Writes manifest.json plus one .feat / .glance pair per video under dir.
inline void save_dataset(const Dataset& ds, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "features");
  fs::create_directories(fs::path(dir) / "glances");
  Dataset out = ds;  // paths rewritten relative to dir
  for (VideoData& v : out.videos) {
    v.meta.feature_path = "features/" + v.meta.id + ".feat";
    v.meta.glance_path = "glances/" + v.meta.id + ".glance";
    save_features((fs::path(dir) / v.meta.feature_path).string(), v.features);
    save_glances((fs::path(dir) / v.meta.glance_path).string(), v.glances());
  }
  io::write_text_file((fs::path(dir) / "manifest.json").string(),
                      manifest_to_json(out).dump(2) + "\n");
}

inline Dataset load_dataset(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  const std::string text = io::read_text_file(manifest_path);
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw FormatError(manifest_path + ": not valid JSON");
  if (j.value("version", 0) != kManifestVersion)
    throw FormatError(manifest_path + ": unsupported manifest version");
  Dataset ds;
  ds.feature_dim = j.at("feature_dim").get<std::size_t>();
  const fs::path base = fs::path(manifest_path).parent_path();
  for (const auto& rec : j.at("videos")) {
    VideoData v;
    v.meta.id = rec.at("id").get<std::string>();
    v.meta.split = rec.at("split").get<std::string>();
    if (v.meta.split != "train" && v.meta.split != "validation" && v.meta.split != "test")
      throw FormatError(manifest_path + ": video " + v.meta.id + " has unknown split \"" +
                        v.meta.split + "\"");
    v.meta.n_frames = rec.at("n_frames").get<std::size_t>();
    for (const auto& c : rec.at("captions")) v.meta.captions.push_back(c.get<std::string>());
    v.meta.feature_path = rec.at("features").get<std::string>();
    v.meta.glance_path = rec.at("glances").get<std::string>();
    if (rec.contains("scenes")) {
      for (const auto& s : rec["scenes"]) v.meta.scenes.push_back(s.get<int>());
      for (const auto& s : rec["scene_starts"]) v.meta.scene_starts.push_back(s.get<std::size_t>());
    }
    v.features = load_features((base / v.meta.feature_path).string());
    if (v.features.size() != v.meta.n_frames)
      throw FormatError(manifest_path + ": video " + v.meta.id + " declares " +
                        std::to_string(v.meta.n_frames) + " frames but " + v.meta.feature_path +
                        " holds " + std::to_string(v.features.size()));
    if (!v.features.empty() && v.features[0].size() != ds.feature_dim)
      throw FormatError(manifest_path + ": video " + v.meta.id + " features are " +
                        std::to_string(v.features[0].size()) + "-dim, manifest says " +
                        std::to_string(ds.feature_dim));
    const auto glances = load_glances((base / v.meta.glance_path).string());
    if (glances.size() != v.meta.n_frames)
      throw FormatError(manifest_path + ": video " + v.meta.id + " declares " +
                        std::to_string(v.meta.n_frames) + " frames but " + v.meta.glance_path +
                        " holds " + std::to_string(glances.size()));
    v.glance_bytes.resize(v.meta.n_frames * kGlancePixels);
    for (std::size_t f = 0; f < glances.size(); ++f)
      for (std::size_t i = 0; i < kGlancePixels; ++i)
        v.glance_bytes[f * kGlancePixels + i] =
            static_cast<std::uint8_t>(std::lround(glances[f][i] * 255.0));
    ds.videos.push_back(std::move(v));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Synthetic data. Every video is a run of 1..4 scene segments. A scene is an
// archetype with a fixed glance texture, a fixed feature prototype, and a
// fixed caption sentence; frames perturb both with small noise.

struct SynthOptions {
  std::uint64_t seed = 7;
  std::size_t n_train = 200;
  std::size_t n_val = 30;
  std::size_t n_test = 50;
  std::size_t n_frames = 30;
  std::size_t feature_dim = 64;
  std::size_t scenes_min = 1;
  std::size_t scenes_max = 4;
};

namespace synth {

struct Archetype {
  const char* subject;
  const char* verb;
  const char* object;
};

inline const std::vector<Archetype>& archetypes() {
  static const std::vector<Archetype> table = {
      {"dog", "chasing", "ball"},       {"chef", "slicing", "onion"},
      {"man", "riding", "bike"},        {"woman", "playing", "guitar"},
      {"girl", "painting", "fence"},    {"boy", "flying", "kite"},
      {"monkey", "climbing", "tree"},   {"farmer", "driving", "truck"},
      {"baby", "hugging", "bear"},      {"clown", "juggling", "pins"},
      {"dancer", "spinning", "hoop"},   {"singer", "holding", "microphone"},
      {"player", "throwing", "frisbee"},{"cat", "licking", "paw"},
      {"horse", "jumping", "hurdle"},   {"robot", "stacking", "boxes"},
      {"pilot", "landing", "plane"},    {"diver", "feeding", "fish"},
  };
  return table;
}

inline std::string sentence(int archetype) {
  const Archetype& a = archetypes()[static_cast<std::size_t>(archetype)];
  return std::string("a ") + a.subject + " is " + a.verb + " a " + a.object;
}

// Smooth texture with parameters drawn from the caller's stream. Scene
// identity lives in the features; glances only need scenes to look distinct
// from one another within a video.
inline Glance texture(Rng& rng) {
  const double fx = 0.15 + 0.85 * rng.next_double();
  const double fy = 0.15 + 0.85 * rng.next_double();
  const double phase_x = rng.uniform(0.0, 6.28318);
  const double phase_y = rng.uniform(0.0, 6.28318);
  const double mix = rng.uniform(0.25, 0.45);
  Glance g = make_empty_glance();
  for (std::size_t y = 0; y < kGlanceSide; ++y) {
    for (std::size_t x = 0; x < kGlanceSide; ++x) {
      const double v = 0.5 + mix * std::sin(fx * static_cast<double>(x) + phase_x) *
                                 std::cos(fy * static_cast<double>(y) + phase_y);
      g[y * kGlanceSide + x] = std::clamp(v, 0.0, 1.0);
    }
  }
  return g;
}

inline Tensor prototype(int archetype, std::size_t dim, std::uint64_t base_seed) {
  Rng rng = Rng(base_seed).derive(0x7e00 + static_cast<std::uint64_t>(archetype));
  Tensor p = Tensor::vector(dim);
  for (std::size_t j = 0; j < dim; ++j) p[j] = rng.normal();
  return p;
}

}  // namespace synth

inline Dataset generate_synthetic(const SynthOptions& opt) {
  if (opt.feature_dim < 8) throw ConfigError("generate_synthetic: feature_dim must be >= 8");
  if (opt.scenes_min < 1 || opt.scenes_max < opt.scenes_min ||
      opt.scenes_max > synth::archetypes().size())
    throw ConfigError("generate_synthetic: bad scene count range");
  if (opt.n_frames < 2 * opt.scenes_max)
    throw ConfigError("generate_synthetic: need at least 2 frames per scene");

  Dataset ds;
  ds.feature_dim = opt.feature_dim;
  const std::size_t total = opt.n_train + opt.n_val + opt.n_test;
  Rng master(opt.seed);

  for (std::size_t vi = 0; vi < total; ++vi) {
    Rng rng = master.derive(vi);
    VideoData video;
    char idbuf[32];
    std::snprintf(idbuf, sizeof idbuf, "vid%04zu", vi);
    video.meta.id = idbuf;
    video.meta.split = vi < opt.n_train                ? "train"
                       : vi < opt.n_train + opt.n_val ? "validation"
                                                       : "test";
    video.meta.n_frames = opt.n_frames;

    // pick distinct archetypes for the scenes
    const std::size_t n_scenes =
        opt.scenes_min + rng.below(opt.scenes_max - opt.scenes_min + 1);
    std::vector<int> pool(synth::archetypes().size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = static_cast<int>(i);
    for (std::size_t i = 0; i < n_scenes; ++i) {
      const std::size_t j = i + rng.below(pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    video.meta.scenes.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_scenes));

    // contiguous segments, each at least 2 frames
    std::vector<std::size_t> lengths(n_scenes, 2);
    std::size_t remaining = opt.n_frames - 2 * n_scenes;
    for (std::size_t r = 0; r < remaining; ++r) ++lengths[rng.below(n_scenes)];
    std::size_t start = 0;
    for (std::size_t s = 0; s < n_scenes; ++s) {
      video.meta.scene_starts.push_back(start);
      start += lengths[s];
    }

    // three captions keyed to the scene order
    for (int ci = 0; ci < 3; ++ci) {
      const std::size_t si = std::min<std::size_t>(static_cast<std::size_t>(ci), n_scenes - 1);
      video.meta.captions.push_back(synth::sentence(video.meta.scenes[si]));
    }

    video.glance_bytes.resize(opt.n_frames * kGlancePixels);
    for (std::size_t s = 0; s < n_scenes; ++s) {
      const Glance base = synth::texture(rng);
      const Tensor proto = synth::prototype(video.meta.scenes[s], opt.feature_dim, opt.seed);
      for (std::size_t f = 0; f < lengths[s]; ++f) {
        const std::size_t frame = video.meta.scene_starts[s] + f;
        for (std::size_t i = 0; i < kGlancePixels; ++i) {
          const double v = std::clamp(base[i] + rng.uniform(-0.02, 0.02), 0.0, 1.0);
          video.glance_bytes[frame * kGlancePixels + i] =
              static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
        Tensor feat = Tensor::vector(opt.feature_dim);
        for (std::size_t j = 0; j < opt.feature_dim; ++j)
          feat[j] = static_cast<double>(
              static_cast<float>(proto[j] + 0.05 * rng.normal()));  // f32 on disk
        video.features.push_back(std::move(feat));
      }
    }
    ds.videos.push_back(std::move(video));
  }
  return ds;
}

}  // namespace picknet

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "picknet/errors.hpp"
#include "picknet/io_util.hpp"
#include "picknet/tensor.hpp"

namespace picknet {

inline constexpr std::size_t kGlanceSide = 56;
inline constexpr std::size_t kGlancePixels = kGlanceSide * kGlanceSide;

// Row-major RGB frame, 8 bits per channel.
struct FrameImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> rgb;  // 3 * height * width
};

// 56x56 grayscale thumbnail with values in [0, 1].
using Glance = Tensor;

inline Glance make_empty_glance() { return Tensor::vector(kGlancePixels); }

// Grayscale via luma (0.299 R + 0.587 G + 0.114 B) / 255, then bilinear
// resize to 56x56. Output pixel centers map to (i + 0.5) * scale - 0.5 in
// the source, clamped to the border, so a 56x56 input passes through
// unchanged.
inline Glance make_glance(const FrameImage& frame) {
  if (frame.height == 0 || frame.width == 0)
    throw UsageError("make_glance: zero-sized frame (" + std::to_string(frame.height) + "x" +
                     std::to_string(frame.width) + ")");
  if (frame.rgb.size() != 3 * frame.height * frame.width)
    throw UsageError("make_glance: rgb buffer has " + std::to_string(frame.rgb.size()) +
                     " bytes, expected " + std::to_string(3 * frame.height * frame.width));

  std::vector<double> gray(frame.height * frame.width);
  for (std::size_t i = 0; i < gray.size(); ++i) {
    const std::uint8_t r = frame.rgb[3 * i];
    const std::uint8_t g = frame.rgb[3 * i + 1];
    const std::uint8_t b = frame.rgb[3 * i + 2];
    gray[i] = (0.299 * r + 0.587 * g + 0.114 * b) / 255.0;
  }

  const double sy = static_cast<double>(frame.height) / static_cast<double>(kGlanceSide);
  const double sx = static_cast<double>(frame.width) / static_cast<double>(kGlanceSide);
  Glance out = make_empty_glance();
  for (std::size_t oy = 0; oy < kGlanceSide; ++oy) {
    double fy = (static_cast<double>(oy) + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(frame.height - 1));
    const std::size_t y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, frame.height - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t ox = 0; ox < kGlanceSide; ++ox) {
      double fx = (static_cast<double>(ox) + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(frame.width - 1));
      const std::size_t x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, frame.width - 1);
      const double wx = fx - static_cast<double>(x0);
      const double top = gray[y0 * frame.width + x0] * (1.0 - wx) + gray[y0 * frame.width + x1] * wx;
      const double bot = gray[y1 * frame.width + x0] * (1.0 - wx) + gray[y1 * frame.width + x1] * wx;
      out[oy * kGlanceSide + ox] = top * (1.0 - wy) + bot * wy;
    }
  }
  return out;
}

// d = current - template, flattened row-major; entries land in [-1, 1].
inline Tensor glance_diff(const Glance& current, const Glance& tmpl) {
  if (current.size() != kGlancePixels || tmpl.size() != kGlancePixels)
    throw ShapeError("glance_diff: glances are " + current.shape_str() + " and " +
                     tmpl.shape_str() + ", expected [" + std::to_string(kGlancePixels) + "]");
  Tensor d = Tensor::vector(kGlancePixels);
  for (std::size_t i = 0; i < kGlancePixels; ++i) d[i] = current[i] - tmpl[i];
  return d;
}

// Glance file: magic "PKNG", u32 version=1, u32 n_frames, u32 h=56,
// u32 w=56, then u8 pixels row-major per frame. Pixels store round(v*255)
// and load as v/255.
inline constexpr std::uint32_t kGlanceFileVersion = 1;

inline void save_glances(const std::string& path, const std::vector<Glance>& glances) {
  auto out = io::open_out(path);
  io::write_bytes(out, "PKNG", 4);
  io::write_u32(out, kGlanceFileVersion);
  io::write_u32(out, static_cast<std::uint32_t>(glances.size()));
  io::write_u32(out, static_cast<std::uint32_t>(kGlanceSide));
  io::write_u32(out, static_cast<std::uint32_t>(kGlanceSide));
  for (const Glance& g : glances) {
    if (g.size() != kGlancePixels)
      throw UsageError("save_glances: glance has " + std::to_string(g.size()) + " values");
    for (std::size_t i = 0; i < kGlancePixels; ++i) {
      double v = std::clamp(g[i], 0.0, 1.0);
      const auto byte = static_cast<std::uint8_t>(std::lround(v * 255.0));
      io::write_bytes(out, &byte, 1);
    }
  }
}

inline std::vector<Glance> load_glances(const std::string& path) {
  auto in = io::open_in(path);
  io::Reader r(in, path);
  r.expect_magic("PKNG");
  const std::uint32_t version = r.read_u32();
  if (version != kGlanceFileVersion)
    throw FormatError(path + ": unsupported glance file version " + std::to_string(version));
  const std::uint32_t n_frames = r.read_u32();
  const std::uint32_t h = r.read_u32();
  const std::uint32_t w = r.read_u32();
  if (h != kGlanceSide || w != kGlanceSide)
    throw FormatError(path + ": glance size " + std::to_string(h) + "x" + std::to_string(w) +
                      ", expected 56x56 (header at byte offset 12)");
  std::vector<Glance> glances;
  glances.reserve(n_frames);
  std::vector<std::uint8_t> buf(kGlancePixels);
  for (std::uint32_t f = 0; f < n_frames; ++f) {
    r.read_bytes(buf.data(), buf.size());
    Glance g = make_empty_glance();
    for (std::size_t i = 0; i < kGlancePixels; ++i) g[i] = buf[i] / 255.0;
    glances.push_back(std::move(g));
  }
  if (!r.at_eof())
    throw FormatError(path + ": trailing bytes after frame data at byte offset " +
                      std::to_string(r.offset()));
  return glances;
}

}  // namespace picknet

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "picknet/errors.hpp"
#include "picknet/io_util.hpp"
#include "picknet/tensor.hpp"

namespace picknet {

// Checkpoint format, shared by every stage: magic "PKNC", u32 version,
// u32 tensor count, then per tensor a u16 name length, UTF-8 name, u32 rank,
// u32 dims, f64 LE data; the rest of the file is a UTF-8 JSON config blob.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::vector<std::pair<std::string, Tensor>> tensors;
  nlohmann::json config;

  const Tensor* find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return &t;
    return nullptr;
  }
};

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  auto out = io::open_out(path);
  io::write_bytes(out, "PKNC", 4);
  io::write_u32(out, kCheckpointVersion);
  io::write_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    io::write_u16(out, static_cast<std::uint16_t>(name.size()));
    io::write_bytes(out, name.data(), name.size());
    io::write_u32(out, static_cast<std::uint32_t>(t.rank()));
    if (t.rank() == 1) {
      io::write_u32(out, static_cast<std::uint32_t>(t.rows()));
    } else {
      io::write_u32(out, static_cast<std::uint32_t>(t.rows()));
      io::write_u32(out, static_cast<std::uint32_t>(t.cols()));
    }
    for (double v : t.data()) io::write_f64(out, v);
  }
  const std::string blob = ckpt.config.dump();
  io::write_bytes(out, blob.data(), blob.size());
}

inline Checkpoint load_checkpoint(const std::string& path) {
  auto in = io::open_in(path);
  io::Reader r(in, path);
  r.expect_magic("PKNC");
  const std::uint32_t version = r.read_u32();
  if (version != kCheckpointVersion)
    throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t count = r.read_u32();
  Checkpoint ckpt;
  ckpt.tensors.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint16_t name_len = r.read_u16();
    std::string name(name_len, '\0');
    r.read_bytes(name.data(), name_len);
    const std::uint32_t rank = r.read_u32();
    if (rank != 1 && rank != 2)
      throw FormatError(path + ": tensor \"" + name + "\" has rank " + std::to_string(rank) +
                        " at byte offset " + std::to_string(r.offset() - 4));
    Tensor t;
    if (rank == 1) {
      t = Tensor::vector(r.read_u32());
    } else {
      const std::uint32_t rows = r.read_u32();
      const std::uint32_t cols = r.read_u32();
      t = Tensor::matrix(rows, cols);
    }
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = r.read_f64();
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  const std::string blob = r.read_rest();
  if (blob.empty()) {
    ckpt.config = nlohmann::json::object();
  } else {
    ckpt.config = nlohmann::json::parse(blob, nullptr, false);
    if (ckpt.config.is_discarded())
      throw FormatError(path + ": config blob is not valid JSON");
  }
  return ckpt;
}

// Copies checkpoint tensors into an existing param set by name. Every param
// must be present with a matching shape; unknown checkpoint tensors are
// ignored so combined checkpoints can feed single-module loads.
inline void load_params(const Checkpoint& ckpt, const std::vector<Param*>& params,
                        const std::string& path_for_errors) {
  for (Param* p : params) {
    const Tensor* t = ckpt.find(p->name);
    if (t == nullptr)
      throw FormatError(path_for_errors + ": missing tensor \"" + p->name + "\"");
    if (!t->same_shape(p->value))
      throw FormatError(path_for_errors + ": tensor \"" + p->name + "\" is " + t->shape_str() +
                        ", expected " + p->value.shape_str());
    p->value = *t;
    p->zero_grad();
  }
}

inline void append_params(Checkpoint& ckpt, const std::vector<const Param*>& params) {
  for (const Param* p : params) ckpt.tensors.emplace_back(p->name, p->value);
}

}  // namespace picknet

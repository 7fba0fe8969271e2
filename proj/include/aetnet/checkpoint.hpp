#pragma once

// EFNW checkpoint container: a flat list of named float tensors.

#include <cstdint>
#include <string>
#include <vector>

#include "aetnet/io_util.hpp"

namespace aetnet::nn {

struct NamedTensor {
  std::string name;
  std::vector<int> dims;
  std::vector<float> data;
};

inline constexpr char kCheckpointMagic[4] = {'E', 'F', 'N', 'W'};
inline constexpr uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors) {
  io::Writer w(path);
  w.bytes(kCheckpointMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32((uint32_t)tensors.size());
  for (const auto& t : tensors) {
    w.u32((uint32_t)t.name.size());
    w.bytes(t.name.data(), t.name.size());
    w.u32((uint32_t)t.dims.size());
    size_t n = 1;
    for (int d : t.dims) {
      if (d <= 0) throw std::invalid_argument("checkpoint tensor '" + t.name + "': bad dim");
      w.u32((uint32_t)d);
      n *= (size_t)d;
    }
    if (n != t.data.size())
      throw std::invalid_argument("checkpoint tensor '" + t.name + "': dims/data mismatch");
    for (float v : t.data) w.f32(v);
  }
  w.close();
}

inline std::vector<NamedTensor> load_checkpoint(const std::string& path) {
  io::Reader r(path);
  r.expect_magic(kCheckpointMagic, "EFNW checkpoint");
  uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    r.fail("unsupported checkpoint version " + std::to_string(version));
  uint32_t count = r.u32();
  std::vector<NamedTensor> tensors;
  tensors.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    uint32_t name_len = r.u32();
    if (name_len > 4096) r.fail("parameter name length " + std::to_string(name_len) + " too large");
    t.name.resize(name_len);
    r.bytes(t.name.data(), name_len);
    uint32_t ndim = r.u32();
    if (ndim > 8) r.fail("tensor '" + t.name + "': too many dimensions");
    size_t n = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      uint32_t dim = r.u32();
      if (dim == 0 || dim > (1u << 28)) r.fail("tensor '" + t.name + "': bad dimension");
      t.dims.push_back((int)dim);
      n *= dim;
      if (n > (1ull << 32)) r.fail("tensor '" + t.name + "': implausible element count");
    }
    if (n * 4 > r.remaining())
      r.fail("tensor '" + t.name + "': file too small for " + std::to_string(n) + " elements");
    t.data.resize(n);
    for (size_t j = 0; j < n; ++j) t.data[j] = r.f32();
    tensors.push_back(std::move(t));
  }
  if (!r.at_end()) r.fail("trailing bytes after last tensor");
  return tensors;
}

}  // namespace aetnet::nn

#pragma once

// Event-tensor encoder: timestamp quantization into M^ bins, polarity
// voxelization (spike or running-sum), and learned temporal compression that
// merges groups of G frames down to M* output frames. Includes the ablation
// variants (spike-only, two-channel, group averaging, direct quantization)
// and the AETF tensor file format.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "aetnet/events.hpp"
#include "aetnet/nn.hpp"

namespace aetnet {

enum class EncodeMode { Aet, Spike, SpikeAccum, AvgCompress, QuantizeOnly };

// Maps the CLI spellings aet|spike|spike-accum|avg|quantize-only; throws
// std::invalid_argument on anything else.
EncodeMode parse_encode_mode(const std::string& name);
std::string encode_mode_name(EncodeMode mode);

// One temporal compression stage: G consecutive frames are concatenated on
// the channel axis and passed through a shared square conv (same padding)
// followed by a leaky rectifier.
struct ConvStage {
  int group_size = 1;
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 5;        // odd
  float alpha = 0.01f;   // leaky-rectifier slope
  std::vector<float> weights;  // [C_out, G*C_in, K, K]
  std::vector<float> bias;     // [C_out]
};

struct EncoderConfig {
  int m_hat = 100;
  EncodeMode mode = EncodeMode::Aet;
  std::vector<ConvStage> stages;
};

// Fills stage weights and bias uniformly in +/- 1/sqrt(G * C_in * K^2).
void init_stage_weights(ConvStage& stage, std::mt19937& rng);

// Builds a config with one stage per group: groups[i] merges channels[i] ->
// channels[i+1] frames-of-channels with the given square kernel. `channels`
// must have groups.size()+1 entries and start at the mode's input channel
// count (2 for spike-accum, otherwise 1). Weights are seeded from `seed`.
EncoderConfig make_encoder_config(int m_hat, const std::vector<int>& groups,
                                  const std::vector<int>& channels, int kernel, EncodeMode mode,
                                  uint32_t seed);

// Default published setup: M^=100, stages (G=2, 1->4, K=5), (G=5, 4->3, K=5).
EncoderConfig default_encoder_config(EncodeMode mode = EncodeMode::Aet, uint32_t seed = 1);

// Throws std::invalid_argument on bad bin counts, non-odd kernels, stage
// channel chains that do not line up, weight buffers of the wrong size, or a
// group-size product that does not divide m_hat.
void validate_encoder_config(const EncoderConfig& cfg);

// Number of output frames M* = m_hat / prod(G).
int num_output_frames(const EncoderConfig& cfg);

// Channel count of the encoded tensor: last stage C_out for the learned
// pipelines, otherwise 1.
int num_output_channels(const EncoderConfig& cfg);

struct QuantizedEvent {
  int bin = 1;  // [1, m_hat]
  uint16_t x = 0;
  uint16_t y = 0;
  int8_t p = 1;
};

// Q = max(ceil(m_hat * (t - t_min) / (t_max - t_min)), 1). All events land in
// bin 1 when every timestamp is identical. Throws on an empty sample or
// m_hat < 1.
std::vector<QuantizedEvent> quantize_timestamps(const EventSample& sample, int m_hat);

// Dense [m_hat, H, W] stack of signed per-bin frames, time-major.
struct VoxelGrid {
  int m_hat = 0;
  SensorGeometry geometry;
  std::vector<float> values;

  float at(int m, int y, int x) const {
    return values[((size_t)m * geometry.height + y) * geometry.width + x];
  }
};

// V(m,y,x) = sum of polarities of events at (x,y) with bin <= m: per-bin
// scatter followed by a prefix sum along the time axis.
VoxelGrid voxelize_accumulative(const std::vector<QuantizedEvent>& q, SensorGeometry geometry,
                                int m_hat);

// V(m,y,x) = sum of polarities of events at (x,y) with bin == m exactly.
VoxelGrid voxelize_spike(const std::vector<QuantizedEvent>& q, SensorGeometry geometry, int m_hat);

// Wraps one voxel grid as a constant [M, 1, H, W] tensor, or two grids as the
// channels of a [M, 2, H, W] tensor (channel 0 = a, channel 1 = b).
template <typename S>
nn::Tensor<S> grid_to_tensor(const VoxelGrid& grid) {
  const int h = grid.geometry.height, w = grid.geometry.width;
  auto t = nn::make_tensor<S>({grid.m_hat, 1, h, w});
  for (size_t i = 0; i < grid.values.size(); ++i) t->value[i] = S(grid.values[i]);
  return t;
}

template <typename S>
nn::Tensor<S> grids_to_tensor(const VoxelGrid& a, const VoxelGrid& b) {
  if (a.m_hat != b.m_hat || !(a.geometry == b.geometry))
    throw std::invalid_argument("grids_to_tensor: mismatched grids");
  const int h = a.geometry.height, w = a.geometry.width;
  const size_t hw = (size_t)h * w;
  auto t = nn::make_tensor<S>({a.m_hat, 2, h, w});
  for (int m = 0; m < a.m_hat; ++m)
    for (size_t i = 0; i < hw; ++i) {
      t->value[((size_t)m * 2 + 0) * hw + i] = S(a.values[m * hw + i]);
      t->value[((size_t)m * 2 + 1) * hw + i] = S(b.values[m * hw + i]);
    }
  return t;
}

// Merges groups of `group_size` frames: [M, C, H, W] -> [M/G, G*C, H, W] by
// channel concatenation, then a shared same-padded conv with the given square
// odd kernel and a leaky rectifier. Differentiable through frames, weights
// and bias; equivalent to a 3-D convolution with temporal stride and extent G.
template <typename S>
nn::Tensor<S> aligned_compress(const nn::Tensor<S>& frames, const nn::Tensor<S>& weights,
                               const nn::Tensor<S>& bias, int group_size, S alpha = S(0.01)) {
  nn::detail::check_dims(frames, 4, "aligned_compress frames");
  nn::detail::check_dims(weights, 4, "aligned_compress weights");
  const int m = frames->dims[0], c = frames->dims[1];
  const int k = weights->dims[2];
  if (group_size < 1) throw std::invalid_argument("aligned_compress: group size must be >= 1");
  if (m % group_size != 0)
    throw std::invalid_argument("aligned_compress: frame count " + std::to_string(m) +
                                " not divisible by group size " + std::to_string(group_size));
  if (weights->dims[3] != k || k % 2 == 0)
    throw std::invalid_argument("aligned_compress: kernel must be square and odd");
  if (weights->dims[1] != group_size * c)
    throw std::invalid_argument("aligned_compress: weight channels != G * C_in");
  auto grouped = nn::reshape(frames, {m / group_size, group_size * c, frames->dims[2],
                                      frames->dims[3]});
  return nn::leaky_relu(nn::conv2d(grouped, weights, bias, (k - 1) / 2), alpha);
}

// Replaces each group of `group_size` frames by their per-channel mean.
template <typename S>
nn::Tensor<S> avg_compress(const nn::Tensor<S>& frames, int group_size) {
  nn::detail::check_dims(frames, 4, "avg_compress frames");
  const int m = frames->dims[0], c = frames->dims[1];
  const int h = frames->dims[2], w = frames->dims[3];
  if (group_size < 1) throw std::invalid_argument("avg_compress: group size must be >= 1");
  if (m % group_size != 0)
    throw std::invalid_argument("avg_compress: frame count " + std::to_string(m) +
                                " not divisible by group size " + std::to_string(group_size));
  const int mg = m / group_size;
  const size_t chw = (size_t)c * h * w;
  auto out = nn::make_tensor<S>({mg, c, h, w});
  for (int g = 0; g < mg; ++g) {
    S* ov = out->value.data() + g * chw;
    for (int i = 0; i < group_size; ++i) {
      const S* fv = frames->value.data() + ((size_t)g * group_size + i) * chw;
      for (size_t j = 0; j < chw; ++j) ov[j] += fv[j];
    }
    for (size_t j = 0; j < chw; ++j) ov[j] /= S(group_size);
  }
  nn::TensorData<S>* o = out.get();
  nn::detail::wire(
      out,
      [o, frames, group_size, mg, chw] {
        frames->ensure_grad();
        for (int g = 0; g < mg; ++g)
          for (int i = 0; i < group_size; ++i) {
            S* fg = frames->grad.data() + ((size_t)g * group_size + i) * chw;
            const S* og = o->grad.data() + g * chw;
            for (size_t j = 0; j < chw; ++j) fg[j] += og[j] / S(group_size);
          }
      },
      frames);
  return out;
}

// Runs one configured stage on constant float frames (inference path).
nn::Tensor<float> run_stage(const nn::Tensor<float>& frames, const ConvStage& stage);

// Final encoded tensor, channel-major [C, M*, H, W].
struct AETensor {
  int channels = 0;
  int num_frames = 0;
  SensorGeometry geometry;
  std::vector<float> values;

  float at(int c, int m, int y, int x) const {
    return values[(((size_t)c * num_frames + m) * geometry.height + y) * geometry.width + x];
  }
};

// Reorders a time-major [M, C, H, W] tensor into a channel-major AETensor.
AETensor to_aetensor(const nn::Tensor<float>& frames, SensorGeometry geometry);

// Full pipeline for one sample. aet: quantize -> accumulative voxelize ->
// all stages. spike: spike voxelize -> stages. spike-accum: both grids as two
// channels -> stages. avg-compress: accumulative voxelize -> group means.
// quantize-only: spike voxelize directly at M* bins, single channel.
AETensor encode(const EventSample& sample, const EncoderConfig& cfg);

// AETF tensor file: magic "AETF", u32 version = 1, u32 ndim, u32 dims[ndim],
// then float32 little-endian values, row-major.
void save_aetf(const AETensor& tensor, const std::string& path);
AETensor load_aetf(const std::string& path);

}  // namespace aetnet

#include "aetnet/encoder.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "aetnet/io_util.hpp"

namespace aetnet {

EncodeMode parse_encode_mode(const std::string& name) {
  if (name == "aet") return EncodeMode::Aet;
  if (name == "spike") return EncodeMode::Spike;
  if (name == "spike-accum") return EncodeMode::SpikeAccum;
  if (name == "avg") return EncodeMode::AvgCompress;
  if (name == "quantize-only") return EncodeMode::QuantizeOnly;
  throw std::invalid_argument("unknown encode mode '" + name +
                              "' (expected aet|spike|spike-accum|avg|quantize-only)");
}

std::string encode_mode_name(EncodeMode mode) {
  switch (mode) {
    case EncodeMode::Aet: return "aet";
    case EncodeMode::Spike: return "spike";
    case EncodeMode::SpikeAccum: return "spike-accum";
    case EncodeMode::AvgCompress: return "avg";
    case EncodeMode::QuantizeOnly: return "quantize-only";
  }
  throw std::logic_error("bad encode mode");
}

void init_stage_weights(ConvStage& stage, std::mt19937& rng) {
  const size_t fan_in = (size_t)stage.group_size * stage.in_channels * stage.kernel * stage.kernel;
  const float bound = 1.0f / std::sqrt((float)fan_in);
  std::uniform_real_distribution<float> dist(-bound, bound);
  stage.weights.resize((size_t)stage.out_channels * fan_in);
  stage.bias.resize(stage.out_channels);
  for (auto& v : stage.weights) v = dist(rng);
  for (auto& v : stage.bias) v = dist(rng);
}

EncoderConfig make_encoder_config(int m_hat, const std::vector<int>& groups,
                                  const std::vector<int>& channels, int kernel, EncodeMode mode,
                                  uint32_t seed) {
  if (channels.size() != groups.size() + 1)
    throw std::invalid_argument("encoder config: need one more channel count than group count");
  EncoderConfig cfg;
  cfg.m_hat = m_hat;
  cfg.mode = mode;
  std::mt19937 rng(seed);
  for (size_t i = 0; i < groups.size(); ++i) {
    ConvStage stage;
    stage.group_size = groups[i];
    stage.in_channels = channels[i];
    stage.out_channels = channels[i + 1];
    stage.kernel = kernel;
    init_stage_weights(stage, rng);
    cfg.stages.push_back(std::move(stage));
  }
  validate_encoder_config(cfg);
  return cfg;
}

EncoderConfig default_encoder_config(EncodeMode mode, uint32_t seed) {
  const int c0 = mode == EncodeMode::SpikeAccum ? 2 : 1;
  return make_encoder_config(100, {2, 5}, {c0, 4, 3}, 5, mode, seed);
}

namespace {

// Stage weights participate only in the aet / spike / spike-accum pipelines.
bool mode_uses_stage_weights(EncodeMode mode) {
  return mode == EncodeMode::Aet || mode == EncodeMode::Spike || mode == EncodeMode::SpikeAccum;
}

int64_t group_product(const EncoderConfig& cfg) {
  int64_t prod = 1;
  for (const auto& s : cfg.stages) prod *= s.group_size;
  return prod;
}

}  // namespace

void validate_encoder_config(const EncoderConfig& cfg) {
  if (cfg.m_hat < 1) throw std::invalid_argument("encoder config: bin count must be >= 1");
  for (size_t i = 0; i < cfg.stages.size(); ++i) {
    const ConvStage& s = cfg.stages[i];
    if (s.group_size < 1)
      throw std::invalid_argument("encoder config: stage group size must be >= 1");
    if (!mode_uses_stage_weights(cfg.mode)) continue;
    if (s.in_channels < 1 || s.out_channels < 1)
      throw std::invalid_argument("encoder config: stage channel counts must be >= 1");
    if (s.kernel < 1 || s.kernel % 2 == 0)
      throw std::invalid_argument("encoder config: kernel size must be odd and positive");
    const size_t want_w =
        (size_t)s.out_channels * s.group_size * s.in_channels * s.kernel * s.kernel;
    if (s.weights.size() != want_w || s.bias.size() != (size_t)s.out_channels)
      throw std::invalid_argument("encoder config: stage " + std::to_string(i) +
                                  " weight/bias buffers have the wrong size");
    if (i + 1 < cfg.stages.size() && cfg.stages[i + 1].in_channels != s.out_channels)
      throw std::invalid_argument("encoder config: stage " + std::to_string(i + 1) +
                                  " input channels do not match previous output channels");
  }
  if (mode_uses_stage_weights(cfg.mode) && !cfg.stages.empty()) {
    const int want_c0 = cfg.mode == EncodeMode::SpikeAccum ? 2 : 1;
    if (cfg.stages.front().in_channels != want_c0)
      throw std::invalid_argument("encoder config: first stage must take " +
                                  std::to_string(want_c0) + " input channel(s) in mode " +
                                  encode_mode_name(cfg.mode));
  }
  const int64_t prod = group_product(cfg);
  if (cfg.m_hat % prod != 0)
    throw std::invalid_argument("encoder config: group size product " + std::to_string(prod) +
                                " does not divide bin count " + std::to_string(cfg.m_hat));
}

int num_output_frames(const EncoderConfig& cfg) {
  validate_encoder_config(cfg);
  return (int)(cfg.m_hat / group_product(cfg));
}

int num_output_channels(const EncoderConfig& cfg) {
  if (!mode_uses_stage_weights(cfg.mode)) return 1;
  if (cfg.stages.empty()) return cfg.mode == EncodeMode::SpikeAccum ? 2 : 1;
  return cfg.stages.back().out_channels;
}

std::vector<QuantizedEvent> quantize_timestamps(const EventSample& sample, int m_hat) {
  if (m_hat < 1) throw std::invalid_argument("quantize_timestamps: bin count must be >= 1");
  if (sample.events.empty())
    throw std::invalid_argument("quantize_timestamps: sample has no events");
  const uint64_t t0 = sample.t_min(), t1 = sample.t_max();
  const double span = double(t1 - t0);
  std::vector<QuantizedEvent> out;
  out.reserve(sample.events.size());
  for (const Event& e : sample.events) {
    int bin = 1;
    if (t1 != t0) {
      // Multiply before dividing: one rounding instead of two, so events at
      // exact bin boundaries k*span/m_hat never spill into bin k+1.
      const double scaled = double(m_hat) * double(e.t - t0) / span;
      bin = (int)std::ceil(scaled);
      if (bin < 1) bin = 1;
      if (bin > m_hat) bin = m_hat;
    }
    out.push_back({bin, e.x, e.y, e.p});
  }
  return out;
}

namespace {

VoxelGrid scatter_bins(const std::vector<QuantizedEvent>& q, SensorGeometry geometry, int m_hat) {
  if (m_hat < 1) throw std::invalid_argument("voxelize: bin count must be >= 1");
  if (geometry.width < 1 || geometry.height < 1)
    throw std::invalid_argument("voxelize: geometry must be positive");
  VoxelGrid grid;
  grid.m_hat = m_hat;
  grid.geometry = geometry;
  grid.values.assign((size_t)m_hat * geometry.height * geometry.width, 0.0f);
  const size_t hw = (size_t)geometry.height * geometry.width;
  for (size_t j = 0; j < q.size(); ++j) {
    const QuantizedEvent& e = q[j];
    if (e.bin < 1 || e.bin > m_hat || e.x >= geometry.width || e.y >= geometry.height)
      throw std::invalid_argument("voxelize: event " + std::to_string(j) +
                                  " outside the grid bounds");
    grid.values[(size_t)(e.bin - 1) * hw + (size_t)e.y * geometry.width + e.x] += float(e.p);
  }
  return grid;
}

}  // namespace

VoxelGrid voxelize_accumulative(const std::vector<QuantizedEvent>& q, SensorGeometry geometry,
                                int m_hat) {
  VoxelGrid grid = scatter_bins(q, geometry, m_hat);
  const size_t hw = (size_t)geometry.height * geometry.width;
  for (int m = 1; m < m_hat; ++m) {
    float* cur = grid.values.data() + (size_t)m * hw;
    const float* prev = cur - hw;
    for (size_t i = 0; i < hw; ++i) cur[i] += prev[i];
  }
  return grid;
}

VoxelGrid voxelize_spike(const std::vector<QuantizedEvent>& q, SensorGeometry geometry,
                         int m_hat) {
  return scatter_bins(q, geometry, m_hat);
}

nn::Tensor<float> run_stage(const nn::Tensor<float>& frames, const ConvStage& stage) {
  auto w = nn::make_tensor<float>(
      {stage.out_channels, stage.group_size * stage.in_channels, stage.kernel, stage.kernel},
      stage.weights);
  auto b = nn::make_tensor<float>({stage.out_channels}, stage.bias);
  return aligned_compress(frames, w, b, stage.group_size, stage.alpha);
}

AETensor to_aetensor(const nn::Tensor<float>& frames, SensorGeometry geometry) {
  nn::detail::check_dims(frames, 4, "to_aetensor frames");
  const int m = frames->dims[0], c = frames->dims[1];
  const int h = frames->dims[2], w = frames->dims[3];
  if (h != geometry.height || w != geometry.width)
    throw std::invalid_argument("to_aetensor: frame size does not match geometry");
  AETensor out;
  out.channels = c;
  out.num_frames = m;
  out.geometry = geometry;
  out.values.resize(frames->value.size());
  const size_t hw = (size_t)h * w;
  for (int mi = 0; mi < m; ++mi)
    for (int ci = 0; ci < c; ++ci) {
      const float* src = frames->value.data() + ((size_t)mi * c + ci) * hw;
      float* dst = out.values.data() + ((size_t)ci * m + mi) * hw;
      std::copy(src, src + hw, dst);
    }
  return out;
}

AETensor encode(const EventSample& sample, const EncoderConfig& cfg) {
  validate_encoder_config(cfg);
  const int m_star = num_output_frames(cfg);

  if (cfg.mode == EncodeMode::QuantizeOnly) {
    auto q = quantize_timestamps(sample, m_star);
    VoxelGrid grid = voxelize_spike(q, sample.geometry, m_star);
    return to_aetensor(grid_to_tensor<float>(grid), sample.geometry);
  }

  auto q = quantize_timestamps(sample, cfg.m_hat);
  nn::Tensor<float> frames;
  switch (cfg.mode) {
    case EncodeMode::Aet:
    case EncodeMode::AvgCompress:
      frames = grid_to_tensor<float>(voxelize_accumulative(q, sample.geometry, cfg.m_hat));
      break;
    case EncodeMode::Spike:
      frames = grid_to_tensor<float>(voxelize_spike(q, sample.geometry, cfg.m_hat));
      break;
    case EncodeMode::SpikeAccum:
      frames = grids_to_tensor<float>(voxelize_spike(q, sample.geometry, cfg.m_hat),
                                      voxelize_accumulative(q, sample.geometry, cfg.m_hat));
      break;
    default:
      throw std::logic_error("bad encode mode");
  }

  for (const ConvStage& stage : cfg.stages)
    frames = cfg.mode == EncodeMode::AvgCompress ? avg_compress(frames, stage.group_size)
                                                 : run_stage(frames, stage);
  return to_aetensor(frames, sample.geometry);
}

// --------------------------------------------------------------------------
// AETF file format

static constexpr char kAetfMagic[4] = {'A', 'E', 'T', 'F'};
static constexpr uint32_t kAetfVersion = 1;
static constexpr uint32_t kMaxDim = 1u << 28;
static constexpr uint64_t kMaxElements = 1ull << 28;

void save_aetf(const AETensor& tensor, const std::string& path) {
  const uint32_t dims[4] = {(uint32_t)tensor.channels, (uint32_t)tensor.num_frames,
                            tensor.geometry.height, tensor.geometry.width};
  uint64_t total = 1;
  for (uint32_t d : dims) {
    if (d == 0) throw std::invalid_argument("save_aetf: tensor has an empty dimension");
    total *= d;
  }
  if (tensor.values.size() != total)
    throw std::invalid_argument("save_aetf: value buffer does not match dimensions");
  io::Writer out(path);
  out.bytes(kAetfMagic, 4);
  out.u32(kAetfVersion);
  out.u32(4);
  for (uint32_t d : dims) out.u32(d);
  for (float v : tensor.values) out.f32(v);
  out.close();
}

AETensor load_aetf(const std::string& path) {
  io::Reader in(path);
  in.expect_magic(kAetfMagic, "AETF");
  const uint32_t version = in.u32();
  if (version != kAetfVersion)
    in.fail("unsupported AETF version " + std::to_string(version));
  const uint32_t ndim = in.u32();
  if (ndim != 4) in.fail("expected a 4-dimensional tensor, got ndim " + std::to_string(ndim));
  uint32_t dims[4];
  uint64_t total = 1;
  for (auto& d : dims) {
    d = in.u32();
    if (d == 0 || d > kMaxDim) in.fail("dimension out of range");
    total *= d;
    if (total > kMaxElements) in.fail("tensor too large");
  }
  if (dims[2] > 0xffff || dims[3] > 0xffff) in.fail("spatial size exceeds sensor geometry range");
  if (total * 4 > in.remaining()) in.fail("file too small for declared tensor size");
  AETensor out;
  out.channels = (int)dims[0];
  out.num_frames = (int)dims[1];
  out.geometry = {(uint16_t)dims[3], (uint16_t)dims[2]};
  out.values.resize(total);
  for (auto& v : out.values) v = in.f32();
  if (!in.at_end()) in.fail("trailing bytes after tensor data");
  return out;
}

}  // namespace aetnet

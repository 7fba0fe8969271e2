#include "aetnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace aetnet::synth {
namespace {

constexpr double kIntensityFloor = 0.05;  // avoids log singularities
constexpr double kEdgeWidth = 1.0;        // soft shape edge, pixels

// Temporal-order flash schedule as cycle fractions. Both lamps hold a 50%
// duty cycle and the second lamp lags the first by kFlashLag of a cycle.
// With equal duty the lagged on/off difference process is exchangeable, so
// the change pattern any single accumulated snapshot shows is distributed
// identically under the two orders (no single-frame class signal for a
// phase-uniform window); only the lag direction — visible to a sequence
// model — separates the classes. A lag of exactly 0.5 would make the orders
// congruent, so it must stay away from 0.5.
constexpr double kFlashDuty = 0.5;
constexpr double kFlashLag = 0.3;

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// Coverage ramp across a soft edge; d is the signed inside-distance.
double edge_cov(double d) { return clamp01(0.5 + d / kEdgeWidth); }

// Distance from a to the nearest periodic image of b.
double wrap_dist(double a, double b, double period) {
  double d = std::fabs(a - b);
  d = std::fmod(d, period);
  return std::min(d, period - d);
}

struct FrameState {
  double cx = 0.0, cy = 0.0;  // shape center
  double gate_a = 0.0, gate_b = 0.0;
};

struct Placement {
  double cx, cy, size, phase, jitter_phase_x, jitter_phase_y;
};

Placement draw_placement(const SceneConfig& c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Fixed draw order keeps rendering deterministic across config variants.
  double ux = unit(rng), uy = unit(rng), us = unit(rng), up = unit(rng);
  double uj1 = unit(rng), uj2 = unit(rng);
  Placement p{};
  p.cx = c.center_x >= 0.0 ? c.center_x : (0.3 + 0.4 * ux) * c.geometry.width;
  p.cy = c.center_y >= 0.0 ? c.center_y : (0.3 + 0.4 * uy) * c.geometry.height;
  double dim = std::min(c.geometry.width, c.geometry.height);
  p.size = c.size >= 0.0 ? c.size : (0.15 + 0.15 * us) * dim;
  p.phase = c.phase >= 0.0 ? c.phase : up;
  p.jitter_phase_x = 2.0 * M_PI * uj1;
  p.jitter_phase_y = 2.0 * M_PI * uj2;
  return p;
}

double shape_coverage(const SceneConfig& c, const FrameState& f, double size, double px,
                      double py) {
  switch (c.shape) {
    case ShapeKind::Disc: {
      double d = std::hypot(px - f.cx, py - f.cy);
      return edge_cov(size - d);
    }
    case ShapeKind::Square: {
      double dx = size - wrap_dist(px, f.cx, c.geometry.width);
      double dy = size - wrap_dist(py, f.cy, c.geometry.height);
      return edge_cov(dx) * edge_cov(dy);
    }
    case ShapeKind::Bar: {
      double dx = 0.5 * size - wrap_dist(px, f.cx, c.geometry.width);
      return edge_cov(dx);
    }
    case ShapeKind::FlashPair:
      return 0.0;  // handled in log_intensity
  }
  throw std::logic_error("unknown shape");
}

double log_intensity(const SceneConfig& c, const FrameState& f, const Placement& pl, double px,
                     double py) {
  double intensity;
  if (c.shape == ShapeKind::FlashPair) {
    double dim = std::min(c.geometry.width, c.geometry.height);
    double ax = 0.28 * c.geometry.width, ay = 0.5 * c.geometry.height;
    double bx = 0.72 * c.geometry.width, by = 0.5 * c.geometry.height;
    double cov_a = edge_cov(0.16 * dim - std::hypot(px - ax, py - ay));
    double dbx = 0.09 * dim - std::fabs(px - bx);
    double dby = 0.09 * dim - std::fabs(py - by);
    double cov_b = edge_cov(dbx) * edge_cov(dby);
    intensity = 0.02 + 0.98 * (cov_a * f.gate_a + cov_b * f.gate_b);
  } else {
    intensity = 0.1 + 0.9 * shape_coverage(c, f, pl.size, px, py);
  }
  return std::log(std::max(intensity, kIntensityFloor));
}

FrameState frame_state(const SceneConfig& c, const Placement& pl, double t_s,
                       double duration_s) {
  FrameState f;
  f.cx = pl.cx;
  f.cy = pl.cy;
  switch (c.motion) {
    case MotionKind::StaticJitter: {
      constexpr double kAmp = 0.6, kHz = 3.0;
      f.cx += kAmp * std::sin(2.0 * M_PI * kHz * t_s + pl.jitter_phase_x);
      f.cy += kAmp * std::sin(2.0 * M_PI * kHz * t_s + pl.jitter_phase_y);
      break;
    }
    case MotionKind::Translate:
      f.cx = std::fmod(pl.cx + c.velocity_x * t_s, (double)c.geometry.width);
      f.cy = std::fmod(pl.cy + c.velocity_y * t_s, (double)c.geometry.height);
      if (f.cx < 0) f.cx += c.geometry.width;
      if (f.cy < 0) f.cy += c.geometry.height;
      break;
    case MotionKind::TemporalOrder: {
      double u = c.flash_cycles * t_s / duration_s + pl.phase;
      u -= std::floor(u);
      auto lit = [&](double start) {
        double v = u - start;
        v -= std::floor(v);
        return v < kFlashDuty;
      };
      bool first_on = lit(0.0), second_on = lit(kFlashLag);
      bool a_first = c.order == FlashOrder::AThenB;
      f.gate_a = (a_first ? first_on : second_on) ? 1.0 : 0.0;
      f.gate_b = (a_first ? second_on : first_on) ? 1.0 : 0.0;
      break;
    }
  }
  return f;
}

}  // namespace

std::vector<Event> threshold_crossings(const std::vector<double>& log_intensity,
                                       const std::vector<uint64_t>& times_us, uint16_t x,
                                       uint16_t y, double threshold) {
  if (threshold <= 0.0) throw std::invalid_argument("threshold must be > 0");
  if (log_intensity.size() != times_us.size())
    throw std::invalid_argument("log_intensity/times size mismatch");
  std::vector<Event> out;
  if (log_intensity.empty()) return out;
  double ref = log_intensity[0];
  for (size_t i = 1; i < log_intensity.size(); ++i) {
    while (log_intensity[i] - ref >= threshold) {
      ref += threshold;
      out.push_back(Event{x, y, times_us[i], +1});
    }
    while (ref - log_intensity[i] >= threshold) {
      ref -= threshold;
      out.push_back(Event{x, y, times_us[i], -1});
    }
  }
  return out;
}

EventSample render_events(const SceneConfig& config) {
  if (config.threshold <= 0.0) throw std::invalid_argument("threshold must be > 0");
  if (config.duration_us == 0) throw std::invalid_argument("duration must be > 0");
  if (config.flash_cycles <= 0.0) throw std::invalid_argument("flash_cycles must be > 0");
  if (config.noise_rate < 0.0) throw std::invalid_argument("noise_rate must be >= 0");
  if (config.geometry.width < 1 || config.geometry.height < 1)
    throw std::invalid_argument("sensor geometry must be at least 1x1");

  double duration_s = config.duration_us * 1e-6;
  auto frames = (size_t)std::floor(duration_s * config.frame_rate_hz) + 1;
  if (frames < 2) throw std::invalid_argument("frame_rate yields fewer than 2 virtual frames");

  std::mt19937_64 rng(config.seed);
  Placement pl = draw_placement(config, rng);

  std::vector<uint64_t> times(frames);
  std::vector<double> times_s(frames);
  std::vector<FrameState> states(frames);
  for (size_t k = 0; k < frames; ++k) {
    times[k] = (uint64_t)std::llround(k * 1e6 / config.frame_rate_hz);
    times_s[k] = times[k] * 1e-6;
    states[k] = frame_state(config, pl, times_s[k], duration_s);
  }

  EventSample sample;
  sample.geometry = config.geometry;
  sample.sample_id = "synth_" + std::to_string(config.seed);

  std::vector<double> curve(frames);
  for (uint16_t y = 0; y < config.geometry.height; ++y) {
    for (uint16_t x = 0; x < config.geometry.width; ++x) {
      for (size_t k = 0; k < frames; ++k)
        curve[k] = log_intensity(config, states[k], pl, x, y);
      auto ev = threshold_crossings(curve, times, x, y, config.threshold);
      sample.events.insert(sample.events.end(), ev.begin(), ev.end());
    }
  }

  if (config.noise_rate > 0.0) {
    double mean = config.noise_rate * config.geometry.width * config.geometry.height * duration_s;
    std::poisson_distribution<uint64_t> count_dist(mean);
    std::uniform_int_distribution<uint64_t> time_dist(0, config.duration_us);
    std::uniform_int_distribution<int> pix_x(0, config.geometry.width - 1);
    std::uniform_int_distribution<int> pix_y(0, config.geometry.height - 1);
    std::uniform_int_distribution<int> pol(0, 1);
    uint64_t n = count_dist(rng);
    for (uint64_t i = 0; i < n; ++i) {
      Event e;
      e.x = (uint16_t)pix_x(rng);
      e.y = (uint16_t)pix_y(rng);
      e.t = time_dist(rng);
      e.p = pol(rng) ? 1 : -1;
      sample.events.push_back(e);
    }
  }

  if (sample.events.empty()) throw std::runtime_error("no events generated: scene is static");
  std::stable_sort(sample.events.begin(), sample.events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
  validate_sample(sample);
  return sample;
}

void TaskSpec::validate() const {
  if (class_templates.size() < 2) throw std::invalid_argument("task needs >= 2 classes");
  if (samples_per_class < 1) throw std::invalid_argument("samples_per_class must be >= 1");
  double sum = train_frac + val_frac + test_frac;
  if (train_frac <= 0 || val_frac <= 0 || test_frac <= 0 || std::fabs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("split fractions must be positive and sum to 1");
  double min_frac = std::min({train_frac, val_frac, test_frac});
  if (samples_per_class * min_frac < 1.0)
    throw std::invalid_argument("samples_per_class too small for the split fractions");
}

TaskSpec make_task(const std::string& task_name, SensorGeometry geometry, int samples_per_class,
                   double train_frac, double val_frac, double test_frac, double noise_rate,
                   uint64_t duration_us) {
  TaskSpec spec;
  spec.name = task_name;
  spec.samples_per_class = samples_per_class;
  spec.train_frac = train_frac;
  spec.val_frac = val_frac;
  spec.test_frac = test_frac;

  SceneConfig base;
  base.geometry = geometry;
  base.duration_us = duration_us;
  base.noise_rate = noise_rate;
  double dim = std::min(geometry.width, geometry.height);

  if (task_name == "static-shapes") {
    base.motion = MotionKind::StaticJitter;
    base.size = 0.2 * dim;
    for (ShapeKind s : {ShapeKind::Disc, ShapeKind::Square, ShapeKind::Bar}) {
      base.shape = s;
      spec.class_templates.push_back(base);
    }
  } else if (task_name == "direction") {
    base.shape = ShapeKind::Square;
    base.motion = MotionKind::Translate;
    base.size = 0.11 * dim;
    base.velocity_x = 0.55 * geometry.width;
    base.velocity_y = 0.0;
    spec.class_templates.push_back(base);
    base.velocity_x = 0.0;
    base.velocity_y = 0.55 * geometry.height;
    spec.class_templates.push_back(base);
  } else if (task_name == "temporal-order") {
    base.shape = ShapeKind::FlashPair;
    base.motion = MotionKind::TemporalOrder;
    base.phase = -1.0;        // random cyclic phase per sample
    base.flash_cycles = 3.0;  // repetitions give a sequence model more evidence
    base.order = FlashOrder::AThenB;
    spec.class_templates.push_back(base);
    base.order = FlashOrder::BThenA;
    spec.class_templates.push_back(base);
  } else {
    throw std::invalid_argument("unknown task '" + task_name +
                                "' (expected static-shapes, direction, temporal-order)");
  }
  spec.validate();
  return spec;
}

Dataset make_dataset(const TaskSpec& spec, uint64_t master_seed) {
  spec.validate();
  std::mt19937_64 master(master_seed);
  int n_train = (int)std::llround(spec.samples_per_class * spec.train_frac);
  int n_val = (int)std::llround(spec.samples_per_class * spec.val_frac);
  int n_test = spec.samples_per_class - n_train - n_val;
  if (n_train < 1 || n_val < 1 || n_test < 1)
    throw std::invalid_argument("split fractions leave an empty split");

  Dataset ds;
  for (size_t c = 0; c < spec.class_templates.size(); ++c) {
    for (int i = 0; i < spec.samples_per_class; ++i) {
      SceneConfig cfg = spec.class_templates[c];
      cfg.seed = master();
      EventSample s = render_events(cfg);
      s.label = (int32_t)c;
      s.sample_id = spec.name + "_c" + std::to_string(c) + "_" + std::to_string(i);
      if (i < n_train)
        ds.train.push_back(std::move(s));
      else if (i < n_train + n_val)
        ds.val.push_back(std::move(s));
      else
        ds.test.push_back(std::move(s));
    }
  }
  return ds;
}

std::string write_dataset(const Dataset& dataset, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::string manifest_path = (fs::path(out_dir) / "manifest.txt").string();
  std::ofstream manifest(manifest_path);
  if (!manifest) throw std::runtime_error("cannot write manifest: " + manifest_path);

  auto write_split = [&](const std::vector<EventSample>& samples, const char* split) {
    fs::create_directories(fs::path(out_dir) / split);
    for (const auto& s : samples) {
      std::string rel = std::string(split) + "/" + s.sample_id + ".evt";
      save_events(s, (fs::path(out_dir) / rel).string(), EventFormat::CanonicalBinary);
      manifest << rel << ' ' << s.label << ' ' << split << '\n';
    }
  };
  write_split(dataset.train, "train");
  write_split(dataset.val, "val");
  write_split(dataset.test, "test");
  manifest.close();
  if (!manifest) throw std::runtime_error("manifest write failed: " + manifest_path);
  return manifest_path;
}

std::vector<ManifestEntry> read_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open manifest: " + manifest_path);
  std::vector<ManifestEntry> entries;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    ManifestEntry e;
    if (!(ls >> e.path >> e.label >> e.split))
      throw std::runtime_error("malformed manifest line " + std::to_string(line_no) + " in " +
                               manifest_path);
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<EventSample> load_split(const std::string& manifest_path, const std::string& split) {
  namespace fs = std::filesystem;
  fs::path base = fs::path(manifest_path).parent_path();
  std::vector<EventSample> samples;
  for (const auto& e : read_manifest(manifest_path)) {
    if (!split.empty() && e.split != split) continue;
    EventSample s = load_events((base / e.path).string(), EventFormat::CanonicalBinary);
    s.label = e.label;
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace aetnet::synth

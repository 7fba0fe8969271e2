#pragma once

// Event-camera simulator. Scenes are rendered as per-pixel log-intensity
// curves sampled at a virtual frame rate; a pixel emits an event each time
// the log intensity drifts a full threshold away from its per-pixel
// reference level, which then steps toward the new level. Spurious noise
// events are drawn as a homogeneous random process. Rendering is pure given
// (config, seed).

#include <cstdint>
#include <string>
#include <vector>

#include "aetnet/events.hpp"

namespace aetnet::synth {

enum class ShapeKind { Disc, Square, Bar, FlashPair };
enum class MotionKind { StaticJitter, Translate, TemporalOrder };
enum class FlashOrder { AThenB, BThenA };

struct SceneConfig {
  SensorGeometry geometry{32, 32};
  uint64_t duration_us = 1'000'000;
  double frame_rate_hz = 1000.0;  // virtual frames per second
  ShapeKind shape = ShapeKind::Disc;
  MotionKind motion = MotionKind::StaticJitter;

  // Translate motion, pixels per second; positions wrap around the sensor.
  double velocity_x = 0.0;
  double velocity_y = 0.0;

  // TemporalOrder motion: which lamp of the flash pair lights first, the
  // cyclic phase of the two-flash schedule in [0,1), and how many schedule
  // cycles the recording spans. phase < 0 draws the phase uniformly from the
  // sample seed.
  FlashOrder order = FlashOrder::AThenB;
  double phase = -1.0;
  double flash_cycles = 1.0;

  double threshold = 0.25;  // log-intensity units, > 0
  double noise_rate = 0.0;  // spurious events per pixel per second
  uint64_t seed = 0;

  // Placement; negative values are drawn from the seed.
  double center_x = -1.0;
  double center_y = -1.0;
  double size = -1.0;  // disc radius / square half-side / bar half-width
};

struct TaskSpec {
  std::string name;
  std::vector<SceneConfig> class_templates;  // one per class, >= 2
  int samples_per_class = 0;
  double train_frac = 0.6;
  double val_frac = 0.2;
  double test_frac = 0.2;

  void validate() const;
};

struct Dataset {
  std::vector<EventSample> train, val, test;
};

// Threshold-crossing core: given one pixel's log-intensity values at
// successive virtual-frame times, returns the emitted events. Exposed so the
// crossing count can be checked analytically (a monotone change of delta
// emits exactly floor(|delta| / threshold) events of one polarity).
std::vector<Event> threshold_crossings(const std::vector<double>& log_intensity,
                                       const std::vector<uint64_t>& times_us, uint16_t x,
                                       uint16_t y, double threshold);

// Renders one labeled recording. Throws if the scene produces no events.
EventSample render_events(const SceneConfig& config);

// Built-in task generators; geometry and noise apply to every class template.
TaskSpec make_task(const std::string& task_name, SensorGeometry geometry, int samples_per_class,
                   double train_frac, double val_frac, double test_frac, double noise_rate,
                   uint64_t duration_us = 1'000'000);

// Renders the full dataset: class-balanced splits, one derived seed per
// sample, deterministic given (spec, master_seed).
Dataset make_dataset(const TaskSpec& spec, uint64_t master_seed);

// Writes samples as canonical-binary files under out_dir/{train,val,test}/
// plus a manifest (one line per sample: relative path, label, split).
// Returns the manifest path.
std::string write_dataset(const Dataset& dataset, const std::string& out_dir);

struct ManifestEntry {
  std::string path;  // resolved relative to the manifest location
  int32_t label = kUnlabeled;
  std::string split;
};

std::vector<ManifestEntry> read_manifest(const std::string& manifest_path);

// Loads every sample of one split ("train"/"val"/"test"); empty split name
// loads everything.
std::vector<EventSample> load_split(const std::string& manifest_path, const std::string& split);

}  // namespace aetnet::synth

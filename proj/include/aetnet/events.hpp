#pragma once

// Canonical event-camera data types, file I/O and sliding-window slicing.
//
// An event stream is a time-ordered list of (x, y, t, p) records: pixel
// coordinates, a microsecond timestamp and a +/-1 polarity. Samples are
// immutable after construction and safe to share across threads.

#include <cstdint>
#include <string>
#include <vector>

namespace aetnet {

struct SensorGeometry {
  uint16_t width = 0;
  uint16_t height = 0;

  bool operator==(const SensorGeometry&) const = default;
};

struct Event {
  uint16_t x = 0;
  uint16_t y = 0;
  uint64_t t = 0;  // microseconds
  int8_t p = 1;    // -1 or +1

  bool operator==(const Event&) const = default;
};

inline constexpr int32_t kUnlabeled = -1;

struct EventSample {
  std::vector<Event> events;  // non-decreasing t
  SensorGeometry geometry;
  int32_t label = kUnlabeled;
  std::string sample_id;

  // First/last timestamp; throws if the sample is empty.
  uint64_t t_min() const;
  uint64_t t_max() const;
};

enum class EventFormat { CanonicalBinary, Csv };

// Throws std::invalid_argument naming the first offending event index when a
// coordinate falls outside the geometry, a polarity is not +/-1, or the
// timestamps are not sorted.
void validate_sample(const EventSample& sample);

// Loads a sample from disk. CanonicalBinary files carry their own geometry
// and label; CSV files do not, so `csv_geometry` / `csv_label` supply them.
// Events are stably re-sorted by timestamp after parsing. Parse failures
// report the byte offset (binary) or line number (CSV).
EventSample load_events(const std::string& path, EventFormat format,
                        SensorGeometry csv_geometry = {}, int32_t csv_label = kUnlabeled);

void save_events(const EventSample& sample, const std::string& path, EventFormat format);

// Cuts the sample into overlapping windows [t_min + k*step, t_min + k*step + window)
// for k = 0, 1, ... while the window start does not exceed t_max. Windows that
// contain no events are dropped. Each slice inherits geometry and label.
std::vector<EventSample> window_slice(const EventSample& sample, uint64_t window_us,
                                      uint64_t step_us);

}  // namespace aetnet

#include "aetnet/events.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "aetnet/io_util.hpp"

namespace aetnet {

namespace {

constexpr char kEventMagic[4] = {'E', 'V', 'T', '1'};
constexpr uint32_t kUnlabeledWire = 0xffffffffu;

std::string stem_of(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

// Strict unsigned/signed integer parse of a whole field; '+' prefix allowed.
template <typename T>
bool parse_int(std::string_view field, T& out) {
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  if (field.empty()) return false;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  return ec == std::errc() && ptr == field.data() + field.size();
}

EventSample load_binary(const std::string& path) {
  io::Reader r(path);
  r.expect_magic(kEventMagic, "EVT1 event");
  EventSample s;
  s.geometry.width = r.u16();
  s.geometry.height = r.u16();
  if (s.geometry.width == 0 || s.geometry.height == 0) r.fail("geometry must be at least 1x1");
  uint32_t label = r.u32();
  s.label = (label == kUnlabeledWire) ? kUnlabeled : static_cast<int32_t>(label);
  uint64_t count = r.u64();
  s.events.reserve(count < (1ull << 24) ? count : 0);
  for (uint64_t i = 0; i < count; ++i) {
    Event e;
    e.x = r.u16();
    e.y = r.u16();
    e.t = r.u64();
    e.p = r.i8();
    if (e.p != 1 && e.p != -1) r.fail("event " + std::to_string(i) + ": polarity must be -1 or +1");
    s.events.push_back(e);
  }
  if (!r.at_end()) r.fail("trailing bytes after last event");
  s.sample_id = stem_of(path);
  return s;
}

EventSample load_csv(const std::string& path, SensorGeometry geometry, int32_t label) {
  if (geometry.width == 0 || geometry.height == 0) {
    throw std::invalid_argument(path + ": CSV loading requires a sensor geometry");
  }
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open file for reading");

  auto fail = [&](size_t line_no, const std::string& msg) -> void {
    throw std::runtime_error(path + ": csv parse error at line " + std::to_string(line_no) + ": " + msg);
  };

  std::string line;
  size_t line_no = 0;
  if (!std::getline(in, line)) fail(1, "missing header");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "x,y,t,p") fail(line_no, "expected header 'x,y,t,p'");

  EventSample s;
  s.geometry = geometry;
  s.label = label;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string_view rest(line);
    std::string_view field[4];
    for (int f = 0; f < 4; ++f) {
      size_t comma = rest.find(',');
      if (f < 3) {
        if (comma == std::string_view::npos) fail(line_no, "expected 4 comma-separated fields");
        field[f] = rest.substr(0, comma);
        rest.remove_prefix(comma + 1);
      } else {
        if (comma != std::string_view::npos) fail(line_no, "expected 4 comma-separated fields");
        field[f] = rest;
      }
    }
    Event e;
    int64_t pol = 0;
    if (!parse_int(field[0], e.x)) fail(line_no, "bad x value '" + std::string(field[0]) + "'");
    if (!parse_int(field[1], e.y)) fail(line_no, "bad y value '" + std::string(field[1]) + "'");
    if (!parse_int(field[2], e.t)) fail(line_no, "bad t value '" + std::string(field[2]) + "'");
    if (!parse_int(field[3], pol) || (pol != 1 && pol != -1)) {
      fail(line_no, "polarity must be -1 or +1, got '" + std::string(field[3]) + "'");
    }
    e.p = static_cast<int8_t>(pol);
    s.events.push_back(e);
  }
  s.sample_id = stem_of(path);
  return s;
}

}  // namespace

uint64_t EventSample::t_min() const {
  if (events.empty()) throw std::logic_error("t_min on empty sample");
  return events.front().t;
}

uint64_t EventSample::t_max() const {
  if (events.empty()) throw std::logic_error("t_max on empty sample");
  return events.back().t;
}

void validate_sample(const EventSample& sample) {
  if (sample.geometry.width == 0 || sample.geometry.height == 0) {
    throw std::invalid_argument("sample '" + sample.sample_id + "': geometry must be at least 1x1");
  }
  uint64_t prev_t = 0;
  for (size_t i = 0; i < sample.events.size(); ++i) {
    const Event& e = sample.events[i];
    if (e.x >= sample.geometry.width || e.y >= sample.geometry.height) {
      throw std::invalid_argument("sample '" + sample.sample_id + "': event " + std::to_string(i) +
                                  " at (" + std::to_string(e.x) + "," + std::to_string(e.y) +
                                  ") outside " + std::to_string(sample.geometry.width) + "x" +
                                  std::to_string(sample.geometry.height) + " sensor");
    }
    if (e.p != 1 && e.p != -1) {
      throw std::invalid_argument("sample '" + sample.sample_id + "': event " + std::to_string(i) +
                                  " has polarity " + std::to_string(int(e.p)));
    }
    if (i > 0 && e.t < prev_t) {
      throw std::invalid_argument("sample '" + sample.sample_id + "': event " + std::to_string(i) +
                                  " breaks timestamp order");
    }
    prev_t = e.t;
  }
}

EventSample load_events(const std::string& path, EventFormat format, SensorGeometry csv_geometry,
                        int32_t csv_label) {
  EventSample s = (format == EventFormat::CanonicalBinary) ? load_binary(path)
                                                           : load_csv(path, csv_geometry, csv_label);
  // Stable: events with equal timestamps keep file order.
  std::stable_sort(s.events.begin(), s.events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
  validate_sample(s);
  return s;
}

void save_events(const EventSample& sample, const std::string& path, EventFormat format) {
  validate_sample(sample);
  if (format == EventFormat::CanonicalBinary) {
    io::Writer w(path);
    w.bytes(kEventMagic, 4);
    w.u16(sample.geometry.width);
    w.u16(sample.geometry.height);
    w.u32(sample.label == kUnlabeled ? kUnlabeledWire : static_cast<uint32_t>(sample.label));
    w.u64(sample.events.size());
    for (const Event& e : sample.events) {
      w.u16(e.x);
      w.u16(e.y);
      w.u64(e.t);
      w.i8(e.p);
    }
    w.close();
  } else {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error(path + ": cannot open file for writing");
    out << "x,y,t,p\n";
    for (const Event& e : sample.events) {
      out << e.x << ',' << e.y << ',' << e.t << ',' << int(e.p) << '\n';
    }
    out.flush();
    if (!out) throw std::runtime_error(path + ": write failed");
  }
}

std::vector<EventSample> window_slice(const EventSample& sample, uint64_t window_us,
                                      uint64_t step_us) {
  if (window_us == 0) throw std::invalid_argument("window_slice: window_us must be positive");
  if (step_us == 0) throw std::invalid_argument("window_slice: step_us must be positive");
  std::vector<EventSample> out;
  if (sample.events.empty()) return out;

  const uint64_t t0 = sample.t_min();
  const uint64_t t_last = sample.t_max();
  for (uint64_t k = 0;; ++k) {
    const uint64_t lo = t0 + k * step_us;
    if (lo > t_last || lo < t0) break;  // second clause guards u64 wrap
    uint64_t hi = lo + window_us;
    if (hi < lo) hi = UINT64_MAX;  // saturate
    auto first = std::lower_bound(sample.events.begin(), sample.events.end(), lo,
                                  [](const Event& e, uint64_t t) { return e.t < t; });
    auto last = std::lower_bound(first, sample.events.end(), hi,
                                 [](const Event& e, uint64_t t) { return e.t < t; });
    if (first == last) continue;
    EventSample win;
    win.events.assign(first, last);
    win.geometry = sample.geometry;
    win.label = sample.label;
    win.sample_id = sample.sample_id + "_w" + std::to_string(k);
    out.push_back(std::move(win));
  }
  return out;
}

}  // namespace aetnet

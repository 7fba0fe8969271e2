#include "aetnet/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace aetnet {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

std::string join_ints(const std::vector<int>& v) {
  std::ostringstream out;
  for (size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i];
  return out.str();
}

std::string encoder_fingerprint(const EncoderConfig& cfg, SensorGeometry geometry) {
  std::ostringstream out;
  std::vector<int> groups, channels;
  channels.push_back(cfg.stages.empty() ? 1 : cfg.stages.front().in_channels);
  for (const ConvStage& s : cfg.stages) {
    groups.push_back(s.group_size);
    channels.push_back(s.out_channels);
  }
  out << "mode=" << encode_mode_name(cfg.mode) << " mhat=" << cfg.m_hat
      << " groups=" << join_ints(groups) << " channels=" << join_ints(channels)
      << " kernel=" << (cfg.stages.empty() ? 0 : cfg.stages.front().kernel) << " geometry="
      << geometry.width << "x" << geometry.height;
  return out.str();
}

double percentile_nearest_rank(const std::vector<double>& sorted, double q) {
  size_t rank = (size_t)std::ceil(q * (double)sorted.size());
  rank = std::min(std::max<size_t>(rank, 1), sorted.size());
  return sorted[rank - 1];
}

EventSample uniform_sample(uint64_t num_events, SensorGeometry geometry, uint64_t seed) {
  EventSample s;
  s.geometry = geometry;
  s.sample_id = "scaling-" + std::to_string(num_events);
  s.events.reserve(num_events);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dx(0, geometry.width - 1), dy(0, geometry.height - 1);
  for (uint64_t i = 0; i < num_events; ++i)
    s.events.push_back({(uint16_t)dx(rng), (uint16_t)dy(rng), 5 * i, i % 2 ? int8_t(-1) : int8_t(1)});
  return s;
}

}  // namespace

BenchStage parse_bench_stage(const std::string& name) {
  if (name == "encode-only") return BenchStage::EncodeOnly;
  if (name == "full") return BenchStage::Full;
  throw std::invalid_argument("unknown bench stage '" + name + "' (expected encode-only or full)");
}

std::string bench_stage_name(BenchStage stage) {
  return stage == BenchStage::EncodeOnly ? "encode-only" : "full";
}

BenchReport bench_pipeline(const std::vector<EventSample>& samples, const EfnModel<float>* model,
                           const EncoderConfig& cfg, BenchStage stage) {
  if ((int)samples.size() < 10)
    throw std::invalid_argument("bench needs at least 10 samples, got " +
                                std::to_string(samples.size()));
  if (stage == BenchStage::Full && model == nullptr)
    throw std::invalid_argument("full-pipeline bench needs a model");

  const EncoderConfig& enc = stage == BenchStage::Full ? model->encoder_config() : cfg;
  BenchReport report;
  report.stage = bench_stage_name(stage);
  report.fingerprint = "stage=" + report.stage + " " +
                       encoder_fingerprint(enc, samples.front().geometry);
  if (stage == BenchStage::Full)
    report.fingerprint += " frames=" + std::to_string(model->config().num_frames) +
                          " classes=" + std::to_string(model->config().num_classes);

  std::vector<double> latencies;
  latencies.reserve(samples.size() - kBenchWarmups);
  for (size_t i = 0; i < samples.size(); ++i) {
    auto t0 = Clock::now();
    if (stage == BenchStage::EncodeOnly) {
      volatile float sink = encode(samples[i], cfg).values.front();
      (void)sink;
    } else {
      volatile int sink = argmax_class(predict(*model, samples[i]).logits.back());
      (void)sink;
    }
    auto t1 = Clock::now();
    if ((int)i < kBenchWarmups) continue;
    latencies.push_back(elapsed_ms(t0, t1));
    report.total_events += samples[i].events.size();
  }

  report.sample_count = (int)latencies.size();
  for (double ms : latencies) report.total_ms += ms;
  report.mean_ms = report.total_ms / report.sample_count;
  std::vector<double> sorted = latencies;
  std::sort(sorted.begin(), sorted.end());
  size_t n = sorted.size();
  report.median_ms = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  report.p95_ms = percentile_nearest_rank(sorted, 0.95);
  double total_s = report.total_ms / 1000.0;
  report.kev_per_s = (double)report.total_events / total_s / 1000.0;
  return report;
}

std::vector<ScalingRow> scaling_check(const std::vector<uint64_t>& event_counts,
                                      const EncoderConfig& cfg, SensorGeometry geometry,
                                      int repeats) {
  if (event_counts.empty()) throw std::invalid_argument("scaling check needs event counts");
  if (repeats < 1) throw std::invalid_argument("scaling check needs at least 1 repeat");
  for (size_t i = 0; i < event_counts.size(); ++i) {
    if (event_counts[i] == 0) throw std::invalid_argument("event counts must be positive");
    if (i > 0 && event_counts[i] <= event_counts[i - 1])
      throw std::invalid_argument("event counts must be strictly increasing");
  }

  std::vector<ScalingRow> rows;
  for (uint64_t n : event_counts) {
    EventSample sample = uniform_sample(n, geometry, 0xb0a710adULL + n);
    ScalingRow row;
    row.num_events = n;
    std::vector<double> times;
    for (int r = 0; r <= repeats; ++r) {
      auto t0 = Clock::now();
      volatile float sink = encode(sample, cfg).values.front();
      (void)sink;
      auto t1 = Clock::now();
      if (r == 0) continue;  // warm-up
      times.push_back(elapsed_ms(t0, t1));
    }
    double mean = 0.0;
    for (double t : times) mean += t;
    mean /= times.size();
    double var = 0.0;
    for (double t : times) var += (t - mean) * (t - mean);
    var /= times.size();
    row.mean_ms = mean;
    row.cv = mean > 0.0 ? std::sqrt(var) / mean : 0.0;
    rows.push_back(row);
  }
  return rows;
}

double parallel_encode_wall_ms(const std::vector<EventSample>& samples, const EncoderConfig& cfg,
                               int workers) {
  if (samples.empty()) throw std::invalid_argument("parallel bench needs samples");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  auto t0 = Clock::now();
  std::atomic<size_t> next{0};
  auto body = [&] {
    for (size_t i = next.fetch_add(1); i < samples.size(); i = next.fetch_add(1)) {
      volatile float sink = encode(samples[i], cfg).values.front();
      (void)sink;
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  for (std::thread& t : pool) t.join();
  return elapsed_ms(t0, Clock::now());
}

std::string format_bench_report(const BenchReport& report) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  out << report.fingerprint << "\n";
  out << std::setw(14) << "samples" << std::setw(14) << "events" << std::setw(14) << "mean ms"
      << std::setw(14) << "median ms" << std::setw(14) << "p95 ms" << std::setw(14) << "kEv/s"
      << "\n";
  out << std::setw(14) << report.sample_count << std::setw(14) << report.total_events
      << std::setw(14) << report.mean_ms << std::setw(14) << report.median_ms << std::setw(14)
      << report.p95_ms << std::setw(14) << std::setprecision(2) << report.kev_per_s << "\n";
  out << "reference: original GPU implementation reports 3.18 ms/sample at 1194.20 kEv/s "
         "(context only, not a CPU target)\n";
  return out.str();
}

std::string format_scaling_table(const std::vector<ScalingRow>& rows) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  out << std::setw(14) << "events" << std::setw(14) << "mean ms" << std::setw(14) << "cv"
      << "\n";
  for (const ScalingRow& row : rows)
    out << std::setw(14) << row.num_events << std::setw(14) << row.mean_ms << std::setw(14)
        << row.cv << "\n";
  return out.str();
}

std::string bench_summary(const BenchReport& report) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(6);
  out << "stage=" << report.stage << "\n";
  out << "samples=" << report.sample_count << "\n";
  out << "total_events=" << report.total_events << "\n";
  out << "total_ms=" << report.total_ms << "\n";
  out << "mean_ms=" << report.mean_ms << "\n";
  out << "median_ms=" << report.median_ms << "\n";
  out << "p95_ms=" << report.p95_ms << "\n";
  out << "kev_per_s=" << report.kev_per_s << "\n";
  out << "fingerprint=" << report.fingerprint << "\n";
  return out.str();
}

}  // namespace aetnet

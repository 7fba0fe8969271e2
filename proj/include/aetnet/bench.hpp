#pragma once

// Latency and throughput measurement for the encoding pipeline and the full
// classifier. Samples are preloaded so measurement never touches disk; the
// loop runs one sample at a time on a single thread, and the first runs are
// warm-ups excluded from the statistics.

#include <cstdint>
#include <string>
#include <vector>

#include "aetnet/efn.hpp"
#include "aetnet/encoder.hpp"
#include "aetnet/events.hpp"

namespace aetnet {

enum class BenchStage { EncodeOnly, Full };

// Throws std::invalid_argument for anything but "encode-only" / "full".
BenchStage parse_bench_stage(const std::string& name);
std::string bench_stage_name(BenchStage stage);

// Leading runs timed but dropped from the report.
inline constexpr int kBenchWarmups = 3;

struct BenchReport {
  std::string fingerprint;  // one-line configuration summary
  std::string stage;
  int sample_count = 0;      // measured runs (warm-ups excluded)
  uint64_t total_events = 0;  // events in the measured runs
  double total_ms = 0.0;
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double p95_ms = 0.0;        // nearest-rank 95th percentile
  double kev_per_s = 0.0;     // total events / total seconds / 1000
};

// Times per-sample work over `samples` in order: encoding alone
// (EncodeOnly; `model` may be null) or encoding plus the classifier forward
// pass (Full; `model` required, its own encoder configuration applies).
// Requires at least 10 samples so statistics survive the warm-ups.
BenchReport bench_pipeline(const std::vector<EventSample>& samples, const EfnModel<float>* model,
                           const EncoderConfig& cfg, BenchStage stage);

struct ScalingRow {
  uint64_t num_events = 0;
  double mean_ms = 0.0;
  double cv = 0.0;  // stddev / mean across the repeats
};

// Encode-only time versus event count. For each count a synthetic sample
// with that many uniformly spread events is encoded `repeats` times (plus
// one warm-up); counts must be positive and strictly increasing.
std::vector<ScalingRow> scaling_check(const std::vector<uint64_t>& event_counts,
                                      const EncoderConfig& cfg, SensorGeometry geometry,
                                      int repeats = 5);

// Aggregate wall-clock throughput of encoding every sample across a worker
// pool. Informational only: per-sample latency statistics come from the
// single-threaded bench_pipeline contract.
double parallel_encode_wall_ms(const std::vector<EventSample>& samples, const EncoderConfig& cfg,
                               int workers);

// Aligned human-readable table, including the published GPU reference point
// (3.18 ms/sample, 1194.20 kEv/s) as context only — it is not a CPU target.
std::string format_bench_report(const BenchReport& report);
std::string format_scaling_table(const std::vector<ScalingRow>& rows);
// key=value lines for machine consumption.
std::string bench_summary(const BenchReport& report);

}  // namespace aetnet

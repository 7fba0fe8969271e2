// Command-line front end: dataset generation, event encoding, training,
// evaluation, benchmarking and tensor visualization.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "aetnet/bench.hpp"
#include "aetnet/efn.hpp"
#include "aetnet/encoder.hpp"
#include "aetnet/events.hpp"
#include "aetnet/synth.hpp"

namespace fs = std::filesystem;
using namespace aetnet;

namespace {

SensorGeometry parse_geometry(const std::string& text) {
  size_t sep = text.find('x');
  try {
    if (sep != std::string::npos) {
      int w = std::stoi(text.substr(0, sep));
      int h = std::stoi(text.substr(sep + 1));
      if (w >= 1 && w <= 0xffff && h >= 1 && h <= 0xffff)
        return SensorGeometry{(uint16_t)w, (uint16_t)h};
    }
  } catch (const std::exception&) {
  }
  throw std::invalid_argument("bad geometry '" + text + "' (expected WIDTHxHEIGHT, e.g. 32x32)");
}

template <typename F>
void run_parallel(size_t n, int workers, F&& f) {
  workers = std::max(1, workers);
  if (workers == 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mutex;
  auto body = [&] {
    for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!err) err = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  for (std::thread& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

// --- shared flag groups -----------------------------------------------------

struct EncoderFlags {
  int mhat = 100;
  std::vector<int> groups = {2, 5};
  std::vector<int> channels;  // input first; empty derives input,4,...,3
  int kernel = 5;
  std::string mode = "aet";
  std::string weights;  // EFNW checkpoint supplying a trained encoder
};

void add_encoder_flags(CLI::App* cmd, EncoderFlags& f, bool with_weights) {
  cmd->add_option("--mhat", f.mhat, "quantization bin count")->capture_default_str();
  cmd->add_option("--groups", f.groups, "frame group size per compression stage")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--channels", f.channels,
                  "channel chain, input first (default: input,4,...,3)")
      ->delimiter(',');
  cmd->add_option("--kernel", f.kernel, "stage kernel size (odd)")->capture_default_str();
  cmd->add_option("--mode", f.mode, "aet|spike|spike-accum|avg|quantize-only")
      ->capture_default_str();
  if (with_weights)
    cmd->add_option("--weights", f.weights,
                    "EFNW checkpoint whose trained encoder replaces the flag-built one");
}

EncoderConfig build_encoder(const EncoderFlags& f, uint64_t seed) {
  if (!f.weights.empty()) return load_efn(f.weights).model.trained_encoder();
  EncodeMode mode = parse_encode_mode(f.mode);
  std::vector<int> channels = f.channels;
  if (channels.empty()) {
    channels.push_back(mode == EncodeMode::SpikeAccum ? 2 : 1);
    for (size_t i = 0; i < f.groups.size(); ++i)
      channels.push_back(i + 1 == f.groups.size() ? 3 : 4);
  }
  return make_encoder_config(f.mhat, f.groups, channels, f.kernel, mode, (uint32_t)seed);
}

struct InputFlags {
  std::string manifest;
  std::string split;  // empty = every split
  std::string input;
  std::string csv_geometry;
  int32_t csv_label = kUnlabeled;
};

void add_input_flags(CLI::App* cmd, InputFlags& f) {
  cmd->add_option("--manifest", f.manifest, "dataset manifest written by gen");
  cmd->add_option("--split", f.split, "train|val|test (default: all)");
  cmd->add_option("--input", f.input, "single event file (.csv or canonical binary)");
  cmd->add_option("--csv-geometry", f.csv_geometry, "sensor WIDTHxHEIGHT for CSV input");
  cmd->add_option("--csv-label", f.csv_label, "label for CSV input")->capture_default_str();
}

std::vector<EventSample> load_input(const InputFlags& f) {
  if (!f.manifest.empty() && !f.input.empty())
    throw std::invalid_argument("pass either --manifest or --input, not both");
  if (!f.manifest.empty()) {
    auto samples = synth::load_split(f.manifest, f.split);
    if (samples.empty()) throw std::invalid_argument("no samples in the requested split");
    return samples;
  }
  if (f.input.empty()) throw std::invalid_argument("need --manifest or --input");
  bool csv = f.input.size() >= 4 && f.input.substr(f.input.size() - 4) == ".csv";
  SensorGeometry geometry;
  if (csv) {
    if (f.csv_geometry.empty())
      throw std::invalid_argument("CSV input needs --csv-geometry WIDTHxHEIGHT");
    geometry = parse_geometry(f.csv_geometry);
  }
  return {load_events(f.input, csv ? EventFormat::Csv : EventFormat::CanonicalBinary, geometry,
                      f.csv_label)};
}

std::string sanitize_name(const std::string& id, size_t index) {
  std::string name = id;
  for (char& c : name)
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  if (name.empty()) name = "sample_" + std::to_string(index);
  return name;
}

// --- subcommand flag structs ------------------------------------------------

struct GenFlags {
  std::string task, out, geometry = "32x32";
  int per_class = 20;
  double noise_rate = 0.0, train_frac = 0.6, val_frac = 0.2, test_frac = 0.2;
  uint64_t duration_us = 1'000'000;
};

struct EncodeFlags {
  InputFlags in;
  EncoderFlags enc;
  std::string out;
  uint64_t window_us = 0, step_us = 0;
};

struct TrainFlags {
  std::string manifest, out;
  EncoderFlags enc;
  int epochs = 30;
  float lr = 1e-4f, warmup_frac = 0.1f;
  std::vector<int> widths = {16, 32, 64};
  int feature_dim = 64, k1 = 5, k2 = 3, pool = 2;
  bool shared_frame_classifier = false;
};

struct EvalFlags {
  std::string manifest, split = "test", model, mode = "synthesis", summary;
};

struct BenchFlags {
  std::string manifest, split = "test", model, stage = "encode-only", summary;
  std::string geometry = "64x64";  // for --scaling without a manifest
  EncoderFlags enc;
  std::vector<uint64_t> scaling;
  int repeats = 5;
};

struct VizFlags {
  std::string input, out;
};

// --- subcommand bodies ------------------------------------------------------

int cmd_gen(const GenFlags& f, uint64_t seed) {
  synth::TaskSpec spec = synth::make_task(f.task, parse_geometry(f.geometry), f.per_class,
                                          f.train_frac, f.val_frac, f.test_frac, f.noise_rate,
                                          f.duration_us);
  synth::Dataset dataset = synth::make_dataset(spec, seed);
  std::string manifest = synth::write_dataset(dataset, f.out);
  std::cout << "task " << f.task << ": " << dataset.train.size() << " train / "
            << dataset.val.size() << " val / " << dataset.test.size() << " test samples\n"
            << "manifest: " << manifest << "\n";
  return 0;
}

int cmd_encode(const EncodeFlags& f, uint64_t seed, int workers) {
  if (f.out.empty()) throw std::invalid_argument("encode needs --out");
  if (f.step_us > 0 && f.window_us == 0)
    throw std::invalid_argument("--step-us needs --window-us");
  auto samples = load_input(f.in);
  EncoderConfig enc = build_encoder(f.enc, seed);
  validate_encoder_config(enc);
  uint64_t step = f.step_us > 0 ? f.step_us : f.window_us;

  bool single_file = samples.size() == 1 && f.window_us == 0 && f.out.size() > 5 &&
                     f.out.substr(f.out.size() - 5) == ".aetf";
  if (single_file) {
    save_aetf(encode(samples[0], enc), f.out);
    std::cout << "wrote " << f.out << "\n";
    return 0;
  }

  fs::create_directories(f.out);
  std::vector<std::vector<EventSample>> work(samples.size());
  for (size_t i = 0; i < samples.size(); ++i)
    work[i] = f.window_us > 0 ? window_slice(samples[i], f.window_us, step)
                              : std::vector<EventSample>{samples[i]};
  std::atomic<size_t> written{0};
  run_parallel(samples.size(), workers, [&](size_t i) {
    for (const EventSample& piece : work[i]) {
      fs::path path = fs::path(f.out) / (sanitize_name(piece.sample_id, i) + ".aetf");
      save_aetf(encode(piece, enc), path.string());
      written.fetch_add(1);
    }
  });
  std::cout << "wrote " << written.load() << " tensors to " << f.out << "\n";
  return 0;
}

int cmd_train(const TrainFlags& f, uint64_t seed) {
  auto train_set = synth::load_split(f.manifest, "train");
  auto val_set = synth::load_split(f.manifest, "val");
  if (train_set.empty() || val_set.empty())
    throw std::invalid_argument("manifest needs non-empty train and val splits");

  int num_classes = 0;
  for (const auto* set : {&train_set, &val_set})
    for (const EventSample& s : *set) {
      if (s.label < 0) throw std::invalid_argument("unlabeled sample '" + s.sample_id + "'");
      num_classes = std::max(num_classes, s.label + 1);
    }

  EncoderConfig enc = build_encoder(f.enc, seed);
  EfnConfig cfg;
  cfg.num_frames = num_output_frames(enc);
  cfg.input_channels = num_output_channels(enc);
  cfg.feature_dim = f.feature_dim;
  cfg.num_classes = num_classes;
  cfg.backbone_widths = f.widths;
  cfg.k1 = f.k1;
  cfg.k2 = f.k2;
  cfg.pool_size = f.pool;
  cfg.shared_frame_classifier = f.shared_frame_classifier;

  EfnModel<float> model(cfg, enc, (uint32_t)seed);
  TrainOptions opts;
  opts.epochs = f.epochs;
  opts.base_lr = f.lr;
  opts.warmup_frac = f.warmup_frac;
  opts.seed = (uint32_t)seed;
  opts.log = &std::cout;
  TrainResult result = train(model, train_set, val_set, opts);
  save_efn(model, result.acc, f.out);
  std::cout << "best epoch " << result.best_epoch << " (val accuracy " << result.best_val_acc
            << "); checkpoint: " << f.out << "\n";
  return 0;
}

int cmd_eval(const EvalFlags& f, int workers) {
  LoadedEfn loaded = load_efn(f.model);
  auto test_set = synth::load_split(f.manifest, f.split);
  EvalReport report = evaluate(loaded.model, loaded.acc, test_set, parse_eval_mode(f.mode),
                               workers);
  std::cout << format_report(report);
  if (!f.summary.empty()) {
    write_report_summary(report, f.summary);
    std::cout << "summary: " << f.summary << "\n";
  }
  return 0;
}

int cmd_bench(const BenchFlags& f, uint64_t seed, int workers) {
  std::optional<LoadedEfn> loaded;
  if (!f.model.empty()) loaded = load_efn(f.model);
  BenchStage stage = parse_bench_stage(f.stage);
  if (stage == BenchStage::Full && !loaded)
    throw std::invalid_argument("full-pipeline bench needs --model");
  EncoderConfig enc = loaded ? loaded->model.encoder_config() : build_encoder(f.enc, seed);

  if (f.manifest.empty() && f.scaling.empty())
    throw std::invalid_argument("bench needs --manifest samples or --scaling counts");

  std::string summary_text;
  std::vector<EventSample> samples;
  if (!f.manifest.empty()) {
    samples = synth::load_split(f.manifest, f.split);
    BenchReport report =
        bench_pipeline(samples, loaded ? &loaded->model : nullptr, enc, stage);
    std::cout << format_bench_report(report);
    summary_text += bench_summary(report);
    if (workers > 1) {
      double wall = parallel_encode_wall_ms(samples, enc, workers);
      std::cout << "informational: " << workers << " workers encode all " << samples.size()
                << " samples in " << wall << " ms (excluded from the table above)\n";
    }
  }
  if (!f.scaling.empty()) {
    SensorGeometry geometry =
        samples.empty() ? parse_geometry(f.geometry) : samples.front().geometry;
    auto rows = scaling_check(f.scaling, enc, geometry, f.repeats);
    std::cout << format_scaling_table(rows);
    std::ostringstream extra;
    extra << std::fixed << std::setprecision(6);
    for (const ScalingRow& row : rows)
      extra << "scaling_" << row.num_events << "_ms=" << row.mean_ms << "\n"
            << "scaling_" << row.num_events << "_cv=" << row.cv << "\n";
    summary_text += extra.str();
  }
  if (!f.summary.empty()) {
    std::ofstream out(f.summary);
    if (!out) throw std::runtime_error("cannot write '" + f.summary + "'");
    out << summary_text;
    std::cout << "summary: " << f.summary << "\n";
  }
  return 0;
}

void write_ppm(const fs::path& path, int width, int height,
               const std::vector<unsigned char>& rgb) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "P6\n" << width << " " << height << "\n255\n";
  out.write((const char*)rgb.data(), (std::streamsize)rgb.size());
  if (!out) throw std::runtime_error("short write to '" + path.string() + "'");
}

int cmd_viz(const VizFlags& f) {
  AETensor tensor = load_aetf(f.input);
  const int C = tensor.channels, M = tensor.num_frames;
  const int W = tensor.geometry.width, H = tensor.geometry.height;
  fs::create_directories(f.out);

  for (int m = 0; m < M; ++m) {
    // Reduce C channels to RGB: replicate when C <= 3, otherwise average
    // three contiguous channel groups (first groups take the remainder).
    std::vector<float> planes(3 * (size_t)H * W, 0.0f);
    int base = C / 3, rem = C % 3, begin = 0;
    for (int j = 0; j < 3; ++j) {
      float* plane = planes.data() + (size_t)j * H * W;
      if (C <= 3) {
        int c = j % C;
        for (int y = 0; y < H; ++y)
          for (int x = 0; x < W; ++x) plane[(size_t)y * W + x] = tensor.at(c, m, y, x);
      } else {
        int count = base + (j < rem ? 1 : 0);
        for (int c = begin; c < begin + count; ++c)
          for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) plane[(size_t)y * W + x] += tensor.at(c, m, y, x) / count;
        begin += count;
      }
    }
    auto [lo_it, hi_it] = std::minmax_element(planes.begin(), planes.end());
    float lo = *lo_it, span = *hi_it - *lo_it;  // constant frame renders black
    std::vector<unsigned char> rgb(3 * (size_t)H * W);
    for (size_t i = 0; i < (size_t)H * W; ++i)
      for (int j = 0; j < 3; ++j) {
        float v = span > 0.0f ? (planes[(size_t)j * H * W + i] - lo) / span : 0.0f;
        rgb[3 * i + j] = (unsigned char)std::lround(255.0f * v);
      }
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%03d.ppm", m);
    write_ppm(fs::path(f.out) / name, W, H, rgb);
  }
  std::cout << "wrote " << M << " images to " << f.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"aligned event-tensor encoding and two-branch event classification"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value file prefilling flags (command line wins)");
  uint64_t seed = 1;
  int workers = 1;
  app.add_option("--seed", seed, "master random seed")->capture_default_str();
  app.add_option("--workers", workers, "worker threads for encoding and evaluation")
      ->capture_default_str();

  GenFlags gen_flags;
  CLI::App* gen = app.add_subcommand("gen", "render a synthetic labeled event dataset");
  gen->add_option("--task", gen_flags.task, "static-shapes|direction|temporal-order")->required();
  gen->add_option("--out", gen_flags.out, "output dataset directory")->required();
  gen->add_option("--per-class", gen_flags.per_class, "samples per class")->capture_default_str();
  gen->add_option("--geometry", gen_flags.geometry, "sensor WIDTHxHEIGHT")->capture_default_str();
  gen->add_option("--noise-rate", gen_flags.noise_rate, "spurious events per pixel per second")
      ->capture_default_str();
  gen->add_option("--duration-us", gen_flags.duration_us, "recording length in microseconds")
      ->capture_default_str();
  gen->add_option("--train-frac", gen_flags.train_frac, "train split fraction")
      ->capture_default_str();
  gen->add_option("--val-frac", gen_flags.val_frac, "val split fraction")->capture_default_str();
  gen->add_option("--test-frac", gen_flags.test_frac, "test split fraction")
      ->capture_default_str();

  EncodeFlags encode_flags;
  CLI::App* enc = app.add_subcommand("encode", "encode event samples into AETF tensor files");
  add_input_flags(enc, encode_flags.in);
  add_encoder_flags(enc, encode_flags.enc, true);
  enc->add_option("--out", encode_flags.out, "output .aetf file or directory")->required();
  enc->add_option("--window-us", encode_flags.window_us,
                  "slice each sample into windows of this length before encoding");
  enc->add_option("--step-us", encode_flags.step_us, "window stride (default: window length)");

  TrainFlags train_flags;
  CLI::App* train = app.add_subcommand("train", "train a classifier on a generated dataset");
  train->add_option("--manifest", train_flags.manifest, "dataset manifest")->required();
  train->add_option("--out", train_flags.out, "output EFNW checkpoint")->required();
  add_encoder_flags(train, train_flags.enc, true);
  train->add_option("--epochs", train_flags.epochs)->capture_default_str();
  train->add_option("--lr", train_flags.lr, "peak learning rate")->capture_default_str();
  train->add_option("--warmup-frac", train_flags.warmup_frac, "warmup fraction of total steps")
      ->capture_default_str();
  train->add_option("--widths", train_flags.widths, "backbone conv widths")
      ->delimiter(',')
      ->capture_default_str();
  train->add_option("--feature-dim", train_flags.feature_dim, "per-frame embedding width")
      ->capture_default_str();
  train->add_option("--k1", train_flags.k1, "first temporal kernel")->capture_default_str();
  train->add_option("--k2", train_flags.k2, "second temporal kernel")->capture_default_str();
  train->add_option("--pool", train_flags.pool, "temporal pooling width")->capture_default_str();
  train->add_flag("--shared-frame-classifier", train_flags.shared_frame_classifier,
                  "share one affine classifier across frames");

  EvalFlags eval_flags;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
  eval->add_option("--manifest", eval_flags.manifest, "dataset manifest")->required();
  eval->add_option("--split", eval_flags.split, "split to evaluate")->capture_default_str();
  eval->add_option("--model", eval_flags.model, "EFNW checkpoint")->required();
  eval->add_option("--mode", eval_flags.mode, "synthesis|average|frame-only|video-only")
      ->capture_default_str();
  eval->add_option("--summary", eval_flags.summary, "write key=value summary to this file");

  BenchFlags bench_flags;
  CLI::App* bench = app.add_subcommand("bench", "measure per-sample latency and throughput");
  bench->add_option("--manifest", bench_flags.manifest, "dataset manifest");
  bench->add_option("--split", bench_flags.split, "split to bench")->capture_default_str();
  bench->add_option("--model", bench_flags.model, "EFNW checkpoint (required for --stage full)");
  bench->add_option("--stage", bench_flags.stage, "encode-only|full")->capture_default_str();
  add_encoder_flags(bench, bench_flags.enc, false);
  bench->add_option("--scaling", bench_flags.scaling,
                    "also time synthetic samples at these event counts")
      ->delimiter(',');
  bench->add_option("--repeats", bench_flags.repeats, "timed repeats per scaling row")
      ->capture_default_str();
  bench->add_option("--geometry", bench_flags.geometry, "scaling sensor size without --manifest")
      ->capture_default_str();
  bench->add_option("--summary", bench_flags.summary, "write key=value summary to this file");

  VizFlags viz_flags;
  CLI::App* viz = app.add_subcommand("viz", "export an AETF tensor as one image per frame");
  viz->add_option("--input", viz_flags.input, "AETF file")->required();
  viz->add_option("--out", viz_flags.out, "output image directory")->required();

  for (CLI::App* sub : {gen, enc, train, eval, bench, viz}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_flags, seed);
    if (enc->parsed()) return cmd_encode(encode_flags, seed, workers);
    if (train->parsed()) return cmd_train(train_flags, seed);
    if (eval->parsed()) return cmd_eval(eval_flags, workers);
    if (bench->parsed()) return cmd_bench(bench_flags, seed, workers);
    if (viz->parsed()) return cmd_viz(viz_flags);
  } catch (const std::exception& e) {
    std::cerr << "aetnet: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

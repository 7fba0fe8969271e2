#include "aetnet/efn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "aetnet/checkpoint.hpp"
#include "aetnet/optim.hpp"

namespace aetnet {

void validate_efn_config(const EfnConfig& cfg) {
  if (cfg.num_frames < 1) throw std::invalid_argument("efn config: need at least one frame");
  if (cfg.input_channels < 1 || cfg.feature_dim < 1)
    throw std::invalid_argument("efn config: channel and feature sizes must be >= 1");
  if (cfg.num_classes < 2) throw std::invalid_argument("efn config: need at least two classes");
  if (cfg.backbone_widths.empty())
    throw std::invalid_argument("efn config: backbone needs at least one block");
  for (int w : cfg.backbone_widths)
    if (w < 1) throw std::invalid_argument("efn config: backbone widths must be >= 1");
  if (cfg.k1 < 1 || cfg.k2 < 1 || cfg.pool_size < 1)
    throw std::invalid_argument("efn config: kernel and pool sizes must be >= 1");
  const int l1 = cfg.num_frames - cfg.k1 + 1;
  const int l2 = l1 - cfg.k2 + 1;
  if (l1 < 1 || l2 < 1 || l2 / cfg.pool_size < 1)
    throw std::invalid_argument(
        "efn config: video branch runs out of temporal elements (frames " +
        std::to_string(cfg.num_frames) + ", kernels " + std::to_string(cfg.k1) + "," +
        std::to_string(cfg.k2) + ", pool " + std::to_string(cfg.pool_size) + ")");
}

namespace {

// Runs f(0..n-1) across `workers` threads; rethrows the first failure.
template <typename F>
void parallel_for(size_t n, int workers, F&& f) {
  workers = std::max(1, std::min<int>(workers, (int)n));
  if (workers == 1) {
    for (size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      try {
        for (size_t i; (i = next.fetch_add(1)) < n;) f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

void check_labels(const std::vector<EventSample>& set, int classes, const char* what) {
  for (const auto& s : set)
    if (s.label < 0 || s.label >= classes)
      throw std::invalid_argument(std::string(what) + ": sample '" + s.sample_id +
                                  "' has label " + std::to_string(s.label) +
                                  " outside the class range");
}

}  // namespace

int argmax_class(const std::vector<float>& logits) {
  if (logits.empty()) throw std::invalid_argument("argmax_class: empty logits");
  return (int)(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

PredictionSet predict_from_input(const EfnModel<float>& model, const nn::Tensor<float>& input) {
  auto f = model.forward(input);
  const int m = f.frame_logits->dims[0], c = f.frame_logits->dims[1];
  PredictionSet out;
  out.logits.reserve(m + 1);
  for (int i = 0; i < m; ++i)
    out.logits.emplace_back(f.frame_logits->value.begin() + (size_t)i * c,
                            f.frame_logits->value.begin() + (size_t)(i + 1) * c);
  out.logits.push_back(f.video_logits->value);
  return out;
}

PredictionSet predict(const EfnModel<float>& model, const EventSample& sample) {
  return predict_from_input(model, model.encoder_input(sample));
}

std::vector<float> average_predictions(const PredictionSet& preds) {
  if (preds.logits.empty()) throw std::invalid_argument("average_predictions: empty set");
  std::vector<float> out(preds.logits.front().size(), 0.0f);
  for (const auto& l : preds.logits) {
    if (l.size() != out.size())
      throw std::invalid_argument("average_predictions: ragged logit vectors");
    for (size_t i = 0; i < out.size(); ++i) out[i] += l[i];
  }
  for (auto& v : out) v /= float(preds.logits.size());
  return out;
}

AccuracyMatrix accuracy_matrix_from_predictions(const std::vector<PredictionSet>& preds,
                                                const std::vector<int>& labels, int classes) {
  if (preds.empty()) throw std::invalid_argument("accuracy matrix: empty validation set");
  if (preds.size() != labels.size())
    throw std::invalid_argument("accuracy matrix: predictions/labels size mismatch");
  const int p_count = (int)preds.front().logits.size();
  AccuracyMatrix m;
  m.classifiers = p_count;
  m.classes = classes;
  m.acc.assign((size_t)p_count * classes, 0.0f);
  m.support.assign((size_t)p_count * classes, 0);
  std::vector<int> correct((size_t)p_count * classes, 0);
  for (size_t n = 0; n < preds.size(); ++n) {
    if ((int)preds[n].logits.size() != p_count)
      throw std::invalid_argument("accuracy matrix: ragged prediction sets");
    if (labels[n] < 0 || labels[n] >= classes)
      throw std::invalid_argument("accuracy matrix: label outside the class range");
    for (int p = 0; p < p_count; ++p) {
      if ((int)preds[n].logits[p].size() != classes)
        throw std::invalid_argument("accuracy matrix: logit width mismatch");
      const int q = argmax_class(preds[n].logits[p]);
      m.support[(size_t)p * classes + q]++;
      if (q == labels[n]) correct[(size_t)p * classes + q]++;
    }
  }
  for (int p = 0; p < p_count; ++p) {
    int hits = 0;
    for (int q = 0; q < classes; ++q) hits += correct[(size_t)p * classes + q];
    const float overall = float(hits) / float(preds.size());
    for (int q = 0; q < classes; ++q) {
      const size_t i = (size_t)p * classes + q;
      m.acc[i] = m.support[i] > 0 ? float(correct[i]) / float(m.support[i]) : overall;
    }
  }
  return m;
}

AccuracyMatrix compute_accuracy_matrix(const EfnModel<float>& model,
                                       const std::vector<EventSample>& val_set, int workers) {
  if (val_set.empty()) throw std::invalid_argument("accuracy matrix: empty validation set");
  const int classes = model.config().num_classes;
  check_labels(val_set, classes, "accuracy matrix");
  std::vector<PredictionSet> preds(val_set.size());
  parallel_for(val_set.size(), workers, [&](size_t i) { preds[i] = predict(model, val_set[i]); });
  std::vector<int> labels(val_set.size());
  for (size_t i = 0; i < val_set.size(); ++i) labels[i] = val_set[i].label;
  return accuracy_matrix_from_predictions(preds, labels, classes);
}

std::vector<float> synthesize(const PredictionSet& preds, const AccuracyMatrix& acc) {
  if ((int)preds.logits.size() != acc.classifiers)
    throw std::invalid_argument("synthesize: classifier count does not match accuracy matrix");
  std::vector<float> out(acc.classes, 0.0f);
  for (int p = 0; p < acc.classifiers; ++p) {
    const auto& l = preds.logits[p];
    if ((int)l.size() != acc.classes)
      throw std::invalid_argument("synthesize: logit width does not match accuracy matrix");
    const float weight = acc.at(p, argmax_class(l));
    for (int c = 0; c < acc.classes; ++c) out[c] += weight * l[c];
  }
  return out;
}

EvalMode parse_eval_mode(const std::string& name) {
  if (name == "synthesis") return EvalMode::Synthesis;
  if (name == "average") return EvalMode::Average;
  if (name == "frame-only") return EvalMode::FrameOnly;
  if (name == "video-only") return EvalMode::VideoOnly;
  throw std::invalid_argument("unknown eval mode '" + name +
                              "' (expected synthesis|average|frame-only|video-only)");
}

std::string eval_mode_name(EvalMode mode) {
  switch (mode) {
    case EvalMode::Synthesis: return "synthesis";
    case EvalMode::Average: return "average";
    case EvalMode::FrameOnly: return "frame-only";
    case EvalMode::VideoOnly: return "video-only";
  }
  throw std::logic_error("bad eval mode");
}

namespace {

std::vector<float> final_logits(const PredictionSet& preds, const AccuracyMatrix& acc,
                                EvalMode mode) {
  switch (mode) {
    case EvalMode::Synthesis:
      return synthesize(preds, acc);
    case EvalMode::Average:
      return average_predictions(preds);
    case EvalMode::FrameOnly: {
      PredictionSet frames;
      frames.logits.assign(preds.logits.begin(), preds.logits.end() - 1);
      return average_predictions(frames);
    }
    case EvalMode::VideoOnly:
      return preds.logits.back();
  }
  throw std::logic_error("bad eval mode");
}

}  // namespace

EvalReport evaluate(const EfnModel<float>& model, const AccuracyMatrix& acc,
                    const std::vector<EventSample>& test_set, EvalMode mode, int workers) {
  if (test_set.empty()) throw std::invalid_argument("evaluate: empty test set");
  const int classes = model.config().num_classes;
  check_labels(test_set, classes, "evaluate");
  std::vector<int> predicted(test_set.size());
  parallel_for(test_set.size(), workers, [&](size_t i) {
    predicted[i] = argmax_class(final_logits(predict(model, test_set[i]), acc, mode));
  });

  EvalReport report;
  report.mode = eval_mode_name(mode);
  report.total = (int)test_set.size();
  report.confusion.assign((size_t)classes * classes, 0);
  for (size_t i = 0; i < test_set.size(); ++i)
    report.confusion[(size_t)test_set[i].label * classes + predicted[i]]++;
  int correct = 0;
  report.per_class_acc.assign(classes, 0.0f);
  for (int q = 0; q < classes; ++q) {
    int row = 0;
    for (int c = 0; c < classes; ++c) row += report.confusion[(size_t)q * classes + c];
    const int diag = report.confusion[(size_t)q * classes + q];
    correct += diag;
    report.per_class_acc[q] = row > 0 ? float(diag) / float(row) : 0.0f;
  }
  report.accuracy = float(correct) / float(report.total);
  return report;
}

std::string format_report(const EvalReport& report) {
  const int classes = (int)report.per_class_acc.size();
  std::ostringstream out;
  out << "mode=" << report.mode << " samples=" << report.total << " accuracy=" << std::fixed
      << std::setprecision(4) << report.accuracy << "\n";
  out << "confusion (row = true class, col = predicted):\n";
  for (int q = 0; q < classes; ++q) {
    out << " ";
    for (int c = 0; c < classes; ++c) {
      out << " " << std::setw(5) << report.confusion[(size_t)q * classes + c];
    }
    out << "\n";
  }
  out << "per-class accuracy:";
  for (int q = 0; q < classes; ++q)
    out << " " << q << "=" << std::setprecision(4) << report.per_class_acc[q];
  out << "\n";
  return out.str();
}

void write_report_summary(const EvalReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open summary file for writing");
  out << "mode=" << report.mode << "\n";
  out << "samples=" << report.total << "\n";
  out << "accuracy=" << report.accuracy << "\n";
  for (size_t q = 0; q < report.per_class_acc.size(); ++q)
    out << "per_class_acc_" << q << "=" << report.per_class_acc[q] << "\n";
  out.close();
  if (out.fail()) throw std::runtime_error(path + ": failed to write summary file");
}

TrainResult train(EfnModel<float>& model, const std::vector<EventSample>& train_set,
                  const std::vector<EventSample>& val_set, const TrainOptions& opts) {
  if (train_set.empty() || val_set.empty())
    throw std::invalid_argument("train: training and validation splits must be non-empty");
  if (opts.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  const int classes = model.config().num_classes;
  check_labels(train_set, classes, "train");
  check_labels(val_set, classes, "train");

  // The voxel inputs never depend on the weights, so build them once.
  std::vector<nn::Tensor<float>> train_in, val_in;
  train_in.reserve(train_set.size());
  val_in.reserve(val_set.size());
  for (const auto& s : train_set) train_in.push_back(model.encoder_input(s));
  for (const auto& s : val_set) val_in.push_back(model.encoder_input(s));

  std::mt19937 rng(opts.seed);
  nn::Adam<float> adam;
  auto& params = model.params();
  const int64_t total_steps = (int64_t)opts.epochs * (int64_t)train_set.size();

  TrainResult res;
  std::vector<std::vector<float>> best;
  std::vector<size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), size_t{0});
  int64_t step = 0;

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (size_t i : order) {
      for (auto& p : params) p.tensor->zero_grad();
      auto loss = model.loss(train_in[i], train_set[i].label);
      nn::backward(loss);
      const double lr = nn::cosine_warmup_lr(++step, total_steps, opts.base_lr, opts.warmup_frac);
      adam.step(params, (float)lr);
      loss_sum += loss->value[0];
    }
    res.epoch_loss.push_back(float(loss_sum / (double)train_set.size()));

    int correct = 0;
    for (size_t j = 0; j < val_set.size(); ++j) {
      const auto avg = average_predictions(predict_from_input(model, val_in[j]));
      if (argmax_class(avg) == val_set[j].label) ++correct;
    }
    const float val_acc = float(correct) / float(val_set.size());
    res.epoch_val_acc.push_back(val_acc);
    if (best.empty() || val_acc > res.best_val_acc) {
      res.best_val_acc = val_acc;
      res.best_epoch = epoch;
      best = model.snapshot();
    }
    if (opts.log)
      *opts.log << "epoch " << (epoch + 1) << "/" << opts.epochs << " loss "
                << res.epoch_loss.back() << " val_acc " << val_acc << "\n";
  }

  model.restore(best);
  std::vector<PredictionSet> preds(val_set.size());
  for (size_t j = 0; j < val_set.size(); ++j) preds[j] = predict_from_input(model, val_in[j]);
  std::vector<int> labels(val_set.size());
  for (size_t j = 0; j < val_set.size(); ++j) labels[j] = val_set[j].label;
  res.acc = accuracy_matrix_from_predictions(preds, labels, classes);
  return res;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr float kMetaVersion = 1.0f;

std::vector<float> pack_meta(const EfnConfig& cfg, const EncoderConfig& enc) {
  std::vector<float> m = {kMetaVersion,
                          (float)cfg.num_frames,
                          (float)cfg.input_channels,
                          (float)cfg.feature_dim,
                          (float)cfg.num_classes,
                          (float)cfg.k1,
                          (float)cfg.k2,
                          (float)cfg.pool_size,
                          cfg.shared_frame_classifier ? 1.0f : 0.0f,
                          (float)cfg.backbone_widths.size()};
  for (int w : cfg.backbone_widths) m.push_back((float)w);
  m.push_back((float)(int)enc.mode);
  m.push_back((float)enc.m_hat);
  m.push_back((float)enc.stages.size());
  for (const auto& s : enc.stages) {
    m.push_back((float)s.group_size);
    m.push_back((float)s.in_channels);
    m.push_back((float)s.out_channels);
    m.push_back((float)s.kernel);
    m.push_back(s.alpha);
  }
  return m;
}

class MetaReader {
 public:
  explicit MetaReader(const std::vector<float>& data) : data_(data) {}

  float next() {
    if (pos_ >= data_.size())
      throw std::runtime_error("checkpoint: truncated configuration record");
    return data_[pos_++];
  }
  int next_int() {
    const float v = next();
    const int i = (int)std::lround(v);
    if (std::abs(v - (float)i) > 1e-3f)
      throw std::runtime_error("checkpoint: corrupt configuration record");
    return i;
  }

 private:
  const std::vector<float>& data_;
  size_t pos_ = 0;
};

void unpack_meta(const std::vector<float>& data, EfnConfig& cfg, EncoderConfig& enc) {
  MetaReader m(data);
  if (m.next_int() != (int)kMetaVersion)
    throw std::runtime_error("checkpoint: unsupported configuration version");
  cfg.num_frames = m.next_int();
  cfg.input_channels = m.next_int();
  cfg.feature_dim = m.next_int();
  cfg.num_classes = m.next_int();
  cfg.k1 = m.next_int();
  cfg.k2 = m.next_int();
  cfg.pool_size = m.next_int();
  cfg.shared_frame_classifier = m.next_int() != 0;
  cfg.backbone_widths.resize(m.next_int());
  for (auto& w : cfg.backbone_widths) w = m.next_int();
  const int mode = m.next_int();
  if (mode < 0 || mode > (int)EncodeMode::QuantizeOnly)
    throw std::runtime_error("checkpoint: corrupt encode mode");
  enc.mode = (EncodeMode)mode;
  enc.m_hat = m.next_int();
  enc.stages.resize(m.next_int());
  for (auto& s : enc.stages) {
    s.group_size = m.next_int();
    s.in_channels = m.next_int();
    s.out_channels = m.next_int();
    s.kernel = m.next_int();
    s.alpha = m.next();
    s.weights.assign((size_t)s.out_channels * s.group_size * s.in_channels * s.kernel * s.kernel,
                     0.0f);
    s.bias.assign(s.out_channels, 0.0f);
  }
}

}  // namespace

void save_efn(const EfnModel<float>& model, const AccuracyMatrix& acc, const std::string& path) {
  std::vector<nn::NamedTensor> tensors;
  auto meta = pack_meta(model.config(), model.encoder_config());
  tensors.push_back({"meta", {(int)meta.size()}, meta});
  for (const auto& p : model.params()) tensors.push_back({p.name, p.tensor->dims, p.tensor->value});
  if (acc.classifiers > 0) {
    if (acc.classifiers != model.config().num_frames + 1 ||
        acc.classes != model.config().num_classes)
      throw std::invalid_argument("save_efn: accuracy matrix shape does not match the model");
    tensors.push_back({"synthesis.acc", {acc.classifiers, acc.classes}, acc.acc});
    std::vector<float> support(acc.support.begin(), acc.support.end());
    tensors.push_back({"synthesis.support", {acc.classifiers, acc.classes}, support});
  }
  nn::save_checkpoint(path, tensors);
}

LoadedEfn load_efn(const std::string& path) {
  auto tensors = nn::load_checkpoint(path);
  const nn::NamedTensor* meta = nullptr;
  for (const auto& t : tensors)
    if (t.name == "meta") meta = &t;
  if (!meta) throw std::runtime_error(path + ": checkpoint has no configuration record");

  EfnConfig cfg;
  EncoderConfig enc;
  unpack_meta(meta->data, cfg, enc);
  LoadedEfn out{EfnModel<float>(cfg, enc, 0), {}};

  std::vector<bool> used(tensors.size(), false);
  auto take = [&](const std::string& name) -> const nn::NamedTensor* {
    for (size_t i = 0; i < tensors.size(); ++i)
      if (tensors[i].name == name) {
        used[i] = true;
        return &tensors[i];
      }
    return nullptr;
  };
  take("meta");

  for (auto& p : out.model.params()) {
    const nn::NamedTensor* t = take(p.name);
    if (!t) throw std::runtime_error(path + ": checkpoint is missing parameter '" + p.name + "'");
    if (t->dims != p.tensor->dims)
      throw std::runtime_error(path + ": parameter '" + p.name + "' has the wrong shape");
    p.tensor->value = t->data;
  }

  if (const nn::NamedTensor* a = take("synthesis.acc")) {
    const nn::NamedTensor* s = take("synthesis.support");
    if (!s || s->dims != a->dims || a->dims.size() != 2)
      throw std::runtime_error(path + ": corrupt synthesis accuracy record");
    out.acc.classifiers = a->dims[0];
    out.acc.classes = a->dims[1];
    out.acc.acc = a->data;
    out.acc.support.assign(s->data.size(), 0);
    for (size_t i = 0; i < s->data.size(); ++i) out.acc.support[i] = (int)std::lround(s->data[i]);
  }

  for (size_t i = 0; i < tensors.size(); ++i)
    if (!used[i])
      throw std::runtime_error(path + ": unexpected tensor '" + tensors[i].name +
                               "' in checkpoint");
  return out;
}

}  // namespace aetnet

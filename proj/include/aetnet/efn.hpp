#pragma once

// Event Frame Net: a shared per-frame CNN backbone over the encoded tensor,
// a per-frame classifier branch, a temporal-convolution video branch, logit
// averaging for training, and accuracy-weighted logit synthesis for
// inference. The model is templated on the scalar type so gradients can be
// finite-difference checked in double precision.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "aetnet/encoder.hpp"
#include "aetnet/events.hpp"
#include "aetnet/nn.hpp"

namespace aetnet {

struct EfnConfig {
  int num_frames = 10;     // frames entering the branches (M*)
  int input_channels = 3;  // channels of each encoded frame
  int feature_dim = 64;    // per-frame embedding width D
  int num_classes = 2;
  std::vector<int> backbone_widths = {16, 32, 64};  // one conv block per entry
  int k1 = 5;  // first video-branch kernel
  int k2 = 3;  // second video-branch kernel
  int pool_size = 2;
  bool shared_frame_classifier = false;  // one affine map reused per frame
};

// Throws std::invalid_argument when counts are non-positive or the video
// branch would run out of temporal elements (needs num_frames - k1 - k2 + 2
// >= pool_size so one element survives the final pooling).
void validate_efn_config(const EfnConfig& cfg);

inline constexpr float kLeakySlope = 0.01f;
inline constexpr int kBackbonePool = 2;

template <typename S>
class EfnModel {
 public:
  // `enc` supplies the encode mode, bin count, stage shapes and initial stage
  // weights; the network weights are drawn uniformly in +/- 1/sqrt(fan_in)
  // from `seed`.
  EfnModel(EfnConfig cfg, EncoderConfig enc, uint32_t seed) : cfg_(cfg), enc_(std::move(enc)) {
    validate_efn_config(cfg_);
    validate_encoder_config(enc_);
    if (num_output_frames(enc_) != cfg_.num_frames)
      throw std::invalid_argument("efn: encoder produces " +
                                  std::to_string(num_output_frames(enc_)) +
                                  " frames but the config expects " +
                                  std::to_string(cfg_.num_frames));
    if (num_output_channels(enc_) != cfg_.input_channels)
      throw std::invalid_argument("efn: encoder channel count does not match config");

    std::mt19937 rng(seed);
    auto add = [&](const std::string& name, std::vector<int> dims, float bound) {
      auto p = nn::make_parameter<S>(name, std::move(dims));
      if (bound > 0) {
        std::uniform_real_distribution<float> dist(-bound, bound);
        for (auto& v : p.tensor->value) v = S(dist(rng));
      }
      params_.push_back(p);
      return p.tensor;
    };

    if (enc_.mode == EncodeMode::Aet || enc_.mode == EncodeMode::Spike ||
        enc_.mode == EncodeMode::SpikeAccum) {
      for (size_t i = 0; i < enc_.stages.size(); ++i) {
        const ConvStage& st = enc_.stages[i];
        const std::string base = "enc.stage" + std::to_string(i) + ".";
        auto w = add(base + "w",
                     {st.out_channels, st.group_size * st.in_channels, st.kernel, st.kernel}, 0);
        auto b = add(base + "b", {st.out_channels}, 0);
        for (size_t j = 0; j < st.weights.size(); ++j) w->value[j] = S(st.weights[j]);
        for (size_t j = 0; j < st.bias.size(); ++j) b->value[j] = S(st.bias[j]);
        enc_w_.push_back(w);
        enc_b_.push_back(b);
      }
    }

    int prev = cfg_.input_channels;
    for (size_t i = 0; i < cfg_.backbone_widths.size(); ++i) {
      const int width = cfg_.backbone_widths[i];
      const float bound = 1.0f / std::sqrt((float)prev * 9.0f);
      const std::string base = "cnn.conv" + std::to_string(i) + ".";
      conv_w_.push_back(add(base + "w", {width, prev, 3, 3}, bound));
      conv_b_.push_back(add(base + "b", {width}, bound));
      prev = width;
    }
    const float fc_bound = 1.0f / std::sqrt((float)prev);
    fc_w_ = add("cnn.fc.w", {cfg_.feature_dim, prev}, fc_bound);
    fc_b_ = add("cnn.fc.b", {cfg_.feature_dim}, fc_bound);

    const int d = cfg_.feature_dim, classes = cfg_.num_classes;
    const float frame_bound = 1.0f / std::sqrt((float)d);
    if (cfg_.shared_frame_classifier) {
      frame_w_ = add("frame.w", {classes, d}, frame_bound);
      frame_b_ = add("frame.b", {classes}, frame_bound);
    } else {
      frame_w_ = add("frame.w", {cfg_.num_frames, classes, d}, frame_bound);
      frame_b_ = add("frame.b", {cfg_.num_frames, classes}, frame_bound);
    }

    const float v1_bound = 1.0f / std::sqrt((float)d * cfg_.k1);
    vid1_w_ = add("video.conv1.w", {d, d, cfg_.k1}, v1_bound);
    vid1_b_ = add("video.conv1.b", {d}, v1_bound);
    const float v2_bound = 1.0f / std::sqrt((float)d * cfg_.k2);
    vid2_w_ = add("video.conv2.w", {classes, d, cfg_.k2}, v2_bound);
    vid2_b_ = add("video.conv2.b", {classes}, v2_bound);
  }

  const EfnConfig& config() const { return cfg_; }
  const EncoderConfig& encoder_config() const { return enc_; }
  std::vector<nn::Parameter<S>>& params() { return params_; }
  const std::vector<nn::Parameter<S>>& params() const { return params_; }

  nn::Tensor<S> find(const std::string& name) const {
    for (const auto& p : params_)
      if (p.name == name) return p.tensor;
    throw std::invalid_argument("efn: no parameter named '" + name + "'");
  }

  // Constant voxel input for one sample, per the encode mode. Weight-free, so
  // callers may cache it across epochs.
  nn::Tensor<S> encoder_input(const EventSample& sample) const {
    if (enc_.mode == EncodeMode::QuantizeOnly) {
      auto q = quantize_timestamps(sample, cfg_.num_frames);
      return grid_to_tensor<S>(voxelize_spike(q, sample.geometry, cfg_.num_frames));
    }
    auto q = quantize_timestamps(sample, enc_.m_hat);
    switch (enc_.mode) {
      case EncodeMode::Aet:
      case EncodeMode::AvgCompress:
        return grid_to_tensor<S>(voxelize_accumulative(q, sample.geometry, enc_.m_hat));
      case EncodeMode::Spike:
        return grid_to_tensor<S>(voxelize_spike(q, sample.geometry, enc_.m_hat));
      case EncodeMode::SpikeAccum:
        return grids_to_tensor<S>(voxelize_spike(q, sample.geometry, enc_.m_hat),
                                  voxelize_accumulative(q, sample.geometry, enc_.m_hat));
      default:
        throw std::logic_error("bad encode mode");
    }
  }

  // Temporal compression: [M^, C_in, H, W] -> [M*, C, H, W].
  nn::Tensor<S> encode_forward(const nn::Tensor<S>& input) const {
    if (enc_.mode == EncodeMode::QuantizeOnly) return input;
    auto h = input;
    for (size_t i = 0; i < enc_.stages.size(); ++i)
      h = enc_.mode == EncodeMode::AvgCompress
              ? avg_compress(h, enc_.stages[i].group_size)
              : aligned_compress(h, enc_w_[i], enc_b_[i], enc_.stages[i].group_size,
                                 S(enc_.stages[i].alpha));
    return h;
  }

  // Shared backbone applied to every frame independently:
  // [M*, C, H, W] -> [M*, D].
  nn::Tensor<S> cnn_encode(const nn::Tensor<S>& frames) const {
    auto h = frames;
    for (size_t i = 0; i < conv_w_.size(); ++i)
      h = nn::max_pool2d(nn::leaky_relu(nn::conv2d(h, conv_w_[i], conv_b_[i], 1), S(kLeakySlope)),
                         kBackbonePool);
    return nn::linear(nn::global_avg(h), fc_w_, fc_b_);
  }

  // Per-frame logits [M*, classes]; row i depends only on embedding row i.
  nn::Tensor<S> frame_branch(const nn::Tensor<S>& emb) const {
    return cfg_.shared_frame_classifier ? nn::linear(emb, frame_w_, frame_b_)
                                        : nn::grouped_linear(emb, frame_w_, frame_b_);
  }

  // Video-level logits [classes]: the embedding rows become a [D, M*]
  // sequence, then conv1d(k1) -> leaky -> conv1d(k2) -> max_pool1d -> global
  // max over the surviving positions.
  nn::Tensor<S> video_branch(const nn::Tensor<S>& emb) const {
    auto seq = nn::transpose(emb);
    auto h = nn::leaky_relu(nn::conv1d(seq, vid1_w_, vid1_b_), S(kLeakySlope));
    h = nn::conv1d(h, vid2_w_, vid2_b_);
    return nn::global_max(nn::max_pool1d(h, cfg_.pool_size));
  }

  struct Forward {
    nn::Tensor<S> frame_logits;  // [M*, classes]
    nn::Tensor<S> video_logits;  // [classes]
  };

  Forward forward(const nn::Tensor<S>& input) const {
    auto emb = cnn_encode(encode_forward(input));
    return {frame_branch(emb), video_branch(emb)};
  }

  // Mean of all M*+1 classifiers' logits (the training-time prediction).
  nn::Tensor<S> averaged_logits(const Forward& f) const {
    return nn::mean_rows(nn::append_row(f.frame_logits, f.video_logits));
  }

  nn::Tensor<S> loss(const nn::Tensor<S>& input, int label) const {
    return nn::softmax_cross_entropy(averaged_logits(forward(input)), label);
  }

  std::vector<std::vector<S>> snapshot() const {
    std::vector<std::vector<S>> vals;
    vals.reserve(params_.size());
    for (const auto& p : params_) vals.push_back(p.tensor->value);
    return vals;
  }

  void restore(const std::vector<std::vector<S>>& vals) {
    if (vals.size() != params_.size())
      throw std::invalid_argument("efn: snapshot does not match parameter list");
    for (size_t i = 0; i < vals.size(); ++i) {
      if (vals[i].size() != params_[i].tensor->size())
        throw std::invalid_argument("efn: snapshot tensor size mismatch");
      params_[i].tensor->value = vals[i];
    }
  }

  // Encoder config with the current (trained) stage weights copied back in,
  // ready for the standalone encode pipeline.
  EncoderConfig trained_encoder() const {
    EncoderConfig enc = enc_;
    for (size_t i = 0; i < enc_w_.size(); ++i) {
      auto& st = enc.stages[i];
      st.weights.resize(enc_w_[i]->size());
      st.bias.resize(enc_b_[i]->size());
      for (size_t j = 0; j < st.weights.size(); ++j) st.weights[j] = float(enc_w_[i]->value[j]);
      for (size_t j = 0; j < st.bias.size(); ++j) st.bias[j] = float(enc_b_[i]->value[j]);
    }
    return enc;
  }

 private:
  EfnConfig cfg_;
  EncoderConfig enc_;
  std::vector<nn::Parameter<S>> params_;
  std::vector<nn::Tensor<S>> enc_w_, enc_b_, conv_w_, conv_b_;
  nn::Tensor<S> fc_w_, fc_b_, frame_w_, frame_b_, vid1_w_, vid1_b_, vid2_w_, vid2_b_;
};

// ---------------------------------------------------------------------------
// Inference-side prediction plumbing (float models)

// Logits from every classifier for one sample: entries 0..M*-1 are the frame
// classifiers, entry M* is the video branch.
struct PredictionSet {
  std::vector<std::vector<float>> logits;
};

// Index of the largest logit; ties resolve to the lowest class index.
int argmax_class(const std::vector<float>& logits);

PredictionSet predict(const EfnModel<float>& model, const EventSample& sample);
PredictionSet predict_from_input(const EfnModel<float>& model, const nn::Tensor<float>& input);

// Element-wise mean of all classifiers' logits.
std::vector<float> average_predictions(const PredictionSet& preds);

// Per-classifier, per-predicted-class precision on a validation set, with
// the supporting prediction counts.
struct AccuracyMatrix {
  int classifiers = 0;
  int classes = 0;
  std::vector<float> acc;   // [classifiers, classes]
  std::vector<int> support; // predictions of class q by classifier p

  float at(int p, int q) const { return acc[(size_t)p * classes + q]; }
  int support_at(int p, int q) const { return support[(size_t)p * classes + q]; }
};

// Counting rule: Acc(p,q) = correct predictions of q by p / all predictions
// of q by p. Never-predicted cells fall back to classifier p's overall
// accuracy so every synthesis weight stays on a comparable scale.
AccuracyMatrix accuracy_matrix_from_predictions(const std::vector<PredictionSet>& preds,
                                                const std::vector<int>& labels, int classes);
AccuracyMatrix compute_accuracy_matrix(const EfnModel<float>& model,
                                       const std::vector<EventSample>& val_set, int workers = 1);

// out = sum_p Acc(p, argmax l_p) * l_p.
std::vector<float> synthesize(const PredictionSet& preds, const AccuracyMatrix& acc);

enum class EvalMode { Synthesis, Average, FrameOnly, VideoOnly };
EvalMode parse_eval_mode(const std::string& name);
std::string eval_mode_name(EvalMode mode);

struct EvalReport {
  std::string mode;
  int total = 0;
  float accuracy = 0.0f;
  std::vector<int> confusion;        // [classes, classes], row = true label
  std::vector<float> per_class_acc;  // diagonal / row total (0 when unseen)
};

EvalReport evaluate(const EfnModel<float>& model, const AccuracyMatrix& acc,
                    const std::vector<EventSample>& test_set, EvalMode mode, int workers = 1);

std::string format_report(const EvalReport& report);
void write_report_summary(const EvalReport& report, const std::string& path);

// ---------------------------------------------------------------------------
// Training

struct TrainOptions {
  int epochs = 30;
  float base_lr = 1e-4f;
  float warmup_frac = 0.1f;
  uint32_t seed = 1;
  std::ostream* log = nullptr;  // per-epoch progress lines when set
};

struct TrainResult {
  std::vector<float> epoch_loss;     // mean training loss per epoch
  std::vector<float> epoch_val_acc;  // averaged-prediction validation accuracy
  int best_epoch = 0;
  float best_val_acc = 0.0f;
  AccuracyMatrix acc;  // validation accuracy matrix of the restored best model
};

// One sample per step, Adam with a warmup+cosine schedule, best epoch kept
// by validation accuracy (earliest epoch wins ties) and restored into the
// model before the accuracy matrix is computed. Deterministic given the seed.
TrainResult train(EfnModel<float>& model, const std::vector<EventSample>& train_set,
                  const std::vector<EventSample>& val_set, const TrainOptions& opts);

// ---------------------------------------------------------------------------
// Checkpoints (EFNW files: parameters + config + accuracy matrix)

void save_efn(const EfnModel<float>& model, const AccuracyMatrix& acc, const std::string& path);

struct LoadedEfn {
  EfnModel<float> model;
  AccuracyMatrix acc;
};

LoadedEfn load_efn(const std::string& path);

}  // namespace aetnet

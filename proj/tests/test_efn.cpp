#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "aetnet/checkpoint.hpp"
#include "aetnet/efn.hpp"
#include "grad_check.hpp"

using namespace aetnet;
using aetnet::testing::check_gradients;
using aetnet::testing::fill_uniform;
using aetnet::testing::scalarize;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  auto dir = fs::temp_directory_path() / "aetnet_efn_test";
  fs::create_directories(dir);
  return dir;
}

// 2 classes, 6x6 sensor, 8 bins compressed once (G=2) to 4 two-channel frames.
EfnConfig toy_cfg() {
  EfnConfig cfg;
  cfg.num_frames = 4;
  cfg.input_channels = 2;
  cfg.feature_dim = 5;
  cfg.num_classes = 2;
  cfg.backbone_widths = {3, 4};
  cfg.k1 = 3;
  cfg.k2 = 1;
  cfg.pool_size = 2;
  return cfg;
}

EncoderConfig toy_enc(uint32_t seed) {
  return make_encoder_config(8, {2}, {1, 2}, 3, EncodeMode::Aet, seed);
}

// Class 0 fires only positive events, class 1 only negative ones, so the
// accumulated grids have opposite signs: linearly separable through any
// magnitude-sensitive embedding.
EventSample toy_sample(int label, uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> xy(0, 5);
  EventSample s;
  s.geometry = {6, 6};
  s.label = label;
  s.sample_id = "toy" + std::to_string(seed);
  for (int i = 0; i < 40; ++i)
    s.events.push_back({(uint16_t)xy(rng), (uint16_t)xy(rng), (uint64_t)(25000ull * i),
                        label == 0 ? int8_t(1) : int8_t(-1)});
  return s;
}

std::vector<EventSample> toy_set(int per_class, uint32_t seed0) {
  std::vector<EventSample> set;
  for (int i = 0; i < per_class; ++i)
    for (int label : {0, 1}) set.push_back(toy_sample(label, seed0 + 2 * i + label));
  return set;
}

}  // namespace

TEST_CASE("backbone embeds frames independently and shares weights") {
  EfnModel<float> model(toy_cfg(), toy_enc(3), 11);
  std::mt19937_64 rng(4);
  auto a = nn::make_tensor<float>({4, 2, 6, 6});
  fill_uniform(a, rng);
  auto b = nn::make_tensor<float>({4, 2, 6, 6});
  b->value = a->value;
  for (size_t i = 0; i < 72; ++i) b->value[i] += 0.5f;        // frame 0 changed
  for (size_t i = 144; i < 288; ++i) b->value[i] -= 0.25f;    // frames 2,3 changed
  auto ea = model.cnn_encode(a), eb = model.cnn_encode(b);
  for (int d = 0; d < 5; ++d) {
    CHECK(ea->value[5 + d] == eb->value[5 + d]);  // untouched frame 1
    CHECK(ea->value[d] != eb->value[d]);
  }

  // Permuting frames permutes embedding rows identically.
  const int perm[4] = {2, 0, 3, 1};
  auto p = nn::make_tensor<float>({4, 2, 6, 6});
  for (int m = 0; m < 4; ++m)
    std::copy(a->value.begin() + (size_t)perm[m] * 72, a->value.begin() + (size_t)(perm[m] + 1) * 72,
              p->value.begin() + (size_t)m * 72);
  auto ep = model.cnn_encode(p);
  for (int m = 0; m < 4; ++m)
    for (int d = 0; d < 5; ++d)
      CHECK(ep->value[(size_t)m * 5 + d] == ea->value[(size_t)perm[m] * 5 + d]);

  // All-zero frames share one embedding.
  auto z = nn::make_tensor<float>({4, 2, 6, 6});
  fill_uniform(z, rng);
  std::fill(z->value.begin(), z->value.begin() + 72, 0.0f);
  std::fill(z->value.begin() + 216, z->value.end(), 0.0f);
  auto ez = model.cnn_encode(z);
  for (int d = 0; d < 5; ++d) CHECK(ez->value[d] == ez->value[15 + d]);
}

TEST_CASE("frame classifiers are independent per-frame affine maps") {
  EfnModel<float> model(toy_cfg(), toy_enc(3), 12);
  std::mt19937_64 rng(5);
  auto emb = nn::make_tensor<float>({4, 5});
  fill_uniform(emb, rng);
  auto logits = model.frame_branch(emb);
  REQUIRE(logits->dims == std::vector<int>{4, 2});

  // Split oracle: each row equals its own affine map.
  auto w = model.find("frame.w");
  auto b = model.find("frame.b");
  for (int g = 0; g < 4; ++g)
    for (int c = 0; c < 2; ++c) {
      float want = b->value[(size_t)g * 2 + c];
      for (int d = 0; d < 5; ++d)
        want += w->value[((size_t)g * 2 + c) * 5 + d] * emb->value[(size_t)g * 5 + d];
      CHECK(logits->value[(size_t)g * 2 + c] == doctest::Approx(want).epsilon(1e-6));
    }

  // Perturbing row 2 leaves every other row untouched.
  auto emb2 = nn::make_tensor<float>({4, 5});
  emb2->value = emb->value;
  for (int d = 0; d < 5; ++d) emb2->value[(size_t)2 * 5 + d] += 1.0f;
  auto logits2 = model.frame_branch(emb2);
  for (int g = 0; g < 4; ++g)
    for (int c = 0; c < 2; ++c) {
      if (g == 2)
        CHECK(logits2->value[(size_t)g * 2 + c] != logits->value[(size_t)g * 2 + c]);
      else
        CHECK(logits2->value[(size_t)g * 2 + c] == logits->value[(size_t)g * 2 + c]);
    }
}

TEST_CASE("single-frame model reduces the frame branch to one affine classifier") {
  EfnConfig cfg;
  cfg.num_frames = 1;
  cfg.input_channels = 1;
  cfg.feature_dim = 3;
  cfg.num_classes = 2;
  cfg.backbone_widths = {2};
  cfg.k1 = 1;
  cfg.k2 = 1;
  cfg.pool_size = 1;
  EncoderConfig enc;
  enc.m_hat = 1;
  enc.mode = EncodeMode::QuantizeOnly;
  EfnModel<float> model(cfg, enc, 9);
  CHECK(model.find("frame.w")->dims == std::vector<int>{1, 2, 3});
  auto emb = nn::make_tensor<float>({1, 3}, {0.5f, -1.0f, 2.0f});
  auto logits = model.frame_branch(emb);
  auto w = model.find("frame.w");
  auto b = model.find("frame.b");
  for (int c = 0; c < 2; ++c) {
    float want = b->value[c];
    for (int d = 0; d < 3; ++d) want += w->value[(size_t)c * 3 + d] * emb->value[d];
    CHECK(logits->value[c] == doctest::Approx(want));
  }
}

TEST_CASE("shared frame classifier applies one affine map to every frame") {
  auto cfg = toy_cfg();
  cfg.shared_frame_classifier = true;
  EfnModel<float> model(cfg, toy_enc(3), 13);
  auto w = model.find("frame.w");
  REQUIRE(w->dims == std::vector<int>{2, 5});
  std::mt19937_64 rng(6);
  auto emb = nn::make_tensor<float>({4, 5});
  fill_uniform(emb, rng);
  auto logits = model.frame_branch(emb);
  auto b = model.find("frame.b");
  for (int g = 0; g < 4; ++g)
    for (int c = 0; c < 2; ++c) {
      float want = b->value[c];
      for (int d = 0; d < 5; ++d)
        want += w->value[(size_t)c * 5 + d] * emb->value[(size_t)g * 5 + d];
      CHECK(logits->value[(size_t)g * 2 + c] == doctest::Approx(want).epsilon(1e-6));
    }
}

TEST_CASE("video branch published arithmetic and constant-sequence value") {
  EfnConfig cfg;
  cfg.num_frames = 10;
  cfg.input_channels = 1;
  cfg.feature_dim = 4;
  cfg.num_classes = 3;
  cfg.backbone_widths = {2};
  cfg.k1 = 5;
  cfg.k2 = 3;
  cfg.pool_size = 2;
  EncoderConfig enc;
  enc.m_hat = 10;
  enc.mode = EncodeMode::QuantizeOnly;
  EfnModel<float> model(cfg, enc, 20);

  std::mt19937_64 rng(7);
  auto emb = nn::make_tensor<float>({10, 4});
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  float v[4];
  for (auto& x : v) x = (float)dist(rng);
  for (int m = 0; m < 10; ++m)
    for (int d = 0; d < 4; ++d) emb->value[(size_t)m * 4 + d] = v[d];

  auto out = model.video_branch(emb);  // 10 -> 6 -> 4 -> 2 -> global max -> 1 element per class
  REQUIRE(out->dims == std::vector<int>{3});

  // A time-constant sequence makes every conv position identical, so the
  // output equals the closed-form single-position value.
  auto w1 = model.find("video.conv1.w"), b1 = model.find("video.conv1.b");
  auto w2 = model.find("video.conv2.w"), b2 = model.find("video.conv2.b");
  float hidden[4];
  for (int d = 0; d < 4; ++d) {
    float acc = b1->value[d];
    for (int c = 0; c < 4; ++c)
      for (int k = 0; k < 5; ++k) acc += w1->value[((size_t)d * 4 + c) * 5 + k] * v[c];
    hidden[d] = acc > 0 ? acc : kLeakySlope * acc;
  }
  for (int q = 0; q < 3; ++q) {
    float acc = b2->value[q];
    for (int d = 0; d < 4; ++d)
      for (int k = 0; k < 3; ++k) acc += w2->value[((size_t)q * 4 + d) * 3 + k] * hidden[d];
    CHECK(out->value[q] == doctest::Approx(acc).epsilon(1e-5));
  }
}

TEST_CASE("video branch gradient") {
  EfnModel<double> model(toy_cfg(), toy_enc(3), 21);
  std::mt19937_64 rng(8);
  auto emb = nn::make_tensor<double>({4, 5});
  fill_uniform(emb, rng);
  std::vector<nn::Tensor<double>> inputs = {emb, model.find("video.conv1.w"),
                                            model.find("video.conv1.b"),
                                            model.find("video.conv2.w"),
                                            model.find("video.conv2.b")};
  check_gradients<double>(inputs,
                          [&] {
                            std::mt19937_64 p(10);
                            return scalarize(model.video_branch(emb), p);
                          },
                          1e-5, 1e-5);
}

TEST_CASE("prediction averaging") {
  PredictionSet same{{{1.0f, -2.0f}, {1.0f, -2.0f}, {1.0f, -2.0f}}};
  CHECK(average_predictions(same) == std::vector<float>{1.0f, -2.0f});

  PredictionSet two{{{2.0f, 0.0f}, {0.0f, 2.0f}}};
  CHECK(average_predictions(two) == std::vector<float>{1.0f, 1.0f});

  std::mt19937 rng(31);
  std::uniform_real_distribution<float> dist(-3.0f, 3.0f);
  PredictionSet many;
  for (int p = 0; p < 7; ++p) {
    std::vector<float> l(4);
    for (auto& x : l) x = dist(rng);
    many.logits.push_back(l);
  }
  auto avg = average_predictions(many);
  for (int c = 0; c < 4; ++c) {
    float sum = 0;
    for (int p = 0; p < 7; ++p) sum += many.logits[p][c];
    CHECK(avg[c] == doctest::Approx(sum / 7.0f));
  }

  CHECK_THROWS_AS(average_predictions(PredictionSet{}), std::invalid_argument);
  CHECK_THROWS_AS(average_predictions(PredictionSet{{{1.0f}, {1.0f, 2.0f}}}),
                  std::invalid_argument);
}

TEST_CASE("synthesis weights logits by the matching accuracy cell") {
  AccuracyMatrix identity{1, 2, {1.0f, 1.0f}, {1, 1}};
  PredictionSet one{{{1.5f, -2.0f}}};
  CHECK(synthesize(one, identity) == std::vector<float>{1.5f, -2.0f});

  // Hand-evaluated two-classifier case.
  AccuracyMatrix acc{2, 2, {0.8f, 0.3f, 0.9f, 0.5f}, {1, 1, 1, 1}};
  PredictionSet preds{{{2.0f, 0.0f}, {0.0f, 1.0f}}};
  CHECK(synthesize(preds, acc) == std::vector<float>{1.6f, 0.5f});

  AccuracyMatrix zeros{2, 2, {0, 0, 0, 0}, {0, 0, 0, 0}};
  CHECK(synthesize(preds, zeros) == std::vector<float>{0.0f, 0.0f});

  // Tied logits resolve to the lowest class index, selecting Acc(p, 0).
  AccuracyMatrix tie{1, 2, {0.25f, 0.75f}, {1, 1}};
  PredictionSet tied{{{1.0f, 1.0f}}};
  CHECK(synthesize(tied, tie) == std::vector<float>{0.25f, 0.25f});

  // Scaling the selected accuracy cell scales that contribution linearly.
  AccuracyMatrix scaled = acc;
  scaled.acc[0] *= 2.0f;
  auto base = synthesize(preds, acc), twice = synthesize(preds, scaled);
  CHECK(twice[0] - base[0] == doctest::Approx(0.8f * 2.0f));

  AccuracyMatrix wrong{3, 2, {0, 0, 0, 0, 0, 0}, {0, 0, 0, 0, 0, 0}};
  CHECK_THROWS_AS(synthesize(preds, wrong), std::invalid_argument);
}

TEST_CASE("synthesis with uniform weights reproduces averaging") {
  std::mt19937 rng(41);
  std::uniform_real_distribution<float> dist(-2.0f, 2.0f);
  const int classifiers = 5, classes = 3;
  PredictionSet preds;
  for (int p = 0; p < classifiers; ++p) {
    std::vector<float> l(classes);
    for (auto& x : l) x = dist(rng);
    preds.logits.push_back(l);
  }
  AccuracyMatrix uniform;
  uniform.classifiers = classifiers;
  uniform.classes = classes;
  uniform.acc.assign((size_t)classifiers * classes, 1.0f / classifiers);
  uniform.support.assign((size_t)classifiers * classes, 1);
  auto a = synthesize(preds, uniform);
  auto b = average_predictions(preds);
  for (int c = 0; c < classes; ++c) CHECK(std::abs(a[c] - b[c]) < 1e-6f);
}

TEST_CASE("accuracy matrix counting, fallback, and support") {
  // Classifier 0 always predicts class 1 (3 of 4 correct); classifier 1
  // predicts the true label exactly.
  std::vector<int> labels = {1, 1, 1, 0};
  std::vector<PredictionSet> preds;
  for (int label : labels) {
    PredictionSet p;
    p.logits.push_back({0.0f, 1.0f});
    p.logits.push_back(label == 0 ? std::vector<float>{1.0f, 0.0f}
                                  : std::vector<float>{0.0f, 1.0f});
    preds.push_back(p);
  }
  auto m = accuracy_matrix_from_predictions(preds, labels, 2);
  CHECK(m.at(0, 1) == doctest::Approx(0.75f));
  CHECK(m.support_at(0, 1) == 4);
  CHECK(m.support_at(0, 0) == 0);
  CHECK(m.at(0, 0) == doctest::Approx(0.75f));  // fallback: overall accuracy of classifier 0
  CHECK(m.at(1, 0) == 1.0f);
  CHECK(m.at(1, 1) == 1.0f);
  CHECK(m.support_at(1, 0) == 1);
  CHECK(m.support_at(1, 1) == 3);

  CHECK_THROWS_AS(accuracy_matrix_from_predictions({}, {}, 2), std::invalid_argument);
  CHECK_THROWS_AS(accuracy_matrix_from_predictions(preds, {1, 1}, 2), std::invalid_argument);
}

TEST_CASE("end-to-end toy model gradient through the compression weights") {
  EfnModel<double> model(toy_cfg(), toy_enc(3), 33);
  auto sample = toy_sample(0, 77);
  auto input = model.encoder_input(sample);
  std::vector<nn::Tensor<double>> inputs;
  for (auto& p : model.params()) inputs.push_back(p.tensor);
  REQUIRE(model.find("enc.stage0.w")->size() > 0);
  check_gradients<double>(inputs, [&] { return model.loss(input, 0); }, 1e-5, 1e-4);
}

TEST_CASE("training is deterministic, keeps the best epoch, and reduces loss") {
  auto train_set = toy_set(6, 100);
  auto val_set = toy_set(3, 900);
  TrainOptions opts;
  opts.epochs = 5;
  opts.base_lr = 3e-3f;
  opts.seed = 5;

  EfnModel<float> m1(toy_cfg(), toy_enc(3), 50);
  auto r1 = train(m1, train_set, val_set, opts);
  EfnModel<float> m2(toy_cfg(), toy_enc(3), 50);
  auto r2 = train(m2, train_set, val_set, opts);
  CHECK(r1.epoch_loss == r2.epoch_loss);
  CHECK(r1.epoch_val_acc == r2.epoch_val_acc);
  CHECK(r1.best_epoch == r2.best_epoch);

  CHECK(r1.epoch_loss.back() < r1.epoch_loss.front());
  CHECK(r1.best_val_acc >= r1.epoch_val_acc.back());
  CHECK(r1.best_val_acc == r1.epoch_val_acc[r1.best_epoch]);
  for (float a : r1.epoch_val_acc) CHECK(r1.best_val_acc >= a);
  CHECK(r1.acc.classifiers == 5);
  CHECK(r1.acc.classes == 2);
  for (float a : r1.acc.acc) {
    CHECK(a >= 0.0f);
    CHECK(a <= 1.0f);
  }

  CHECK_THROWS_AS(train(m1, {}, val_set, opts), std::invalid_argument);
  CHECK_THROWS_AS(train(m1, train_set, {}, opts), std::invalid_argument);
  auto bad = train_set;
  bad[0].label = 7;
  CHECK_THROWS_AS(train(m1, bad, val_set, opts), std::invalid_argument);
}

TEST_CASE("evaluation modes, confusion consistency, and parallel determinism") {
  auto train_set = toy_set(6, 300);
  auto val_set = toy_set(3, 1300);
  auto test_set = toy_set(4, 2300);
  TrainOptions opts;
  opts.epochs = 8;
  opts.base_lr = 1e-2f;
  EfnModel<float> model(toy_cfg(), toy_enc(3), 51);
  auto result = train(model, train_set, val_set, opts);

  for (EvalMode mode :
       {EvalMode::Synthesis, EvalMode::Average, EvalMode::FrameOnly, EvalMode::VideoOnly}) {
    auto report = evaluate(model, result.acc, test_set, mode);
    CHECK(report.total == (int)test_set.size());
    int trace = 0, total = 0;
    for (int q = 0; q < 2; ++q)
      for (int c = 0; c < 2; ++c) {
        total += report.confusion[(size_t)q * 2 + c];
        if (q == c) trace += report.confusion[(size_t)q * 2 + c];
      }
    CHECK(total == report.total);
    CHECK(report.accuracy == doctest::Approx(float(trace) / total));
    CHECK(report.mode == eval_mode_name(mode));
  }

  // The separable toy task trains to perfection; a correctly-predicted
  // single-sample set reports accuracy 1.
  auto synth = evaluate(model, result.acc, test_set, EvalMode::Synthesis);
  REQUIRE(synth.accuracy > 0.9f);
  size_t hit = test_set.size();
  for (size_t i = 0; i < test_set.size(); ++i) {
    auto one = evaluate(model, result.acc, {test_set[i]}, EvalMode::Synthesis);
    if (one.accuracy == 1.0f) {
      hit = i;
      break;
    }
  }
  REQUIRE(hit < test_set.size());

  auto serial = evaluate(model, result.acc, test_set, EvalMode::Synthesis, 1);
  auto parallel = evaluate(model, result.acc, test_set, EvalMode::Synthesis, 4);
  CHECK(serial.confusion == parallel.confusion);
  auto acc_serial = compute_accuracy_matrix(model, val_set, 1);
  auto acc_parallel = compute_accuracy_matrix(model, val_set, 4);
  CHECK(acc_serial.acc == acc_parallel.acc);
  CHECK(acc_serial.support == acc_parallel.support);

  CHECK_THROWS_AS(evaluate(model, result.acc, {}, EvalMode::Average), std::invalid_argument);

  auto report = evaluate(model, result.acc, test_set, EvalMode::Synthesis);
  auto text = format_report(report);
  CHECK(text.find("accuracy=") != std::string::npos);
  auto summary_path = (scratch_dir() / "summary.txt").string();
  write_report_summary(report, summary_path);
  std::ifstream in(summary_path);
  std::string line;
  bool saw_acc = false, saw_class = false;
  while (std::getline(in, line)) {
    if (line.rfind("accuracy=", 0) == 0) saw_acc = true;
    if (line.rfind("per_class_acc_1=", 0) == 0) saw_class = true;
  }
  CHECK(saw_acc);
  CHECK(saw_class);

  for (const char* name : {"synthesis", "average", "frame-only", "video-only"})
    CHECK(eval_mode_name(parse_eval_mode(name)) == name);
  CHECK_THROWS_AS(parse_eval_mode("vote"), std::invalid_argument);
}

TEST_CASE("model construction rejects mismatched configs") {
  auto cfg = toy_cfg();
  cfg.num_frames = 5;
  CHECK_THROWS_WITH(EfnModel<float>(cfg, toy_enc(3), 1), doctest::Contains("frames"));
  cfg = toy_cfg();
  cfg.input_channels = 3;
  CHECK_THROWS_WITH(EfnModel<float>(cfg, toy_enc(3), 1), doctest::Contains("channel"));
  cfg = toy_cfg();
  cfg.k1 = 5;
  CHECK_THROWS_WITH(EfnModel<float>(cfg, toy_enc(3), 1), doctest::Contains("video branch"));
}

TEST_CASE("checkpoints round-trip the model, config, and accuracy matrix") {
  auto train_set = toy_set(4, 500);
  auto val_set = toy_set(2, 1500);
  TrainOptions opts;
  opts.epochs = 2;
  opts.base_lr = 1e-3f;
  EfnModel<float> model(toy_cfg(), toy_enc(9), 52);
  auto result = train(model, train_set, val_set, opts);

  auto path = (scratch_dir() / "model.efnw").string();
  save_efn(model, result.acc, path);
  auto loaded = load_efn(path);

  CHECK(loaded.model.config().num_frames == 4);
  CHECK(loaded.model.config().feature_dim == 5);
  CHECK(loaded.model.config().backbone_widths == std::vector<int>{3, 4});
  CHECK(loaded.model.encoder_config().m_hat == 8);
  CHECK(loaded.model.encoder_config().mode == EncodeMode::Aet);
  for (const auto& p : model.params()) {
    auto q = loaded.model.find(p.name);
    CHECK(q->dims == p.tensor->dims);
    CHECK(q->value == p.tensor->value);
  }
  CHECK(loaded.acc.acc == result.acc.acc);
  CHECK(loaded.acc.support == result.acc.support);

  auto sample = toy_sample(1, 4242);
  auto a = predict(model, sample), b = predict(loaded.model, sample);
  CHECK(a.logits == b.logits);

  // Trained encoder weights flow back into the standalone pipeline.
  auto enc = loaded.model.trained_encoder();
  CHECK(enc.stages[0].weights ==
        std::vector<float>(loaded.model.find("enc.stage0.w")->value));
}

TEST_CASE("checkpoint loader rejects corrupt files") {
  EfnModel<float> model(toy_cfg(), toy_enc(9), 53);
  auto dir = scratch_dir();
  auto path = (dir / "fuzz.efnw").string();
  save_efn(model, {}, path);

  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  auto write_bytes = [&](const std::string& body) {
    auto p = (dir / "fuzz_mut.efnw").string();
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(body.data(), (std::streamsize)body.size());
    out.close();
    return p;
  };

  std::mt19937 rng(61);
  for (int trial = 0; trial < 30; ++trial) {
    size_t cut = std::uniform_int_distribution<size_t>(0, bytes.size() - 1)(rng);
    CHECK_THROWS_AS(load_efn(write_bytes(bytes.substr(0, cut))), std::runtime_error);
  }
  CHECK_THROWS_WITH(load_efn(write_bytes(bytes + 'x')), doctest::Contains("trailing"));

  // A checkpoint with a foreign tensor name is refused.
  auto tensors = nn::load_checkpoint(path);
  tensors.push_back({"mystery", {1}, {0.0f}});
  auto extra_path = (dir / "extra.efnw").string();
  nn::save_checkpoint(extra_path, tensors);
  CHECK_THROWS_WITH(load_efn(extra_path), doctest::Contains("mystery"));

  // A checkpoint missing a parameter is refused.
  tensors.pop_back();
  tensors.erase(tensors.begin() + 1);
  auto missing_path = (dir / "missing.efnw").string();
  nn::save_checkpoint(missing_path, tensors);
  CHECK_THROWS_WITH(load_efn(missing_path), doctest::Contains("missing"));
}

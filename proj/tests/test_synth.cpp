#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "aetnet/synth.hpp"

using namespace aetnet;
using namespace aetnet::synth;

namespace {

SceneConfig flash_config(double phase, FlashOrder order, double noise) {
  SceneConfig c;
  c.geometry = {32, 32};
  c.duration_us = 1'000'000;
  c.shape = ShapeKind::FlashPair;
  c.motion = MotionKind::TemporalOrder;
  c.order = order;
  c.phase = phase;
  c.noise_rate = noise;
  c.seed = 99;
  return c;
}

}  // namespace

TEST_CASE("monotone ramp emits floor(delta/theta) events of one polarity") {
  const double theta = 0.25;
  std::vector<uint64_t> times;
  for (int k = 0; k <= 100; ++k) times.push_back(k * 1000);

  SUBCASE("3.5 theta up-ramp gives exactly 3 positive events") {
    std::vector<double> curve;
    for (int k = 0; k <= 100; ++k) curve.push_back(3.5 * theta * k / 100.0);
    auto ev = threshold_crossings(curve, times, 2, 3, theta);
    REQUIRE(ev.size() == 3);
    for (auto& e : ev) {
      CHECK(e.p == 1);
      CHECK(e.x == 2);
      CHECK(e.y == 3);
    }
    CHECK(ev.front().t >= times[1]);
  }

  SUBCASE("randomized monotone deltas, both polarities") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> whole(0, 9);
    std::uniform_real_distribution<double> frac(0.05, 0.95), start(-2.0, 2.0);
    for (int trial = 0; trial < 200; ++trial) {
      int expected = whole(rng);
      double delta = (expected + frac(rng)) * theta;
      int sign = trial % 2 ? 1 : -1;
      double l0 = start(rng);
      std::vector<double> curve;
      for (int k = 0; k <= 100; ++k) curve.push_back(l0 + sign * delta * k / 100.0);
      auto ev = threshold_crossings(curve, times, 0, 0, theta);
      CHECK((int)ev.size() == expected);
      for (auto& e : ev) CHECK(e.p == sign);
    }
  }

  SUBCASE("argument validation") {
    CHECK_THROWS_AS(threshold_crossings({0.0, 1.0}, {0}, 0, 0, theta), std::invalid_argument);
    CHECK_THROWS_AS(threshold_crossings({0.0, 1.0}, {0, 1}, 0, 0, 0.0), std::invalid_argument);
  }
}

TEST_CASE("static noiseless scene is an error") {
  SceneConfig c;
  c.geometry = {8, 8};
  c.duration_us = 100'000;
  c.shape = ShapeKind::Disc;
  c.motion = MotionKind::Translate;  // zero velocity: constant intensity
  c.noise_rate = 0.0;
  CHECK_THROWS_WITH_AS(render_events(c), doctest::Contains("no events"), std::runtime_error);
}

TEST_CASE("rendering is deterministic per seed and differs across seeds") {
  SceneConfig c;
  c.geometry = {16, 16};
  c.duration_us = 300'000;
  c.shape = ShapeKind::Square;
  c.motion = MotionKind::StaticJitter;
  c.noise_rate = 1.0;
  c.seed = 42;
  EventSample a = render_events(c);
  EventSample b = render_events(c);
  CHECK(a.events == b.events);
  c.seed = 43;
  EventSample d = render_events(c);
  CHECK(a.events != d.events);
}

TEST_CASE("every rendered sample satisfies the event invariants") {
  for (const char* task : {"static-shapes", "direction", "temporal-order"}) {
    TaskSpec spec = make_task(task, {16, 16}, 5, 0.6, 0.2, 0.2, 0.5, 300'000);
    Dataset ds = make_dataset(spec, 1);
    for (auto* split : {&ds.train, &ds.val, &ds.test})
      for (auto& s : *split) {
        CHECK(!s.events.empty());
        CHECK_NOTHROW(validate_sample(s));
      }
  }
}

TEST_CASE("direction task 2x10 with 0.6/0.2/0.2 splits into 12/4/4, class-balanced") {
  TaskSpec spec = make_task("direction", {16, 16}, 10, 0.6, 0.2, 0.2, 0.0, 500'000);
  Dataset ds = make_dataset(spec, 7);
  CHECK(ds.train.size() == 12);
  CHECK(ds.val.size() == 4);
  CHECK(ds.test.size() == 4);
  for (auto* split : {&ds.train, &ds.val, &ds.test}) {
    size_t per_class[2] = {0, 0};
    for (auto& s : *split) {
      REQUIRE(s.label >= 0);
      REQUIRE(s.label < 2);
      ++per_class[s.label];
    }
    CHECK(per_class[0] == per_class[1]);
  }
}

TEST_CASE("make_dataset is deterministic and seed-sensitive") {
  TaskSpec spec = make_task("temporal-order", {16, 16}, 4, 0.5, 0.25, 0.25, 0.5, 200'000);
  Dataset a = make_dataset(spec, 5);
  Dataset b = make_dataset(spec, 5);
  Dataset c = make_dataset(spec, 6);
  REQUIRE(a.train.size() == b.train.size());
  for (size_t i = 0; i < a.train.size(); ++i) CHECK(a.train[i].events == b.train[i].events);
  bool any_diff = false;
  for (size_t i = 0; i < a.train.size(); ++i)
    if (a.train[i].events != c.train[i].events) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("flash schedule: the lagging lamp rises first when the leader starts lit") {
  // Phase 0, A leading: A is already on at t=0, so the bursts are B rising
  // near 0.3 s, A falling at 0.5 s, B falling at 0.8 s, and A rising again
  // as the cycle wraps at the final virtual frame. Lamp A lives in the left
  // half of the sensor, lamp B in the right half.
  EventSample s = render_events(flash_config(0.0, FlashOrder::AThenB, 0.0));
  REQUIRE(!s.events.empty());
  size_t rise_b = 0, fall_a = 0, fall_b = 0;
  for (const Event& e : s.events) {
    bool right = e.x >= 16;
    if (e.t < 450'000) {
      CHECK(right);  // only B moves before A turns off
      CHECK(e.p == 1);
      ++rise_b;
    } else if (e.t < 700'000) {
      CHECK(!right);
      CHECK(e.p == -1);
      ++fall_a;
    } else if (e.t < 950'000) {
      CHECK(right);
      CHECK(e.p == -1);
      ++fall_b;
    } else {
      CHECK(!right);  // wrap burst: A re-rises
      CHECK(e.p == 1);
    }
  }
  CHECK(rise_b > 0);
  CHECK(fall_a > 0);
  CHECK(fall_b > 0);

  // B-then-A mirrors the roles: the first burst is A rising on the left.
  EventSample m = render_events(flash_config(0.0, FlashOrder::BThenA, 0.0));
  REQUIRE(!m.events.empty());
  size_t rise_a = 0;
  for (const Event& e : m.events)
    if (e.t < 450'000) {
      CHECK(e.x < 16);
      CHECK(e.p == 1);
      ++rise_a;
    }
  CHECK(rise_a > 0);
}

TEST_CASE("noise-only scenes hit the expected event count") {
  SceneConfig c;
  c.geometry = {16, 16};
  c.duration_us = 500'000;
  c.shape = ShapeKind::Disc;
  c.motion = MotionKind::Translate;  // static shape, noise only
  c.noise_rate = 2.0;

  const int runs = 40;
  const double expected = 2.0 * 16 * 16 * 0.5;  // rate * pixels * seconds
  double total = 0;
  for (int i = 0; i < runs; ++i) {
    c.seed = 1000 + i;
    total += (double)render_events(c).events.size();
  }
  double mean = total / runs;
  double se = std::sqrt(expected) / std::sqrt((double)runs);  // Poisson sd / sqrt(runs)
  CHECK(std::fabs(mean - expected) <= 3.0 * se);
}

TEST_CASE("task and split validation errors") {
  CHECK_THROWS_WITH_AS(make_task("bogus", {16, 16}, 4, 0.5, 0.25, 0.25, 0.0),
                       doctest::Contains("unknown task"), std::invalid_argument);
  CHECK_THROWS_AS(make_task("direction", {16, 16}, 4, 0.5, 0.2, 0.2, 0.0),
                  std::invalid_argument);  // fractions do not sum to 1
  CHECK_THROWS_AS(make_task("direction", {16, 16}, 2, 0.6, 0.2, 0.2, 0.0),
                  std::invalid_argument);  // 2 * 0.2 < 1 sample
  SceneConfig c;
  c.geometry = {4, 4};
  c.duration_us = 100;
  c.frame_rate_hz = 1000.0;  // yields a single virtual frame
  CHECK_THROWS_AS(render_events(c), std::invalid_argument);
  c.duration_us = 0;
  CHECK_THROWS_AS(render_events(c), std::invalid_argument);
}

TEST_CASE("dataset writes round-trip through the manifest") {
  TaskSpec spec = make_task("temporal-order", {16, 16}, 4, 0.5, 0.25, 0.25, 0.5, 200'000);
  Dataset ds = make_dataset(spec, 11);
  auto dir = std::filesystem::temp_directory_path() / "aetnet_test_synth_ds";
  std::filesystem::remove_all(dir);
  std::string manifest = write_dataset(ds, dir.string());

  auto entries = read_manifest(manifest);
  CHECK(entries.size() == 8);

  auto train = load_split(manifest, "train");
  REQUIRE(train.size() == ds.train.size());
  for (size_t i = 0; i < train.size(); ++i) {
    CHECK(train[i].events == ds.train[i].events);
    CHECK(train[i].label == ds.train[i].label);
  }
  auto all = load_split(manifest, "");
  CHECK(all.size() == 8);
  CHECK_THROWS_AS(read_manifest((dir / "missing.txt").string()), std::runtime_error);
}

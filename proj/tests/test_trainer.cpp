#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <vector>

#include "dsgnn/trainer.hpp"

using namespace dsgnn;
using ad::Mat;

namespace {

struct Fixture {
  World world;
  FeatureLayout layout = FeatureLayout::standard();
  TaskMode task{Mode::reconstruct, 4, 2};
  std::vector<TrafficSample> train_samples, val_samples;
  Normalizer norm;

  explicit Fixture(int n_sensors = 24, std::uint64_t seed = 5) {
    WorldConfig wc;
    wc.n_sensors = n_sensors;
    wc.duration_days = 1;
    wc.seed = seed;
    world = generate_world(wc);
    SplitSpec split;
    split.train = {wc.start_time, wc.start_time + 64800};
    split.val = {wc.start_time + 64800, wc.start_time + 75600};
    split.test = {wc.start_time + 75600, wc.start_time + 86400};
    split.window_stride = 24;
    train_samples = make_windows(world, layout, task, split, Split::train, seed).samples;
    val_samples = make_windows(world, layout, task, split, Split::val, seed).samples;
    REQUIRE_FALSE(train_samples.empty());
    REQUIRE_FALSE(val_samples.empty());
    norm = Normalizer::fit(train_samples, layout);
    for (auto& s : train_samples) norm.apply(s);
    for (auto& s : val_samples) norm.apply(s);
  }

  ModelConfig model_config() const {
    ModelConfig c = ModelConfig::tiny();
    c.smooth_activations = false;
    c.semantic_present_only = false;
    return c;
  }
};

/// A hand-assembled window over four arterial sensors; feature values are
/// arbitrary but deterministic, which is all gradient checks need.
struct TinyCase {
  std::vector<SensorContext> sensors;
  TrafficSample sample;
  FeatureLayout layout = FeatureLayout::standard();
  TaskMode task{Mode::reconstruct, 2, 2};

  TinyCase() {
    for (int i = 0; i < 4; ++i) {
      SensorContext c;
      c.sensor_id = "s" + std::to_string(i);
      c.lat = 34.0 + 0.01 * i;
      c.lon = -118.0;
      c.road_class = RoadClass::arterial;
      c.lanes = 2;
      c.max_speed = 40.0;
      c.neighborhood_id = i < 2 ? "nb0" : "nb1";
      sensors.push_back(c);
    }
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-0.9, 0.9);
    auto fill = [&](Mat& m) {
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = u(rng);
    };
    const int n_obs = 3, n_q = 1;
    sample.window_id = 0;
    for (int t = 0; t < task.window; ++t) {
      Mat xo(n_obs, layout.f_total()), xq(n_q, layout.f_total() - 2);
      fill(xo);
      fill(xq);
      sample.x_obs.push_back(xo);
      sample.x_query.push_back(xq);
    }
    sample.obs_mask = Mat::Ones(n_obs, task.window);
    sample.y_target = Mat(n_q, task.horizon * 2);
    fill(sample.y_target);
    sample.target_mask = Mat::Ones(n_q, task.horizon);
    sample.global_context = encode_global_context(1700438400);
    sample.sensor_ids_obs = {"s0", "s1", "s2"};
    sample.sensor_ids_query = {"s3"};
  }
};

}  // namespace

TEST_CASE("auxiliary loss weight decays geometrically") {
  CHECK(loss_weight_l2(0.5, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(loss_weight_l2(1.0, 7) == doctest::Approx(0.4782969).epsilon(1e-12));
  CHECK(total_loss(2.0, 123.0, 0.0, 3) == 2.0);
  CHECK(total_loss(1.0, 2.0, 0.5, 0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(total_loss(1.0, 2.0, 0.5, 1) == doctest::Approx(1.9).epsilon(1e-12));
}

TEST_CASE("train config validation names each violated bound") {
  CHECK(TrainConfig{}.validate().empty());
  TrainConfig c;
  c.learning_rate = -1.0;
  c.epochs = 0;
  c.batch_size = 0;
  c.clip_norm = 0.0;
  auto v = c.validate();
  CHECK(v.size() == 4);
}

TEST_CASE("adam first step follows the bias-corrected update") {
  ParameterStore store;
  store.create_constant("p", 1, 1, 1.0);
  AdamOptimizer adam(store);
  std::map<std::string, Mat> grads;
  grads["p"] = Mat::Constant(1, 1, 2.0);
  adam.step(store, grads, 0.1, 1e9);
  // First step: mhat = g, vhat = g^2, so the update is lr * sign(g).
  CHECK(store.at("p")(0, 0) == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(adam.steps() == 1);

  // Clipping rescales the gradient before the moment update.
  ParameterStore s2;
  s2.create_constant("p", 1, 1, 1.0);
  AdamOptimizer a2(s2);
  std::map<std::string, Mat> g2;
  g2["p"] = Mat::Constant(1, 1, 10.0);
  a2.step(s2, g2, 0.1, 5.0);  // norm 10 -> scaled to 5
  CHECK(a2.moment1()["p"](0, 0) == doctest::Approx(0.5).epsilon(1e-12));

  // Zero learning rate leaves parameters bit-identical.
  ParameterStore s3;
  std::mt19937_64 rng(9);
  s3.create("q", 3, 2, rng);
  const Mat before = s3.at("q");
  AdamOptimizer a3(s3);
  std::map<std::string, Mat> g3;
  g3["q"] = Mat::Constant(3, 2, 1.5);
  a3.step(s3, g3, 0.0, 5.0);
  CHECK(s3.at("q") == before);
}

TEST_CASE("training is deterministic given the seed") {
  Fixture fx;
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 4;
  tc.seed = 7;

  DeepStateModel m1(fx.layout, fx.task, fx.world.sensors, fx.model_config());
  DeepStateModel m2(fx.layout, fx.task, fx.world.sensors, fx.model_config());
  TrainResult r1 = train(m1, fx.train_samples, fx.val_samples, tc, {});
  TrainResult r2 = train(m2, fx.train_samples, fx.val_samples, tc, {});

  REQUIRE(r1.history.size() == r2.history.size());
  for (std::size_t i = 0; i < r1.history.size(); ++i) {
    CHECK(r1.history[i].train_loss == r2.history[i].train_loss);
    CHECK(r1.history[i].val_l1 == r2.history[i].val_l1);
    CHECK(r1.history[i].alpha == r2.history[i].alpha);
  }
  for (const auto& [name, v] : m1.params()) CHECK(v == m2.params().at(name));

  // The retained parameters reproduce the best validation loss exactly.
  CHECK(validation_l1(m1, fx.val_samples, {}) == r1.best_val_l1);
  CHECK(r1.best_epoch >= 0);
  CHECK(r1.history[r1.best_epoch].val_l1 == r1.best_val_l1);
}

TEST_CASE("zero learning rate freezes the model") {
  Fixture fx;
  TrainConfig tc;
  tc.epochs = 2;
  tc.learning_rate = 0.0;
  DeepStateModel model(fx.layout, fx.task, fx.world.sensors, fx.model_config());
  std::map<std::string, Mat> before;
  for (const auto& [name, v] : model.params()) before[name] = v;
  TrainResult r = train(model, fx.train_samples, fx.val_samples, tc, {});
  for (const auto& [name, v] : model.params()) CHECK(v == before.at(name));
  CHECK(r.history[0].val_l1 == r.history[1].val_l1);
}

TEST_CASE("non-finite loss aborts with location diagnostics") {
  Fixture fx;
  TrainConfig tc;
  tc.epochs = 1;
  DeepStateModel model(fx.layout, fx.task, fx.world.sensors, fx.model_config());
  model.params().at("enc.fuse.w1")(0, 0) = std::nan("");
  CHECK_THROWS_WITH_AS(train(model, fx.train_samples, fx.val_samples, tc, {}),
                       doctest::Contains("non-finite loss at epoch 0"),
                       std::runtime_error);
}

TEST_CASE("invalid configs and empty streams are rejected up front") {
  Fixture fx;
  DeepStateModel model(fx.layout, fx.task, fx.world.sensors, fx.model_config());
  TrainConfig bad;
  bad.epochs = 0;
  CHECK_THROWS_AS(train(model, fx.train_samples, fx.val_samples, bad, {}),
                  std::invalid_argument);
  TrainConfig ok;
  CHECK_THROWS_AS(train(model, {}, fx.val_samples, ok, {}), std::invalid_argument);
}

TEST_CASE("analytic gradients agree with central finite differences") {
  TinyCase tc;
  DeepStateModel model(tc.layout, tc.task, tc.sensors, ModelConfig::tiny());
  REQUIRE(model.registry().total() <= 8);
  GradCheckReport rep = gradcheck(model, tc.sample);
  INFO("worst parameter: " << rep.worst_param << " rel err " << rep.max_rel_err);
  CHECK(rep.ok);
  CHECK(rep.max_rel_err < 1e-4);
  CHECK_FALSE(rep.entries.empty());
}

TEST_CASE("gradcheck detects an injected fault in exactly one tensor") {
  TinyCase tc;
  DeepStateModel model(tc.layout, tc.task, tc.sensors, ModelConfig::tiny());
  GradCheckReport rep = gradcheck(model, tc.sample, 1e-5, 1e-4, 0.5, "head.w1");
  CHECK_FALSE(rep.ok);
  CHECK(rep.worst_param == "head.w1");
  for (const auto& e : rep.entries)
    if (e.param != "head.w1") CHECK(e.ok);

  CHECK_THROWS_AS(gradcheck(model, tc.sample, 1e-5, 1e-4, 0.5, "no.such"),
                  std::invalid_argument);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  ParameterStore store;
  std::mt19937_64 rng(21);
  store.create("a.w", 3, 4, rng);
  store.create("b.w", 2, 2, rng);
  AdamOptimizer adam(store);
  std::map<std::string, Mat> grads;
  grads["a.w"] = Mat::Constant(3, 4, 0.25);
  grads["b.w"] = Mat::Constant(2, 2, -0.5);
  adam.step(store, grads, 1e-3, 5.0);

  CheckpointMeta meta;
  meta.dataset_version = "unit-test";
  meta.epoch = 3;
  meta.layout_json = FeatureLayout::standard().to_json();
  meta.normalizer_json = "{}";

  const std::string path = "test_trainer_ckpt.bin";
  save_checkpoint(path, store, adam, meta);
  LoadedCheckpoint ck = load_checkpoint(path);
  CHECK(ck.meta.format_version == kCheckpointFormatVersion);
  CHECK(ck.meta.dataset_version == "unit-test");
  CHECK(ck.meta.epoch == 3);
  CHECK(ck.meta.layout_json == meta.layout_json);
  CHECK(ck.params.at("a.w") == store.at("a.w"));
  CHECK(ck.adam_m.at("b.w") == adam.moment1()["b.w"]);
  CHECK(ck.adam_steps == 1);

  // Restore into a fresh store and re-save: the files must be identical.
  ParameterStore store2;
  store2.create_zeros("a.w", 3, 4);
  store2.create_zeros("b.w", 2, 2);
  restore_params(store2, ck.params);
  AdamOptimizer adam2(store2);
  adam2.moment1() = ck.adam_m;
  adam2.moment2() = ck.adam_v;
  adam2.set_steps(ck.adam_steps);
  const std::string path2 = "test_trainer_ckpt2.bin";
  save_checkpoint(path2, store2, adam2, ck.meta);

  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string bytes1((std::istreambuf_iterator<char>(f1)), {});
  std::string bytes2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(bytes1 == bytes2);
  CHECK_FALSE(bytes1.empty());

  // Mismatched shapes and missing names fail loudly.
  ParameterStore store3;
  store3.create_zeros("a.w", 4, 3);
  CHECK_THROWS_WITH_AS(restore_params(store3, ck.params),
                       doctest::Contains("shape mismatch"), std::runtime_error);
  ParameterStore store4;
  store4.create_zeros("zz.w", 1, 1);
  CHECK_THROWS_WITH_AS(restore_params(store4, ck.params),
                       doctest::Contains("missing parameter"), std::runtime_error);

  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("tampered checkpoints are rejected with diagnostics") {
  ParameterStore store;
  std::mt19937_64 rng(22);
  store.create("a.w", 2, 2, rng);
  AdamOptimizer adam(store);
  CheckpointMeta meta;
  const std::string path = "test_trainer_tamper.bin";
  save_checkpoint(path, store, adam, meta);

  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  in.close();

  // Flip the first character of the embedded format version string.
  std::string versioned = bytes;
  versioned[16] = 'x';
  std::ofstream(path, std::ios::binary).write(versioned.data(), versioned.size());
  CHECK_THROWS_WITH_AS(load_checkpoint(path),
                       doctest::Contains("format version mismatch"),
                       std::runtime_error);

  // Truncation reports the byte offset neighborhood.
  std::ofstream(path, std::ios::binary).write(bytes.data(), 40);
  CHECK_THROWS_WITH_AS(load_checkpoint(path),
                       doctest::Contains("corrupt checkpoint near byte offset"),
                       std::runtime_error);

  // Damaged magic is caught before anything else.
  std::string magicless = bytes;
  magicless[0] = 'X';
  std::ofstream(path, std::ios::binary).write(magicless.data(), magicless.size());
  CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("bad magic"),
                       std::runtime_error);

  std::remove(path.c_str());
}

TEST_CASE("history serialization round-trips") {
  std::vector<EpochRecord> h = {{0, 1.5, 1.25, 0.5, 0.75}, {1, 1.0, 0.875, 0.51, 0.5}};
  auto back = history_from_json(history_to_json(h));
  REQUIRE(back.size() == 2);
  CHECK(back[1].epoch == 1);
  CHECK(back[0].train_loss == 1.5);
  CHECK(back[1].val_l1 == 0.875);
  CHECK(back[1].alpha == 0.51);
  CHECK(back[0].seconds == 0.75);
  CHECK(history_from_json("[]").empty());
}

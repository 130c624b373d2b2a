#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dsgnn/baselines.hpp"
#include "dsgnn/cli.hpp"

using namespace dsgnn;
using ad::Mat;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "dsgnn");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.good());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

/// Shared tiny workspace: config written once, data generated once.
struct Workspace {
  fs::path root = fs::path("cli_test_tmp");
  fs::path cfg_path = root / "cfg.json";
  fs::path data_dir = root / "data";
  fs::path out_dir = root / "out";

  Workspace() {
    static bool initialized = false;
    if (initialized) return;
    initialized = true;
    fs::remove_all(root);
    fs::create_directories(root);
    spit(cfg_path, config_text((root / "data").string(), (root / "out").string()));
    REQUIRE(cli({"generate-data", "--config", cfg_path.string()}) == 0);
  }

  static std::string config_text(const std::string& data_dir,
                                 const std::string& out_dir) {
    json j;
    j["world"] = {{"n_sensors", 12}, {"duration_days", 1},
                  {"n_neighborhoods", 2}, {"n_freeways", 1}, {"seed", 3}};
    j["task"] = {{"mode", "reconstruct"}, {"window", 4}, {"horizon", 4}};
    j["split"] = {{"window_stride", 24}, {"query_fraction", 0.2}};
    j["train"] = {{"epochs", 2}, {"batch_size", 4}};
    j["model"] = {{"d_d", 4}, {"d_c", 4}, {"d_t", 4}, {"d_e", 8}, {"k", 8},
                  {"mlp_hidden", 6}, {"e", 4}, {"heads", 2}, {"attn_dim", 4},
                  {"n_layers", 1}, {"init_hidden", 8}, {"head_hidden", 8},
                  {"n_env", 3}, {"n_tmp", 3}, {"d_id", 4}, {"gate_hidden", 6}};
    j["data_dir"] = data_dir;
    j["out_dir"] = out_dir;
    return j.dump(2);
  }
};

}  // namespace

TEST_CASE("config file defaults, round trip, and typo guard") {
  RunConfig def = RunConfig::from_json("{}");
  CHECK(def.world.n_sensors == WorldConfig{}.n_sensors);
  CHECK(def.train_fraction == 0.6);
  CHECK(def.val_fraction == 0.2);
  CHECK(def.data_dir == "data");

  CHECK_THROWS_WITH_AS(RunConfig::from_json(R"({"worl": {}})"),
                       doctest::Contains("worl"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(RunConfig::from_json(R"({"model": {"bogus": 1}})"),
                       doctest::Contains("bogus"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(RunConfig::from_json(R"({"train": {"lr": 0.1}})"),
                       doctest::Contains("lr"), std::invalid_argument);
  CHECK_THROWS_AS(RunConfig::from_json(R"({"model": {"d_e": 16, "k": 8}})"),
                  std::invalid_argument);
  CHECK_THROWS_AS(RunConfig::from_json("not json"), std::invalid_argument);

  // to_json emits every effective value; a reparse reproduces it.
  RunConfig cfg = RunConfig::from_json(
      R"({"world": {"n_sensors": 17}, "train": {"epochs": 3}})");
  cfg.resolve();
  RunConfig back = RunConfig::from_json(cfg.to_json());
  back.resolve();
  CHECK(back.world.n_sensors == 17);
  CHECK(back.train.epochs == 3);
  CHECK(back.to_json() == cfg.to_json());
}

TEST_CASE("resolved split ranges partition the generated time span") {
  RunConfig cfg = RunConfig::from_json(R"({"world": {"duration_days": 2}})");
  cfg.resolve();
  const std::int64_t step = 60LL * cfg.world.timestamp_interval_min;
  CHECK(cfg.split.train.begin == cfg.world.start_time);
  CHECK(cfg.split.train.end == cfg.split.val.begin);
  CHECK(cfg.split.val.end == cfg.split.test.begin);
  CHECK(cfg.split.test.end == cfg.world.start_time + 2 * 86400);
  CHECK(cfg.split.train.end % step == 0);
  const double total = 2 * 86400;
  CHECK((cfg.split.train.end - cfg.split.train.begin) / total ==
        doctest::Approx(0.6).epsilon(0.01));

  RunConfig bad;
  bad.train_fraction = 0.9;
  bad.val_fraction = 0.2;
  CHECK_THROWS_AS(bad.resolve(), std::invalid_argument);
}

TEST_CASE("usage errors exit with code 1") {
  CHECK(cli({}) == 1);
  CHECK(cli({"no-such-command"}) == 1);
  CHECK(cli({"train"}) == 1);  // --config is required
  CHECK(cli({"train", "--config", "does_not_exist.json"}) == 1);
}

TEST_CASE("generate-data writes a complete, deterministic dataset") {
  Workspace ws;
  for (const char* f : {"sensors.csv", "readings.csv", "context.csv",
                        "metadata.json"})
    CHECK(fs::exists(ws.data_dir / f));

  json meta = json::parse(slurp(ws.data_dir / "metadata.json"));
  CHECK(meta.at("version") == "synth-s12-d1-seed3");
  CHECK(meta.at("layout").contains("f_static"));

  // Same config and seed into a fresh directory: byte-identical readings.
  fs::path alt = ws.root / "data2";
  fs::path cfg2 = ws.root / "cfg2.json";
  spit(cfg2, Workspace::config_text(alt.string(), (ws.root / "out2").string()));
  REQUIRE(cli({"generate-data", "--config", cfg2.string()}) == 0);
  CHECK(slurp(alt / "readings.csv") == slurp(ws.data_dir / "readings.csv"));
  CHECK(slurp(alt / "sensors.csv") == slurp(ws.data_dir / "sensors.csv"));
}

TEST_CASE("dataset loading rejects a missing directory") {
  Workspace ws;
  RunConfig cfg = RunConfig::from_file(ws.cfg_path.string());
  cfg.data_dir = (ws.root / "nowhere").string();
  cfg.resolve();
  CHECK_THROWS_WITH_AS(load_dataset(cfg), doctest::Contains("generate-data"),
                       std::invalid_argument);
}

TEST_CASE("baseline evaluation: perfect oracle and independent recomputation") {
  Workspace ws;
  RunConfig cfg = RunConfig::from_file(ws.cfg_path.string());
  cfg.resolve();
  Dataset ds = load_dataset(cfg);
  REQUIRE_FALSE(ds.test_samples.empty());

  // A predictor that returns the target has zero error everywhere.
  MetricReport oracle = evaluate_baseline(
      ds.test_samples, cfg.task,
      [](const TrafficSample& s) { return s.y_target; });
  CHECK(oracle.mae_speed == 0.0);
  CHECK(oracle.rmse_flow == 0.0);
  CHECK(oracle.evaluated > 0);

  // The mean baseline agrees with a from-scratch recomputation.
  MetricReport lib = evaluate_baseline(
      ds.test_samples, cfg.task, [&](const TrafficSample& s) {
        return mean_observation_baseline(s, cfg.task);
      });
  MetricAccumulator byhand;
  const int W = cfg.task.window, H = cfg.task.horizon;
  for (const auto& s : ds.test_samples) {
    Mat y = Mat::Zero(s.y_target.rows(), H * 2);
    for (int h = 0; h < H; ++h) {
      const int t = W - H + h;
      for (int f = 0; f < 2; ++f) {
        double sum = 0.0;
        int n = 0;
        for (Eigen::Index i = 0; i < s.obs_mask.rows(); ++i)
          if (s.obs_mask(i, t) != 0.0) {
            sum += s.x_obs[t](i, f);
            ++n;
          }
        y.col(2 * h + f).setConstant(n > 0 ? sum / n : 0.0);
      }
    }
    byhand.add(y, s.y_target, s.target_mask, kDefaultEpsMape);
  }
  MetricReport hand = byhand.report(to_string(cfg.task.mode), H);
  CHECK(lib.mae_speed == doctest::Approx(hand.mae_speed).epsilon(1e-12));
  CHECK(lib.rmse_flow == doctest::Approx(hand.rmse_flow).epsilon(1e-12));
  CHECK(lib.evaluated == hand.evaluated);
}

TEST_CASE("train and evaluate produce the documented artifacts") {
  Workspace ws;
  REQUIRE(cli({"train", "--config", ws.cfg_path.string()}) == 0);
  CHECK(fs::exists(ws.out_dir / "model.ckpt"));
  CHECK(fs::exists(ws.out_dir / "config.json"));
  json hist = json::parse(slurp(ws.out_dir / "history.json"));
  REQUIRE(hist.is_array());
  REQUIRE(hist.size() == 2);
  CHECK(hist[0].contains("train_loss"));
  CHECK(hist[0].at("alpha").get<double>() > 0.0);
  CHECK(hist[0].at("alpha").get<double>() < 1.0);

  // Evaluation with a ratio sweep and a window dump.
  REQUIRE(cli({"evaluate", "--config", ws.cfg_path.string(),
               "--query-ratios", "0.2,0.5", "--dump-window", "0"}) == 0);
  json ev = json::parse(slurp(ws.out_dir / "evaluate.json"));
  for (const char* k : {"model", "mean_baseline", "persistence_baseline",
                        "nearest_baseline"}) {
    CHECK(ev.contains(k));
    CHECK(ev.at(k).at("speed").at("mae").get<double>() >= 0.0);
  }
  CHECK(ev.at("dataset_version") == "synth-s12-d1-seed3");
  json sweep = json::parse(slurp(ws.out_dir / "sweep.json"));
  REQUIRE(sweep.at("sweep").size() == 2);
  CHECK(fs::exists(ws.out_dir / "evaluate_ratio_0.20.json"));
  CHECK(fs::exists(ws.out_dir / "evaluate_ratio_0.50.json"));
  CHECK(fs::exists(ws.out_dir / "window_dump.json"));

  // Out-of-range sweep ratios are a usage error.
  CHECK(cli({"evaluate", "--config", ws.cfg_path.string(),
             "--query-ratios", "1.5"}) == 1);
}

TEST_CASE("evaluate without a checkpoint is a runtime failure") {
  Workspace ws;
  fs::path cfg3 = ws.root / "cfg3.json";
  spit(cfg3, Workspace::config_text(ws.data_dir.string(),
                                    (ws.root / "empty_out").string()));
  CHECK(cli({"evaluate", "--config", cfg3.string()}) == 2);
}

TEST_CASE("plots carry their data in a text sidecar") {
  Workspace ws;
  REQUIRE(fs::exists(ws.out_dir / "history.json"));  // from the train case
  REQUIRE(cli({"plot", "--config", ws.cfg_path.string(),
               (ws.out_dir / "history.json").string()}) == 0);
  CHECK(fs::exists(ws.out_dir / "history.svg"));

  // Sidecar rows reproduce the history table exactly.
  json hist = json::parse(slurp(ws.out_dir / "history.json"));
  std::ifstream tsv(ws.out_dir / "history.tsv");
  REQUIRE(tsv.good());
  std::string header;
  std::getline(tsv, header);
  CHECK(header == "x\ttrain_loss\tval_l1");
  for (const auto& e : hist) {
    double x, train_loss, val_l1;
    REQUIRE((tsv >> x >> train_loss >> val_l1));
    CHECK(x == e.at("epoch").get<double>());
    CHECK(train_loss == e.at("train_loss").get<double>());
    CHECK(val_l1 == e.at("val_l1").get<double>());
  }

  REQUIRE(cli({"plot", "--config", ws.cfg_path.string(),
               (ws.out_dir / "sweep.json").string()}) == 0);
  CHECK(fs::exists(ws.out_dir / "sweep.svg"));

  // Degenerate inputs are usage errors.
  spit(ws.root / "empty.json", "[]");
  CHECK(cli({"plot", "--config", ws.cfg_path.string(),
             (ws.root / "empty.json").string()}) == 1);
  spit(ws.root / "odd.json", R"({"foo": 1})");
  CHECK(cli({"plot", "--config", ws.cfg_path.string(),
             (ws.root / "odd.json").string()}) == 1);
  CHECK(cli({"plot", "--config", ws.cfg_path.string()}) == 1);
}

TEST_CASE("benchmark guards and row cardinality") {
  Workspace ws;
  CHECK(cli({"benchmark", "--config", ws.cfg_path.string(), "--reps", "1"}) == 1);

  RunConfig cfg = RunConfig::from_file(ws.cfg_path.string());
  cfg.split.window_stride = 4;
  auto rows = run_benchmark(cfg, {8, 10}, 2);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].n_sensors == 8);
  CHECK(rows[1].n_sensors == 10);
  for (const auto& r : rows) {
    CHECK(r.model_mean_s > 0.0);
    CHECK(r.reference_mean_s > 0.0);
    CHECK(r.model_sd_s >= 0.0);
  }
  CHECK_THROWS_AS(run_benchmark(cfg, {}, 2), std::invalid_argument);
  CHECK_THROWS_AS(run_benchmark(cfg, {8}, 1), std::invalid_argument);
}

TEST_CASE("ablation table covers every variant with shared instrumentation") {
  Workspace ws;
  RunConfig cfg = RunConfig::from_file(ws.cfg_path.string());
  cfg.train.epochs = 1;
  cfg.out_dir = (ws.root / "ablate_out").string();
  cmd_ablate(cfg);
  json ab = json::parse(slurp(fs::path(cfg.out_dir) / "ablate.json"));
  const auto& rows = ab.at("ablations");
  REQUIRE(rows.size() == 5);
  bool saw_no_gcn = false, saw_no_l2 = false;
  for (const auto& row : rows) {
    const std::string name = row.at("variant");
    if (name == "no_gcn") {
      saw_no_gcn = true;
      CHECK(row.at("gcn_invocations").get<std::int64_t>() == 0);
    }
    if (name == "no_l2") saw_no_l2 = true;
    CHECK(row.at("speed").at("mae").get<double>() >= 0.0);
  }
  CHECK(saw_no_gcn);
  CHECK(saw_no_l2);
}

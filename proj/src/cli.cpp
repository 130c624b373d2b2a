#include "dsgnn/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <map>
#include <numeric>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

namespace dsgnn {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << text;
}

void check_keys(const json& j, const std::vector<std::string>& allowed,
                const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw std::invalid_argument("unknown config key \"" + key + "\" in " +
                                  where);
  }
}

int num_workers() {
  if (const char* env = std::getenv("TOOL_NUM_WORKERS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 3;
}

std::int64_t align(std::int64_t t, std::int64_t step) { return t - t % step; }

}  // namespace

void RunConfig::resolve() {
  if (train_fraction <= 0 || val_fraction <= 0 ||
      train_fraction + val_fraction >= 1.0)
    throw std::invalid_argument(
        "train_fraction and val_fraction must be positive and sum below 1");
  const std::int64_t step = 60LL * world.timestamp_interval_min;
  const std::int64_t t0 = world.start_time;
  const std::int64_t total = 86400LL * world.duration_days;
  const std::int64_t train_end =
      align(t0 + static_cast<std::int64_t>(total * train_fraction), step);
  const std::int64_t val_end = align(
      t0 + static_cast<std::int64_t>(total * (train_fraction + val_fraction)),
      step);
  split.train = {t0, train_end};
  split.val = {train_end, val_end};
  split.test = {val_end, t0 + total};
  for (const auto& v : world.validate())
    throw std::invalid_argument("world config: " + v);
  for (const auto& v : split.validate())
    throw std::invalid_argument("split config: " + v);
  for (const auto& v : train.validate())
    throw std::invalid_argument("train config: " + v);
}

std::string RunConfig::to_json() const {
  json j;
  j["world"] = {{"n_neighborhoods", world.n_neighborhoods},
                {"n_freeways", world.n_freeways},
                {"n_sensors", world.n_sensors},
                {"timestamp_interval_min", world.timestamp_interval_min},
                {"duration_days", world.duration_days},
                {"seed", world.seed},
                {"outage_rate", world.outage_rate},
                {"rain_prob", world.rain_prob},
                {"start_time", format_iso8601(world.start_time)}};
  j["split"] = {{"train_fraction", train_fraction},
                {"val_fraction", val_fraction},
                {"min_valid_sensors", split.min_valid_sensors},
                {"query_fraction", split.query_fraction},
                {"window_stride", split.window_stride},
                {"resolved",
                 {{"train",
                   {format_iso8601(split.train.begin),
                    format_iso8601(split.train.end)}},
                  {"val",
                   {format_iso8601(split.val.begin), format_iso8601(split.val.end)}},
                  {"test",
                   {format_iso8601(split.test.begin),
                    format_iso8601(split.test.end)}}}}};
  j["model"] = {{"d_d", model.enc.d_dynamic},
                {"d_c", model.enc.d_context},
                {"d_t", model.enc.d_traffic},
                {"d_e", model.enc.d_embed},
                {"mlp_hidden", model.enc.mlp_hidden},
                {"k", model.dsg.d_state},
                {"e", model.dsg.d_embed_lap},
                {"heads", model.dsg.attn_heads},
                {"attn_dim", model.dsg.attn_dim},
                {"n_layers", model.dsg.gcn_layers},
                {"K", model.dsg.prune_frac},
                {"init_hidden", model.dsg.init_hidden},
                {"head_hidden", model.head.hidden},
                {"n_env", model.n_env},
                {"n_tmp", model.n_tmp},
                {"d_id", model.d_id},
                {"sigma_km", model.sigma_km},
                {"tau", model.tau},
                {"gate_hidden", model.gate_hidden},
                {"seed", model.seed}};
  j["train"] = {{"gamma", train.gamma},
                {"epochs", train.epochs},
                {"batch_size", train.batch_size},
                {"learning_rate", train.learning_rate},
                {"seed", train.seed},
                {"patience", train.patience},
                {"clip_norm", train.clip_norm}};
  j["task"] = {{"mode", to_string(task.mode)},
               {"window", task.window},
               {"horizon", task.horizon}};
  j["data_dir"] = data_dir;
  j["out_dir"] = out_dir;
  return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config parse error: ") + e.what());
  }
  RunConfig cfg;
  check_keys(j, {"world", "split", "model", "train", "task", "data_dir", "out_dir"},
             "config root");
  if (j.contains("world")) {
    const auto& w = j["world"];
    check_keys(w,
               {"n_neighborhoods", "n_freeways", "n_sensors",
                "timestamp_interval_min", "duration_days", "seed", "outage_rate",
                "rain_prob", "start_time"},
               "world");
    auto& c = cfg.world;
    c.n_neighborhoods = w.value("n_neighborhoods", c.n_neighborhoods);
    c.n_freeways = w.value("n_freeways", c.n_freeways);
    c.n_sensors = w.value("n_sensors", c.n_sensors);
    c.timestamp_interval_min =
        w.value("timestamp_interval_min", c.timestamp_interval_min);
    c.duration_days = w.value("duration_days", c.duration_days);
    c.seed = w.value("seed", c.seed);
    c.outage_rate = w.value("outage_rate", c.outage_rate);
    c.rain_prob = w.value("rain_prob", c.rain_prob);
    if (w.contains("start_time")) {
      if (w["start_time"].is_string())
        c.start_time = parse_iso8601(w["start_time"].get<std::string>());
      else
        c.start_time = w["start_time"].get<std::int64_t>();
    }
  }
  if (j.contains("split")) {
    const auto& s = j["split"];
    // "resolved" is the informational echo written by to_json; accepting
    // it keeps emitted config files reloadable. resolve() recomputes it.
    check_keys(s,
               {"train_fraction", "val_fraction", "min_valid_sensors",
                "query_fraction", "window_stride", "resolved"},
               "split");
    cfg.train_fraction = s.value("train_fraction", cfg.train_fraction);
    cfg.val_fraction = s.value("val_fraction", cfg.val_fraction);
    cfg.split.min_valid_sensors =
        s.value("min_valid_sensors", cfg.split.min_valid_sensors);
    cfg.split.query_fraction = s.value("query_fraction", cfg.split.query_fraction);
    cfg.split.window_stride = s.value("window_stride", cfg.split.window_stride);
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    check_keys(m,
               {"d_d", "d_c", "d_t", "d_e", "mlp_hidden", "k", "e", "heads",
                "attn_dim", "n_layers", "K", "init_hidden", "head_hidden", "n_env",
                "n_tmp", "d_id", "sigma_km", "tau", "gate_hidden", "seed"},
               "model");
    auto& c = cfg.model;
    c.enc.d_dynamic = m.value("d_d", c.enc.d_dynamic);
    c.enc.d_context = m.value("d_c", c.enc.d_context);
    c.enc.d_traffic = m.value("d_t", c.enc.d_traffic);
    c.enc.d_embed = m.value("d_e", c.enc.d_embed);
    c.enc.mlp_hidden = m.value("mlp_hidden", c.enc.mlp_hidden);
    c.dsg.d_state = m.value("k", c.dsg.d_state);
    c.dsg.k = c.dsg.d_state;
    c.dsg.d_embed_lap = m.value("e", c.dsg.d_embed_lap);
    c.dsg.attn_heads = m.value("heads", c.dsg.attn_heads);
    c.dsg.attn_dim = m.value("attn_dim", c.dsg.attn_dim);
    c.dsg.gcn_layers = m.value("n_layers", c.dsg.gcn_layers);
    c.dsg.prune_frac = m.value("K", c.dsg.prune_frac);
    c.dsg.init_hidden = m.value("init_hidden", c.dsg.init_hidden);
    c.head.hidden = m.value("head_hidden", c.head.hidden);
    c.n_env = m.value("n_env", c.n_env);
    c.n_tmp = m.value("n_tmp", c.n_tmp);
    c.d_id = m.value("d_id", c.d_id);
    c.sigma_km = m.value("sigma_km", c.sigma_km);
    c.tau = m.value("tau", c.tau);
    c.gate_hidden = m.value("gate_hidden", c.gate_hidden);
    c.seed = m.value("seed", c.seed);
    if (c.enc.d_embed != c.dsg.d_state)
      throw std::invalid_argument("model: d_e must equal k");
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    check_keys(t,
               {"gamma", "epochs", "batch_size", "learning_rate", "seed",
                "patience", "clip_norm"},
               "train");
    auto& c = cfg.train;
    c.gamma = t.value("gamma", c.gamma);
    c.epochs = t.value("epochs", c.epochs);
    c.batch_size = t.value("batch_size", c.batch_size);
    c.learning_rate = t.value("learning_rate", c.learning_rate);
    c.seed = t.value("seed", c.seed);
    c.patience = t.value("patience", c.patience);
    c.clip_norm = t.value("clip_norm", c.clip_norm);
  }
  if (j.contains("task")) {
    const auto& t = j["task"];
    check_keys(t, {"mode", "window", "horizon"}, "task");
    if (t.contains("mode")) {
      const std::string m = t["mode"].get<std::string>();
      if (m == "reconstruct")
        cfg.task.mode = Mode::reconstruct;
      else if (m == "forecast")
        cfg.task.mode = Mode::forecast;
      else
        throw std::invalid_argument("task.mode must be reconstruct or forecast");
    }
    cfg.task.window = t.value("window", cfg.task.window);
    cfg.task.horizon = t.value("horizon", cfg.task.horizon);
  }
  cfg.data_dir = j.value("data_dir", cfg.data_dir);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  return from_json(read_file(path));
}

namespace {

std::string dataset_version(const WorldConfig& w) {
  std::ostringstream os;
  os << "synth-s" << w.n_sensors << "-d" << w.duration_days << "-seed" << w.seed;
  return os.str();
}

}  // namespace

Dataset load_dataset(const RunConfig& cfg) {
  Dataset ds;
  const fs::path dir(cfg.data_dir);
  if (!fs::exists(dir / "sensors.csv"))
    throw std::invalid_argument("dataset not found under " + cfg.data_dir +
                                " (run generate-data first)");
  ds.world = ingest_csv((dir / "sensors.csv").string(),
                        (dir / "readings.csv").string(),
                        (dir / "context.csv").string());
  ds.version = dataset_version(cfg.world);
  const FeatureLayout layout = FeatureLayout::standard();

  const Split kinds[3] = {Split::train, Split::val, Split::test};
  std::vector<TrafficSample>* dest[3] = {&ds.train_samples, &ds.val_samples,
                                         &ds.test_samples};
  std::vector<std::thread> workers;
  const int n_workers = std::min(3, num_workers());
  std::vector<std::string> errors(3);
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i = next++; i < 3; i = next++) {
      try {
        auto res = make_windows(ds.world, layout, cfg.task, cfg.split, kinds[i],
                                cfg.world.seed);
        *dest[i] = std::move(res.samples);
        if (dest[i]->empty() && !res.diagnostics.empty())
          errors[i] = res.diagnostics.front();
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  for (int i = 0; i < n_workers; ++i) workers.emplace_back(work);
  for (auto& w : workers) w.join();
  for (const auto& e : errors)
    if (!e.empty()) throw std::runtime_error("windowing: " + e);

  if (ds.train_samples.empty())
    throw std::runtime_error("train split produced no admissible windows");
  ds.normalizer = Normalizer::fit(ds.train_samples, layout);
  return ds;
}

MetricReport evaluate_model(const DeepStateModel& model, const Normalizer& norm,
                            const std::vector<TrafficSample>& raw_samples,
                            const TaskMode& task, const ForwardOptions& opts) {
  MetricAccumulator acc;
  for (const auto& raw : raw_samples) {
    TrafficSample s = raw;
    norm.apply(s);
    ad::Tape tape;
    ParamContext p(tape, model.params());
    ForwardOptions o = opts;
    o.compute_l2 = false;
    ForwardResult r = model.forward(p, s, o);
    if (!r.y_pred.valid()) continue;
    const Mat y_raw_pred = norm.invert_predictions(tape.value(r.y_pred));
    acc.add(y_raw_pred, raw.y_target, raw.target_mask, kDefaultEpsMape);
  }
  return acc.report(to_string(task.mode), task.horizon);
}

MetricReport evaluate_baseline(
    const std::vector<TrafficSample>& raw_samples, const TaskMode& task,
    const std::function<Mat(const TrafficSample&)>& predict) {
  MetricAccumulator acc;
  for (const auto& raw : raw_samples)
    acc.add(predict(raw), raw.y_target, raw.target_mask, kDefaultEpsMape);
  return acc.report(to_string(task.mode), task.horizon);
}

namespace {

void ensure_out_dir(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  write_file((fs::path(cfg.out_dir) / "config.json").string(), cfg.to_json());
}

json report_json(const MetricReport& r) { return json::parse(r.to_json()); }

std::vector<TrafficSample> normalized_copy(const std::vector<TrafficSample>& in,
                                           const Normalizer& norm) {
  std::vector<TrafficSample> out = in;
  for (auto& s : out) norm.apply(s);
  return out;
}

}  // namespace

void cmd_generate_data(RunConfig cfg) {
  cfg.resolve();
  World world = generate_world(cfg.world);
  fs::create_directories(cfg.data_dir);
  write_world_csv(world, cfg.data_dir);
  const FeatureLayout layout = FeatureLayout::standard();

  json meta;
  meta["version"] = dataset_version(cfg.world);
  meta["layout"] = json::parse(layout.to_json());
  meta["config"] = json::parse(cfg.to_json());
  write_file((fs::path(cfg.data_dir) / "metadata.json").string(), meta.dump(2));

  std::cout << "split      samples  mean_obs_sensors  mean_query_sensors\n";
  const std::pair<const char*, Split> split_list[] = {
      {"train", Split::train}, {"val", Split::val}, {"test", Split::test}};
  for (const auto& [name, which] : split_list) {
    auto res = make_windows(world, layout, cfg.task, cfg.split, which,
                            cfg.world.seed);
    double obs = 0, qry = 0;
    for (const auto& s : res.samples) {
      obs += static_cast<double>(s.sensor_ids_obs.size());
      qry += static_cast<double>(s.sensor_ids_query.size());
    }
    const double n = std::max<std::size_t>(1, res.samples.size());
    std::cout << std::left << std::setw(11) << name << std::setw(9)
              << res.samples.size() << std::setw(18) << obs / n << qry / n
              << "\n";
  }
  std::cout << "wrote " << cfg.data_dir << "\n";
}

void cmd_train(RunConfig cfg) {
  cfg.resolve();
  Dataset ds = load_dataset(cfg);
  const FeatureLayout layout = FeatureLayout::standard();
  auto train_n = normalized_copy(ds.train_samples, ds.normalizer);
  auto val_n = normalized_copy(ds.val_samples, ds.normalizer);

  DeepStateModel model(layout, cfg.task, ds.world.sensors, cfg.model);
  AdamOptimizer adam(model.params());
  TrainResult result =
      train(model, train_n, val_n, cfg.train, ForwardOptions{}, &std::cout, &adam);

  ensure_out_dir(cfg);
  CheckpointMeta meta;
  meta.dataset_version = ds.version;
  meta.epoch = result.best_epoch;
  meta.layout_json = layout.to_json();
  meta.normalizer_json = ds.normalizer.to_json();
  const std::string ckpt = (fs::path(cfg.out_dir) / "model.ckpt").string();
  save_checkpoint(ckpt, model.params(), adam, meta);
  write_file((fs::path(cfg.out_dir) / "history.json").string(),
             history_to_json(result.history));
  std::cout << "best epoch " << result.best_epoch << " val_l1 "
            << result.best_val_l1 << "\nwrote " << ckpt << "\n";
}

void cmd_evaluate(RunConfig cfg, const std::string& checkpoint_path,
                  const std::vector<double>& query_ratios, int dump_window) {
  cfg.resolve();
  LoadedCheckpoint ck = load_checkpoint(checkpoint_path);
  Dataset ds = load_dataset(cfg);
  const FeatureLayout layout = FeatureLayout::from_json(ck.meta.layout_json);
  const Normalizer norm = Normalizer::from_json(ck.meta.normalizer_json);

  DeepStateModel model(layout, cfg.task, ds.world.sensors, cfg.model);
  restore_params(model.params(), ck.params);
  ensure_out_dir(cfg);

  const CoordMap coords = sensor_coordinates(ds.world.sensors);
  auto full_report = [&](const std::vector<TrafficSample>& samples) {
    json j;
    j["model"] = report_json(evaluate_model(model, norm, samples, cfg.task));
    j["mean_baseline"] = report_json(evaluate_baseline(
        samples, cfg.task,
        [&](const TrafficSample& s) {
          return mean_observation_baseline(s, cfg.task);
        }));
    j["persistence_baseline"] = report_json(evaluate_baseline(
        samples, cfg.task,
        [&](const TrafficSample& s) { return persistence_baseline(s, cfg.task); }));
    j["nearest_baseline"] = report_json(evaluate_baseline(
        samples, cfg.task, [&](const TrafficSample& s) {
          return nearest_observation_baseline(s, cfg.task, coords);
        }));
    return j;
  };

  json out = full_report(ds.test_samples);
  out["dataset_version"] = ds.version;
  out["checkpoint_epoch"] = ck.meta.epoch;
  write_file((fs::path(cfg.out_dir) / "evaluate.json").string(), out.dump(2));
  std::cout << out["model"].dump(2) << "\n";

  if (!query_ratios.empty()) {
    json sweep = json::array();
    for (double r : query_ratios) {
      if (r <= 0.0 || r >= 1.0)
        throw std::invalid_argument("query ratios must lie in (0,1)");
      SplitSpec sp = cfg.split;
      sp.query_fraction = r;
      auto res = make_windows(ds.world, layout, cfg.task, sp, Split::test,
                              cfg.world.seed);
      json entry = full_report(res.samples);
      entry["query_ratio"] = r;
      std::ostringstream name;
      name << "evaluate_ratio_" << std::fixed << std::setprecision(2) << r
           << ".json";
      write_file((fs::path(cfg.out_dir) / name.str()).string(), entry.dump(2));
      sweep.push_back(entry);
    }
    json sw;
    sw["sweep"] = sweep;
    write_file((fs::path(cfg.out_dir) / "sweep.json").string(), sw.dump(2));
  }

  if (dump_window >= 0) {
    if (dump_window >= static_cast<int>(ds.test_samples.size()))
      throw std::invalid_argument("--dump-window out of range");
    TrafficSample s = ds.test_samples[dump_window];
    norm.apply(s);
    const std::string text = model.dump_diagnostics(s);
    write_file((fs::path(cfg.out_dir) / "window_dump.json").string(), text);
    std::cout << text << "\n";
  }
}

void cmd_ablate(RunConfig cfg) {
  cfg.resolve();
  Dataset ds = load_dataset(cfg);
  const FeatureLayout layout = FeatureLayout::standard();
  auto train_n = normalized_copy(ds.train_samples, ds.normalizer);
  auto val_n = normalized_copy(ds.val_samples, ds.normalizer);
  ensure_out_dir(cfg);

  struct Variant {
    std::string name;
    ForwardOptions opts;
    bool zero_gamma = false;
  };
  const std::vector<Variant> variants = {
      {"full", {}, false},
      {"no_dynamic", {.drop_dynamic = true}, false},
      {"no_static", {.drop_static = true}, false},
      {"no_gcn", {.skip_gcn = true}, false},
      {"no_l2", {}, true},
  };

  json table = json::array();
  std::cout << "variant     mae_speed  mae_flow   rmse_speed rmse_flow\n";
  for (const auto& v : variants) {
    DeepStateModel model(layout, cfg.task, ds.world.sensors, cfg.model);
    TrainConfig tc = cfg.train;
    if (v.zero_gamma) tc.gamma = 0.0;
    TrainResult tr = train(model, train_n, val_n, tc, v.opts, nullptr);
    MetricReport rep = evaluate_model(model, ds.normalizer, ds.test_samples,
                                      cfg.task, v.opts);
    json row = report_json(rep);
    row["variant"] = v.name;
    row["best_epoch"] = tr.best_epoch;
    row["gcn_invocations"] = model.gcn_invocations();
    table.push_back(row);
    std::cout << std::left << std::setw(12) << v.name << std::setw(11)
              << rep.mae_speed << std::setw(11) << rep.mae_flow << std::setw(11)
              << rep.rmse_speed << rep.rmse_flow << "\n";
  }
  json out;
  out["ablations"] = table;
  write_file((fs::path(cfg.out_dir) / "ablate.json").string(), out.dump(2));
}

std::vector<BenchmarkRow> run_benchmark(const RunConfig& cfg,
                                        const std::vector<int>& sensor_counts,
                                        int repetitions) {
  if (repetitions < 2)
    throw std::invalid_argument("benchmark requires at least 2 repetitions");
  if (sensor_counts.empty())
    throw std::invalid_argument("benchmark requires at least one sensor count");

  std::vector<BenchmarkRow> rows;
  const int n_batches = 3;
  for (int n_sensors : sensor_counts) {
    RunConfig c = cfg;
    c.world.n_sensors = n_sensors;
    c.world.duration_days = 1;
    c.resolve();
    World world = generate_world(c.world);
    const FeatureLayout layout = FeatureLayout::standard();
    auto res = make_windows(world, layout, c.task, c.split, Split::train,
                            c.world.seed);
    const int need = n_batches * c.train.batch_size;
    if (static_cast<int>(res.samples.size()) < need)
      throw std::runtime_error("benchmark world too small for " +
                               std::to_string(need) + " windows");
    std::vector<TrafficSample> samples(res.samples.begin(),
                                       res.samples.begin() + need);
    Normalizer norm = Normalizer::fit(samples, layout);
    for (auto& s : samples) norm.apply(s);
    std::vector<std::vector<const TrafficSample*>> batches(n_batches);
    for (int b = 0; b < n_batches; ++b)
      for (int i = 0; i < c.train.batch_size; ++i)
        batches[b].push_back(&samples[b * c.train.batch_size + i]);

    BenchmarkRow row;
    row.n_sensors = n_sensors;

    {
      DeepStateModel model(layout, c.task, world.sensors, c.model);
      AdamOptimizer adam(model.params());
      train_step(model, batches[0], adam, c.train, 0, {});  // warm-up
      std::vector<double> times;
      for (int rep = 0; rep < repetitions; ++rep) {
        const auto t0 = std::chrono::steady_clock::now();
        for (const auto& b : batches) train_step(model, b, adam, c.train, 0, {});
        times.push_back(std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0)
                            .count());
      }
      const double mean =
          std::accumulate(times.begin(), times.end(), 0.0) / times.size();
      double var = 0;
      for (double t : times) var += (t - mean) * (t - mean);
      row.model_mean_s = mean;
      row.model_sd_s = std::sqrt(var / times.size());
    }
    {
      DenseAttentionReference ref(layout.f_total(), c.task.horizon, 32,
                                  c.model.seed);
      AdamOptimizer adam(ref.params());
      auto ref_step = [&](const std::vector<const TrafficSample*>& batch) {
        ad::Tape tape;
        ParamContext p(tape, ref.params());
        ad::Var acc{};
        for (const TrafficSample* s : batch) {
          ad::Var l = ref.loss(p, *s);
          acc = acc.valid() ? ad::add(tape, acc, l) : l;
        }
        ad::Var mean = ad::scale(tape, acc, 1.0 / batch.size());
        tape.backward(mean);
        std::map<std::string, Mat> grads;
        for (const auto& [name, var] : p.bound()) grads[name] = tape.grad(var);
        adam.step(ref.params(), grads, c.train.learning_rate, c.train.clip_norm);
      };
      ref_step(batches[0]);  // warm-up
      std::vector<double> times;
      for (int rep = 0; rep < repetitions; ++rep) {
        const auto t0 = std::chrono::steady_clock::now();
        for (const auto& b : batches) ref_step(b);
        times.push_back(std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0)
                            .count());
      }
      const double mean =
          std::accumulate(times.begin(), times.end(), 0.0) / times.size();
      double var = 0;
      for (double t : times) var += (t - mean) * (t - mean);
      row.reference_mean_s = mean;
      row.reference_sd_s = std::sqrt(var / times.size());
    }
    rows.push_back(row);
  }
  return rows;
}

void cmd_benchmark(RunConfig cfg, const std::vector<int>& sensor_counts,
                   int repetitions) {
  cfg.resolve();
  auto rows = run_benchmark(cfg, sensor_counts, repetitions);
  ensure_out_dir(cfg);

  json table = json::array();
  Series model_series{"deep_state", {}, {}};
  Series ref_series{"dense_reference", {}, {}};
  std::cout << "sensors  model_s(mean±sd)     reference_s(mean±sd)\n";
  for (const auto& r : rows) {
    table.push_back({{"n_sensors", r.n_sensors},
                     {"model_mean_s", r.model_mean_s},
                     {"model_sd_s", r.model_sd_s},
                     {"reference_mean_s", r.reference_mean_s},
                     {"reference_sd_s", r.reference_sd_s}});
    model_series.x.push_back(r.n_sensors);
    model_series.y.push_back(r.model_mean_s);
    ref_series.x.push_back(r.n_sensors);
    ref_series.y.push_back(r.reference_mean_s);
    std::cout << std::left << std::setw(9) << r.n_sensors << std::setw(21)
              << (std::to_string(r.model_mean_s) + " ± " +
                  std::to_string(r.model_sd_s))
              << r.reference_mean_s << " ± " << r.reference_sd_s << "\n";
  }
  json out;
  out["benchmark"] = table;
  out["repetitions"] = repetitions;
  write_file((fs::path(cfg.out_dir) / "benchmark.json").string(), out.dump(2));
  write_line_plot((fs::path(cfg.out_dir) / "benchmark.svg").string(),
                  "Per-epoch training time", "sensors", "seconds",
                  {model_series, ref_series});
}

void cmd_plot(RunConfig cfg, const std::vector<std::string>& inputs) {
  cfg.resolve();
  if (inputs.empty()) throw std::invalid_argument("plot requires input files");
  fs::create_directories(cfg.out_dir);
  for (const auto& input : inputs) {
    json j;
    try {
      j = json::parse(read_file(input));
    } catch (const json::exception& e) {
      throw std::invalid_argument(input + ": " + e.what());
    }
    const std::string stem = fs::path(input).stem().string();
    const std::string svg =
        (fs::path(cfg.out_dir) / (stem + ".svg")).string();
    if (j.is_array()) {  // training history
      if (j.empty()) throw std::invalid_argument(input + ": empty history");
      Series train_s{"train_loss", {}, {}}, val_s{"val_l1", {}, {}};
      for (const auto& e : j) {
        train_s.x.push_back(e.at("epoch").get<double>());
        train_s.y.push_back(e.at("train_loss").get<double>());
        val_s.x.push_back(e.at("epoch").get<double>());
        val_s.y.push_back(e.at("val_l1").get<double>());
      }
      write_line_plot(svg, "Training history", "epoch", "loss",
                      {train_s, val_s});
    } else if (j.contains("sweep")) {
      Series model_s{"model_mae_speed", {}, {}}, near_s{"nearest_mae_speed", {}, {}};
      for (const auto& e : j["sweep"]) {
        model_s.x.push_back(e.at("query_ratio").get<double>());
        model_s.y.push_back(e.at("model").at("speed").at("mae").get<double>());
        near_s.x.push_back(e.at("query_ratio").get<double>());
        near_s.y.push_back(
            e.at("nearest_baseline").at("speed").at("mae").get<double>());
      }
      if (model_s.x.empty())
        throw std::invalid_argument(input + ": empty sweep");
      write_line_plot(svg, "Speed MAE vs query ratio", "query ratio", "MAE",
                      {model_s, near_s});
    } else if (j.contains("benchmark")) {
      Series model_s{"deep_state", {}, {}}, ref_s{"dense_reference", {}, {}};
      for (const auto& e : j["benchmark"]) {
        model_s.x.push_back(e.at("n_sensors").get<double>());
        model_s.y.push_back(e.at("model_mean_s").get<double>());
        ref_s.x.push_back(e.at("n_sensors").get<double>());
        ref_s.y.push_back(e.at("reference_mean_s").get<double>());
      }
      if (model_s.x.empty())
        throw std::invalid_argument(input + ": empty benchmark");
      write_line_plot(svg, "Per-epoch training time", "sensors", "seconds",
                      {model_s, ref_s});
    } else {
      throw std::invalid_argument(input + ": unrecognized plot input");
    }
    std::cout << "wrote " << svg << "\n";
  }
}

void write_line_plot(const std::string& svg_path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<Series>& series) {
  if (series.empty()) throw std::invalid_argument("plot without series");
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size() || s.x.empty())
      throw std::invalid_argument("plot series must be non-empty and aligned");
    for (double v : s.x) xmin = std::min(xmin, v), xmax = std::max(xmax, v);
    for (double v : s.y) ymin = std::min(ymin, v), ymax = std::max(ymax, v);
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;

  const double w = 640, h = 420, ml = 70, mr = 20, mt = 40, mb = 50;
  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); };
  auto py = [&](double y) {
    return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb);
  };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#8c564b"};

  std::ostringstream os;
  os << std::setprecision(10);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
     << "\" height=\"" << h << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
  os << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        "font-size=\"16\">"
     << title << "</text>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr
     << "\" y2=\"" << h - mb << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
     << "\" y2=\"" << h - mb << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 4.0;
    const double yv = ymin + (ymax - ymin) * i / 4.0;
    os << "<text x=\"" << px(xv) << "\" y=\"" << h - mb + 18
       << "\" text-anchor=\"middle\" font-size=\"11\">" << xv << "</text>\n";
    os << "<text x=\"" << ml - 8 << "\" y=\"" << py(yv) + 4
       << "\" text-anchor=\"end\" font-size=\"11\">" << yv << "</text>\n";
  }
  os << "<text x=\"" << (ml + w - mr) / 2 << "\" y=\"" << h - 10
     << "\" text-anchor=\"middle\" font-size=\"13\">" << x_label << "</text>\n";
  os << "<text x=\"16\" y=\"" << (mt + h - mb) / 2
     << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
     << (mt + h - mb) / 2 << ")\">" << y_label << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kColors[i % 5];
    os << "<polyline fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"2\" points=\"";
    for (std::size_t k = 0; k < series[i].x.size(); ++k)
      os << px(series[i].x[k]) << "," << py(series[i].y[k]) << " ";
    os << "\"/>\n";
    os << "<text x=\"" << w - mr - 5 << "\" y=\"" << mt + 16 * (i + 1)
       << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << color << "\">"
       << series[i].label << "</text>\n";
  }
  os << "</svg>\n";
  write_file(svg_path, os.str());

  // Data sidecar so tests assert on numbers, not pixels.
  std::ostringstream tsv;
  tsv << std::setprecision(17) << "x";
  for (const auto& s : series) tsv << "\t" << s.label;
  tsv << "\n";
  for (std::size_t k = 0; k < series.front().x.size(); ++k) {
    tsv << series.front().x[k];
    for (const auto& s : series)
      tsv << "\t" << (k < s.y.size() ? s.y[k] : 0.0);
    tsv << "\n";
  }
  const std::string tsv_path =
      (fs::path(svg_path).parent_path() /
       (fs::path(svg_path).stem().string() + ".tsv"))
          .string();
  write_file(tsv_path, tsv.str());
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Deep-state traffic forecasting and reconstruction harness"};
  app.require_subcommand(1);

  std::string config_path, out_dir, mode, checkpoint;
  std::uint64_t seed = 0;
  bool seed_set = false, mode_set = false, out_set = false;
  std::vector<double> query_ratios;
  std::vector<int> sensor_counts = {200, 1000, 2000};
  std::vector<std::string> plot_inputs;
  int dump_window = -1, repetitions = 3;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "RunConfig file")->required();
    cmd->add_option("--out", out_dir)->each([&](const std::string&) {
      out_set = true;
    });
    cmd->add_option("--seed", seed)->each([&](const std::string&) {
      seed_set = true;
    });
    cmd->add_option("--mode", mode)->each([&](const std::string&) {
      mode_set = true;
    });
  };

  auto* gen = app.add_subcommand("generate-data");
  add_common(gen);
  auto* tr = app.add_subcommand("train");
  add_common(tr);
  auto* ev = app.add_subcommand("evaluate");
  add_common(ev);
  ev->add_option("--checkpoint", checkpoint);
  ev->add_option("--query-ratios", query_ratios)->delimiter(',');
  ev->add_option("--dump-window", dump_window);
  auto* ab = app.add_subcommand("ablate");
  add_common(ab);
  auto* be = app.add_subcommand("benchmark");
  add_common(be);
  be->add_option("--sensor-counts", sensor_counts)->delimiter(',');
  be->add_option("--reps", repetitions);
  auto* pl = app.add_subcommand("plot");
  add_common(pl);
  pl->add_option("inputs", plot_inputs);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    RunConfig cfg = RunConfig::from_file(config_path);
    if (out_set) cfg.out_dir = out_dir;
    if (seed_set) {
      cfg.world.seed = seed;
      cfg.model.seed = seed;
      cfg.train.seed = seed;
    }
    if (mode_set) {
      if (mode == "reconstruct")
        cfg.task.mode = Mode::reconstruct;
      else if (mode == "forecast")
        cfg.task.mode = Mode::forecast;
      else
        throw std::invalid_argument("--mode must be reconstruct or forecast");
    }
    if (gen->parsed()) cmd_generate_data(cfg);
    if (tr->parsed()) cmd_train(cfg);
    if (ev->parsed()) {
      if (checkpoint.empty())
        checkpoint = (fs::path(cfg.out_dir) / "model.ckpt").string();
      cmd_evaluate(cfg, checkpoint, query_ratios, dump_window);
    }
    if (ab->parsed()) cmd_ablate(cfg);
    if (be->parsed()) cmd_benchmark(cfg, sensor_counts, repetitions);
    if (pl->parsed()) cmd_plot(cfg, plot_inputs);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace dsgnn

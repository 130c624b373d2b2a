#ifndef DSGNN_CLI_HPP
#define DSGNN_CLI_HPP

#include <functional>
#include <string>
#include <vector>

#include "dsgnn/baselines.hpp"
#include "dsgnn/head.hpp"
#include "dsgnn/model.hpp"
#include "dsgnn/synthdata.hpp"
#include "dsgnn/trainer.hpp"

namespace dsgnn {

/// One config file drives every command. Unknown keys are rejected; the
/// fully-resolved config is echoed into the output directory.
struct RunConfig {
  WorldConfig world;
  double train_fraction = 0.6;  // of the generated time range
  double val_fraction = 0.2;    // remainder is test
  SplitSpec split;              // resolved from the fractions
  ModelConfig model;
  TrainConfig train;
  TaskMode task;
  std::string data_dir = "data";
  std::string out_dir = "out";

  /// Derives split time ranges and defaulted fields from `world`.
  void resolve();

  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
  static RunConfig from_file(const std::string& path);
};

struct Dataset {
  World world;
  std::vector<TrafficSample> train_samples, val_samples, test_samples;  // raw
  Normalizer normalizer;  // fit on the train split
  std::string version;
};

/// Ingests the CSVs under cfg.data_dir and windows all three splits.
/// Window materialization uses up to TOOL_NUM_WORKERS threads but the
/// output order is independent of the worker count.
Dataset load_dataset(const RunConfig& cfg);

/// Metric grid on raw units: normalize a copy, run the model, invert the
/// predictions, accumulate against the raw targets.
MetricReport evaluate_model(const DeepStateModel& model, const Normalizer& norm,
                            const std::vector<TrafficSample>& raw_samples,
                            const TaskMode& task,
                            const ForwardOptions& opts = {});

MetricReport evaluate_baseline(
    const std::vector<TrafficSample>& raw_samples, const TaskMode& task,
    const std::function<Mat(const TrafficSample&)>& predict);

// Commands. Each throws std::invalid_argument for config/usage problems
// and std::runtime_error for runtime failures.
void cmd_generate_data(RunConfig cfg);
void cmd_train(RunConfig cfg);
void cmd_evaluate(RunConfig cfg, const std::string& checkpoint_path,
                  const std::vector<double>& query_ratios,
                  int dump_window = -1);
void cmd_ablate(RunConfig cfg);
void cmd_benchmark(RunConfig cfg, const std::vector<int>& sensor_counts,
                   int repetitions = 3);
void cmd_plot(RunConfig cfg, const std::vector<std::string>& inputs);

struct BenchmarkRow {
  int n_sensors = 0;
  double model_mean_s = 0, model_sd_s = 0;
  double reference_mean_s = 0, reference_sd_s = 0;
};

/// Core of cmd_benchmark, reusable from tests: per-epoch wall time over
/// pre-materialized batches, mean and sd over `repetitions` runs.
std::vector<BenchmarkRow> run_benchmark(const RunConfig& cfg,
                                        const std::vector<int>& sensor_counts,
                                        int repetitions);

// Plot emission: an SVG image plus a .tsv data sidecar next to it.
struct Series {
  std::string label;
  std::vector<double> x, y;
};

void write_line_plot(const std::string& svg_path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<Series>& series);

/// Full grammar; returns the process exit code (0 ok, 1 usage/config
/// error, 2 runtime failure).
int run_cli(int argc, char** argv);

}  // namespace dsgnn

#endif

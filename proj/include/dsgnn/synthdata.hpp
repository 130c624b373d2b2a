#ifndef DSGNN_SYNTHDATA_HPP
#define DSGNN_SYNTHDATA_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dsgnn/datamodel.hpp"

namespace dsgnn {

struct WorldConfig {
  int n_neighborhoods = 4;
  int n_freeways = 2;
  int n_sensors = 60;
  int timestamp_interval_min = 5;
  int duration_days = 7;
  std::uint64_t seed = 1;
  double outage_rate = 0.05;  // per sensor-day
  double rain_prob = 0.08;    // per neighborhood-hour
  std::int64_t start_time = 1700438400;  // 2023-11-20T00:00:00Z, a Monday

  std::vector<std::string> validate() const;
};

/// Dense sensor-by-time reading grid. Rows are timestamps, columns follow
/// sensor_ids order.
struct ReadingTable {
  std::vector<std::string> sensor_ids;
  std::vector<std::int64_t> timestamps;
  Mat speed;  // T x S, mph
  Mat flow;   // T x S, vehicles per interval
  Mat valid;  // T x S, 0/1

  int sensor_index(const std::string& id) const;
};

/// Per-neighborhood hourly context grid.
struct ContextTable {
  std::vector<std::string> neighborhood_ids;
  std::vector<std::int64_t> timestamps;  // hourly
  Mat precip;  // T x N, mm
  Mat temp;    // T x N, celsius
  Mat aqi;     // T x N

  int neighborhood_index(const std::string& id) const;
  /// Row for the hour containing `ts` (throws if out of range).
  int hour_row(std::int64_t ts) const;
};

struct World {
  std::vector<SensorContext> sensors;
  ReadingTable readings;
  ContextTable context;
};

/// Deterministic synthetic traffic world: daily double-peak profiles per
/// road class, per-neighborhood latent factors, lag-1 propagation along
/// freeway chains, multiplicative rain slowdown (x0.8), observation
/// noise, and outage intervals.
World generate_world(const WorldConfig& cfg);

inline constexpr double kRainSlowdown = 0.8;

struct TimeRange {
  std::int64_t begin = 0;  // inclusive
  std::int64_t end = 0;    // exclusive
  bool contains(std::int64_t t) const { return t >= begin && t < end; }
};

struct SplitSpec {
  TimeRange train, val, test;
  int min_valid_sensors = 0;  // 0 means "half the sensors"
  double query_fraction = 0.1;
  int window_stride = 1;  // in timestamps

  std::vector<std::string> validate() const;
};

enum class Split { train, val, test };

struct WindowingResult {
  std::vector<TrafficSample> samples;
  std::vector<std::string> diagnostics;  // non-empty when the stream is empty
};

/// Emits one TrafficSample per admissible window start in the split range.
/// Deterministic given (split, seed): the observation/query partition of a
/// window depends only on (seed, window_id).
WindowingResult make_windows(const World& world, const FeatureLayout& layout,
                             const TaskMode& task, const SplitSpec& split,
                             Split which, std::uint64_t seed);

/// Per-feature affine z-scoring over the full feature layout. One-hot and
/// sin/cos features pass through; zero-variance features fall back to
/// scale 1.
class Normalizer {
 public:
  static Normalizer fit(const std::vector<TrafficSample>& train_samples,
                        const FeatureLayout& layout);

  void apply(TrafficSample& s) const;    // in place, raw -> normalized
  void invert(TrafficSample& s) const;   // in place, normalized -> raw

  /// De-normalizes a |Q| x (H*2) prediction block (traffic features only).
  Mat invert_predictions(const Mat& y_norm) const;
  Mat normalize_targets(const Mat& y_raw) const;

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& stdev() const { return std_; }

  std::string to_json() const;
  static Normalizer from_json(const std::string& text);

 private:
  Eigen::VectorXd mean_, std_;          // length f_total
  std::vector<std::uint8_t> scaled_;    // per feature flag
  int f_static_ = 0;
};

// CSV round trip (schemas: see README / the files themselves).
void write_world_csv(const World& world, const std::string& dir);
World ingest_csv(const std::string& sensors_path,
                 const std::string& readings_path,
                 const std::string& context_path);

}  // namespace dsgnn

#endif

#ifndef DSGNN_DATAMODEL_HPP
#define DSGNN_DATAMODEL_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dsgnn {

using Mat = Eigen::MatrixXd;

enum class RoadClass { freeway, arterial };

std::string to_string(RoadClass rc);
RoadClass road_class_from_string(const std::string& s);

/// Static per-sensor metadata. Pure value type.
struct SensorContext {
  std::string sensor_id;
  double lat = 0.0;   // degrees
  double lon = 0.0;   // degrees
  RoadClass road_class = RoadClass::arterial;
  int lanes = 1;
  double max_speed = 30.0;  // mph
  std::string neighborhood_id;
  std::optional<std::string> freeway_id;

  /// Checks the field invariants; returns violation strings, empty if ok.
  std::vector<std::string> validate() const;
};

// Discrete buckets used for semantic one-hot encodings and semantic DSNs.
int lanes_bucket(int lanes);          // {1,2,3,4+} -> 0..3
int max_speed_bucket(double mph);     // {<=30, 35-45, 50-60, >=65} -> 0..3
inline constexpr int kLanesBuckets = 4;
inline constexpr int kSpeedBuckets = 4;
inline constexpr int kRoadClasses = 2;

/// Fixed feature orderings for a dataset version. Orderings are part of
/// the on-disk metadata and must round-trip bit-exact.
struct FeatureLayout {
  std::vector<std::string> traffic_features;  // [speed, flow]
  std::vector<std::string> static_features;
  std::vector<std::string> dynamic_features;
  int f_static = 0;
  int f_dynamic = 0;

  int f_total() const { return 2 + f_static + f_dynamic; }

  static FeatureLayout standard();

  std::string to_json() const;
  static FeatureLayout from_json(const std::string& text);

  bool operator==(const FeatureLayout&) const = default;
};

/// Indices of continuous dynamic features that get z-scored (the rest,
/// sin/cos and one-hots, pass through).
std::vector<int> scalable_dynamic_features(const FeatureLayout& layout);

/// One-hot static feature row (length f_static) for the standard layout.
Eigen::RowVectorXd encode_static(const SensorContext& ctx);

enum class Mode { reconstruct, forecast };

std::string to_string(Mode m);

struct TaskMode {
  Mode mode = Mode::reconstruct;
  int window = 12;   // W
  int horizon = 12;  // H
};

/// One windowed example. Tensors use [timestep] vectors of
/// (rows x features) matrices; targets are |Q| x (H*2) with column h*2+f.
struct TrafficSample {
  std::int64_t window_id = 0;
  std::vector<Mat> x_obs;    // W entries, |S| x F_total
  Mat obs_mask;              // |S| x W, 0/1
  std::vector<Mat> x_query;  // W entries, |Q| x (F_total - 2)
  Mat y_target;              // |Q| x (H*2), raw units
  Mat target_mask;           // |Q| x H, 0/1
  Eigen::RowVectorXd global_context;
  std::vector<std::string> sensor_ids_obs;
  std::vector<std::string> sensor_ids_query;
};

/// Total function: names every violated invariant, empty list iff valid.
std::vector<std::string> validate_sample(const TrafficSample& sample,
                                         const FeatureLayout& layout,
                                         const TaskMode& task);

/// [sin(2*pi*m/1440), cos(2*pi*m/1440), onehot(dow)] with m = minute of
/// day and Monday = index 0; length 9.
Eigen::RowVectorXd encode_global_context(std::int64_t unix_seconds);

// Time helpers (UTC).
std::int64_t parse_iso8601(const std::string& s);  // throws on bad input
std::string format_iso8601(std::int64_t unix_seconds);
int minute_of_day(std::int64_t unix_seconds);
int day_of_week(std::int64_t unix_seconds);  // Monday = 0

}  // namespace dsgnn

#endif

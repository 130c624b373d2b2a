#include "dsgnn/datamodel.hpp"

#include <json.hpp>

#include <cmath>
#include <ctime>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

namespace dsgnn {

std::string to_string(RoadClass rc) {
  return rc == RoadClass::freeway ? "freeway" : "arterial";
}

RoadClass road_class_from_string(const std::string& s) {
  if (s == "freeway") return RoadClass::freeway;
  if (s == "arterial") return RoadClass::arterial;
  throw std::invalid_argument("unknown road_class: " + s);
}

std::string to_string(Mode m) {
  return m == Mode::reconstruct ? "reconstruct" : "forecast";
}

std::vector<std::string> SensorContext::validate() const {
  std::vector<std::string> v;
  if (lat < -90.0 || lat > 90.0) v.push_back(sensor_id + ": lat out of range");
  if (lon < -180.0 || lon > 180.0) v.push_back(sensor_id + ": lon out of range");
  if (lanes < 1) v.push_back(sensor_id + ": lanes < 1");
  if (max_speed <= 0.0) v.push_back(sensor_id + ": max_speed <= 0");
  const bool is_fwy = road_class == RoadClass::freeway;
  if (is_fwy != freeway_id.has_value())
    v.push_back(sensor_id + ": freeway_id present iff road_class=freeway violated");
  return v;
}

int lanes_bucket(int lanes) { return lanes >= 4 ? 3 : lanes - 1; }

int max_speed_bucket(double mph) {
  if (mph <= 30.0) return 0;
  if (mph <= 45.0) return 1;
  if (mph <= 60.0) return 2;
  return 3;
}

FeatureLayout FeatureLayout::standard() {
  FeatureLayout l;
  l.traffic_features = {"speed", "flow"};
  l.static_features = {"road_class=freeway", "road_class=arterial",
                       "lanes=1",  "lanes=2",  "lanes=3",  "lanes=4+",
                       "speed<=30", "speed=35-45", "speed=50-60", "speed>=65"};
  l.dynamic_features = {"precipitation", "temperature", "aqi",
                        "time_of_day_sin", "time_of_day_cos",
                        "dow=mon", "dow=tue", "dow=wed", "dow=thu",
                        "dow=fri", "dow=sat", "dow=sun"};
  l.f_static = static_cast<int>(l.static_features.size());
  l.f_dynamic = static_cast<int>(l.dynamic_features.size());
  return l;
}

std::string FeatureLayout::to_json() const {
  nlohmann::json j;
  j["traffic_features"] = traffic_features;
  j["static_features"] = static_features;
  j["dynamic_features"] = dynamic_features;
  j["f_static"] = f_static;
  j["f_dynamic"] = f_dynamic;
  return j.dump(2);
}

FeatureLayout FeatureLayout::from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  FeatureLayout l;
  l.traffic_features = j.at("traffic_features").get<std::vector<std::string>>();
  l.static_features = j.at("static_features").get<std::vector<std::string>>();
  l.dynamic_features = j.at("dynamic_features").get<std::vector<std::string>>();
  l.f_static = j.at("f_static").get<int>();
  l.f_dynamic = j.at("f_dynamic").get<int>();
  if (l.f_total() != 2 + l.f_static + l.f_dynamic)
    throw std::invalid_argument("FeatureLayout: inconsistent feature counts");
  return l;
}

std::vector<int> scalable_dynamic_features(const FeatureLayout& layout) {
  std::vector<int> idx;
  for (int i = 0; i < layout.f_dynamic; ++i) {
    const std::string& name = layout.dynamic_features[i];
    if (name.rfind("dow=", 0) == 0 || name.rfind("time_of_day", 0) == 0) continue;
    idx.push_back(i);
  }
  return idx;
}

Eigen::RowVectorXd encode_static(const SensorContext& ctx) {
  Eigen::RowVectorXd out =
      Eigen::RowVectorXd::Zero(kRoadClasses + kLanesBuckets + kSpeedBuckets);
  out(ctx.road_class == RoadClass::freeway ? 0 : 1) = 1.0;
  out(kRoadClasses + lanes_bucket(ctx.lanes)) = 1.0;
  out(kRoadClasses + kLanesBuckets + max_speed_bucket(ctx.max_speed)) = 1.0;
  return out;
}

std::vector<std::string> validate_sample(const TrafficSample& sample,
                                         const FeatureLayout& layout,
                                         const TaskMode& task) {
  std::vector<std::string> v;
  const int w = task.window;
  const int h = task.horizon;
  if (static_cast<int>(sample.x_obs.size()) != w)
    v.push_back("x_obs timestep count != W");
  if (static_cast<int>(sample.x_query.size()) != w)
    v.push_back("x_query timestep count != W");
  if (task.mode == Mode::reconstruct && h > w)
    v.push_back("H <= W violated for reconstruct mode");

  const auto n_obs = static_cast<Eigen::Index>(sample.sensor_ids_obs.size());
  const auto n_query = static_cast<Eigen::Index>(sample.sensor_ids_query.size());
  for (const auto& m : sample.x_obs) {
    if (m.rows() != n_obs || m.cols() != layout.f_total()) {
      v.push_back("x_obs shape mismatch");
      break;
    }
  }
  for (const auto& m : sample.x_query) {
    if (m.rows() != n_query || m.cols() != layout.f_total() - 2) {
      v.push_back("x_query must carry context features only (F_total - 2)");
      break;
    }
  }
  if (sample.obs_mask.rows() != n_obs || sample.obs_mask.cols() != w)
    v.push_back("obs_mask shape mismatch");
  if (sample.y_target.rows() != n_query || sample.y_target.cols() != 2 * h)
    v.push_back("y_target shape mismatch");
  if (sample.target_mask.rows() != n_query || sample.target_mask.cols() != h)
    v.push_back("target_mask shape mismatch");

  std::set<std::string> obs(sample.sensor_ids_obs.begin(), sample.sensor_ids_obs.end());
  for (const auto& id : sample.sensor_ids_query)
    if (obs.count(id))
      v.push_back("observation/query disjointness violated at \"" + id + "\"");
  return v;
}

Eigen::RowVectorXd encode_global_context(std::int64_t unix_seconds) {
  const int m = minute_of_day(unix_seconds);
  const double ang = 2.0 * std::numbers::pi * m / 1440.0;
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(9);
  out(0) = std::sin(ang);
  out(1) = std::cos(ang);
  out(2 + day_of_week(unix_seconds)) = 1.0;
  return out;
}

std::int64_t parse_iso8601(const std::string& s) {
  std::tm tm{};
  std::istringstream is(s);
  is >> std::get_time(&tm, "%Y-%m-%dT%H:%M:%S");
  if (is.fail()) throw std::invalid_argument("bad ISO8601 timestamp: " + s);
  char z = 0;
  is >> z;
  if (z != 'Z') throw std::invalid_argument("timestamp must end in Z (UTC): " + s);
  return static_cast<std::int64_t>(timegm(&tm));
}

std::string format_iso8601(std::int64_t unix_seconds) {
  std::time_t tt = static_cast<std::time_t>(unix_seconds);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

int minute_of_day(std::int64_t unix_seconds) {
  std::int64_t sec = ((unix_seconds % 86400) + 86400) % 86400;
  return static_cast<int>(sec / 60);
}

int day_of_week(std::int64_t unix_seconds) {
  std::int64_t days = unix_seconds / 86400;
  if (unix_seconds % 86400 < 0) --days;
  return static_cast<int>(((days + 3) % 7 + 7) % 7);
}

}  // namespace dsgnn

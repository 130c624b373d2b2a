#include "dsgnn/synthdata.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace dsgnn {

namespace {

constexpr double kPi = std::numbers::pi;

double daily_profile(int minute_of_day) {
  // Two rush-hour bumps, unit peak height.
  auto bump = [&](double center_min, double sigma_min) {
    double d = minute_of_day - center_min;
    return std::exp(-d * d / (2.0 * sigma_min * sigma_min));
  };
  return bump(8 * 60, 90) + bump(17.5 * 60, 90);
}

std::string pad_id(const char* prefix, int i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%0*d", prefix, width, i);
  return buf;
}

}  // namespace

std::vector<std::string> WorldConfig::validate() const {
  std::vector<std::string> v;
  if (n_neighborhoods < 1) v.push_back("n_neighborhoods >= 1 violated");
  if (n_freeways < 1) v.push_back("n_freeways >= 1 violated");
  if (n_sensors < 1) v.push_back("n_sensors >= 1 violated");
  if (n_sensors < n_neighborhoods)
    v.push_back("n_sensors < n_neighborhoods");
  if (timestamp_interval_min < 1) v.push_back("timestamp_interval >= 1 violated");
  if (duration_days < 1) v.push_back("duration >= 1 violated");
  if (outage_rate < 0.0 || outage_rate > 1.0) v.push_back("outage_rate not in [0,1]");
  if (rain_prob < 0.0 || rain_prob > 1.0) v.push_back("rain_prob not in [0,1]");
  return v;
}

int ReadingTable::sensor_index(const std::string& id) const {
  auto it = std::find(sensor_ids.begin(), sensor_ids.end(), id);
  return it == sensor_ids.end() ? -1 : static_cast<int>(it - sensor_ids.begin());
}

int ContextTable::neighborhood_index(const std::string& id) const {
  auto it = std::find(neighborhood_ids.begin(), neighborhood_ids.end(), id);
  return it == neighborhood_ids.end() ? -1
                                      : static_cast<int>(it - neighborhood_ids.begin());
}

int ContextTable::hour_row(std::int64_t ts) const {
  if (timestamps.empty()) throw std::out_of_range("empty context table");
  auto idx = (ts - timestamps.front()) / 3600;
  if (idx < 0 || idx >= static_cast<std::int64_t>(timestamps.size()))
    throw std::out_of_range("timestamp outside context table span");
  return static_cast<int>(idx);
}

World generate_world(const WorldConfig& cfg) {
  auto violations = cfg.validate();
  if (!violations.empty())
    throw std::invalid_argument("WorldConfig: " + violations.front());

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  auto gauss = [&](double sd) {
    std::normal_distribution<double> d(0.0, sd);
    return d(rng);
  };

  World w;

  // Neighborhood centers on a loose grid around LA.
  const int gridw = static_cast<int>(std::ceil(std::sqrt(cfg.n_neighborhoods)));
  std::vector<std::pair<double, double>> centers;
  for (int i = 0; i < cfg.n_neighborhoods; ++i) {
    centers.emplace_back(34.00 + 0.035 * (i / gridw), -118.30 + 0.042 * (i % gridw));
  }
  auto nearest_center = [&](double lat, double lon) {
    int best = 0;
    double bd = 1e18;
    for (int i = 0; i < cfg.n_neighborhoods; ++i) {
      double d = std::hypot(lat - centers[i].first, lon - centers[i].second);
      if (d < bd) {
        bd = d;
        best = i;
      }
    }
    return best;
  };

  // Roughly a third of the sensors sit on freeway chains.
  int n_fwy_sensors = std::min(cfg.n_sensors / 3, cfg.n_sensors - 1);
  int chain_len = std::max(1, n_fwy_sensors / cfg.n_freeways);
  n_fwy_sensors = chain_len * cfg.n_freeways;
  if (n_fwy_sensors >= cfg.n_sensors) {
    chain_len = 1;
    n_fwy_sensors = std::min(cfg.n_freeways, cfg.n_sensors - 1);
  }

  const int idw = cfg.n_sensors >= 1000 ? 4 : 3;
  std::vector<int> chain_of(cfg.n_sensors, -1);   // freeway chain index
  std::vector<int> chain_pos(cfg.n_sensors, -1);  // position along chain
  int sid = 0;
  for (int f = 0; f < cfg.n_freeways && sid < n_fwy_sensors; ++f) {
    double lat0 = centers[f % cfg.n_neighborhoods].first + gauss(0.01);
    double lon0 = centers[f % cfg.n_neighborhoods].second + gauss(0.01);
    double ang = uni(rng) * 2.0 * kPi;
    for (int j = 0; j < chain_len && sid < n_fwy_sensors; ++j, ++sid) {
      SensorContext c;
      c.sensor_id = pad_id("s", sid, idw);
      c.lat = lat0 + 0.006 * j * std::sin(ang);
      c.lon = lon0 + 0.006 * j * std::cos(ang);
      c.road_class = RoadClass::freeway;
      c.lanes = 3 + static_cast<int>(uni(rng) * 3.0);  // 3..5
      c.max_speed = 65.0;
      c.neighborhood_id = pad_id("n", nearest_center(c.lat, c.lon), 2);
      c.freeway_id = pad_id("f", f, 2);
      chain_of[sid] = f;
      chain_pos[sid] = j;
      w.sensors.push_back(c);
    }
  }
  for (int i = 0; sid < cfg.n_sensors; ++i, ++sid) {
    const int n = i % cfg.n_neighborhoods;
    SensorContext c;
    c.sensor_id = pad_id("s", sid, idw);
    c.lat = centers[n].first + gauss(0.008);
    c.lon = centers[n].second + gauss(0.008);
    c.road_class = RoadClass::arterial;
    c.lanes = 1 + static_cast<int>(uni(rng) * 3.0);  // 1..3
    c.max_speed = 30.0 + 5.0 * static_cast<int>(uni(rng) * 4.0);
    c.neighborhood_id = pad_id("n", n, 2);
    w.sensors.push_back(c);
  }

  const int steps_per_day = 24 * 60 / cfg.timestamp_interval_min;
  const int T = cfg.duration_days * steps_per_day;
  const int S = cfg.n_sensors;
  const int hours = cfg.duration_days * 24;

  // Neighborhood latent factors: slow multiplicative sinusoids.
  std::vector<double> fac_amp(cfg.n_neighborhoods), fac_period(cfg.n_neighborhoods),
      fac_phase(cfg.n_neighborhoods);
  for (int n = 0; n < cfg.n_neighborhoods; ++n) {
    fac_amp[n] = 0.05 + 0.10 * uni(rng);
    fac_period[n] = (2.0 + 2.0 * uni(rng)) * 86400.0;
    fac_phase[n] = uni(rng) * 2.0 * kPi;
  }

  // Hourly environment per neighborhood.
  w.context.neighborhood_ids.resize(cfg.n_neighborhoods);
  for (int n = 0; n < cfg.n_neighborhoods; ++n)
    w.context.neighborhood_ids[n] = pad_id("n", n, 2);
  w.context.timestamps.resize(hours);
  for (int h = 0; h < hours; ++h)
    w.context.timestamps[h] = cfg.start_time + 3600LL * h;
  w.context.precip = Mat::Zero(hours, cfg.n_neighborhoods);
  w.context.temp = Mat::Zero(hours, cfg.n_neighborhoods);
  w.context.aqi = Mat::Zero(hours, cfg.n_neighborhoods);
  for (int n = 0; n < cfg.n_neighborhoods; ++n) {
    double aqi = 40.0 + 50.0 * uni(rng);
    for (int h = 0; h < hours; ++h) {
      bool rain = uni(rng) < cfg.rain_prob;
      w.context.precip(h, n) = rain ? 1.5 + 6.5 * uni(rng) : 0.0;
      double hod = (h % 24);
      w.context.temp(h, n) =
          15.0 + 8.0 * std::sin(2.0 * kPi * (hod - 9.0) / 24.0) + gauss(1.0);
      aqi = std::clamp(aqi + gauss(5.0), 15.0, 180.0);
      w.context.aqi(h, n) = aqi;
    }
  }

  // Clear-weather speed and base flow, with lag-1 chain propagation. Chain
  // heads carry an AR(1) congestion wave that travels downstream.
  Mat clear_speed(T, S), base_flow(T, S);
  std::vector<int> nb_idx(S);
  for (int s = 0; s < S; ++s)
    nb_idx[s] = w.context.neighborhood_index(w.sensors[s].neighborhood_id);
  std::vector<double> wave(cfg.n_freeways, 0.0);
  for (int k = 0; k < T; ++k) {
    const std::int64_t ts = cfg.start_time + 60LL * cfg.timestamp_interval_min * k;
    const int mod = minute_of_day(ts);
    const double prof = daily_profile(mod);
    for (int f = 0; f < cfg.n_freeways; ++f) wave[f] = 0.85 * wave[f] + gauss(2.0);
    for (int s = 0; s < S; ++s) {
      const SensorContext& c = w.sensors[s];
      const int n = nb_idx[s];
      const double fac =
          1.0 + fac_amp[n] * std::sin(2.0 * kPi * (ts - cfg.start_time) / fac_period[n] +
                                      fac_phase[n]);
      if (chain_of[s] >= 0 && chain_pos[s] > 0) {
        // downstream = upstream shifted by one timestamp plus noise
        clear_speed(k, s) =
            (k == 0 ? clear_speed(0, s - 1) : clear_speed(k - 1, s - 1)) + gauss(0.4);
        base_flow(k, s) =
            (k == 0 ? base_flow(0, s - 1) : base_flow(k - 1, s - 1)) + gauss(0.8);
      } else {
        const double amp = c.road_class == RoadClass::freeway ? 0.45 : 0.30;
        double sp = c.max_speed * (1.0 - amp * std::min(prof, 1.0)) * fac;
        if (chain_of[s] >= 0) sp += wave[chain_of[s]];
        clear_speed(k, s) = sp;
        base_flow(k, s) = c.lanes * (8.0 + 55.0 * prof) * fac;
      }
    }
  }

  // Rain slowdown, observation noise, and the final tables.
  w.readings.sensor_ids.resize(S);
  for (int s = 0; s < S; ++s) w.readings.sensor_ids[s] = w.sensors[s].sensor_id;
  w.readings.timestamps.resize(T);
  for (int k = 0; k < T; ++k)
    w.readings.timestamps[k] = cfg.start_time + 60LL * cfg.timestamp_interval_min * k;
  w.readings.speed = Mat::Zero(T, S);
  w.readings.flow = Mat::Zero(T, S);
  w.readings.valid = Mat::Ones(T, S);
  for (int s = 0; s < S; ++s) {
    const int n = nb_idx[s];
    for (int k = 0; k < T; ++k) {
      const int h = static_cast<int>(
          (w.readings.timestamps[k] - cfg.start_time) / 3600);
      const bool rain = w.context.precip(h, n) > 0.0;
      double sp = clear_speed(k, s) * (rain ? kRainSlowdown : 1.0) + gauss(1.2);
      double fl = base_flow(k, s) + gauss(2.5);
      w.readings.speed(k, s) = std::max(sp, 2.0);
      w.readings.flow(k, s) = std::max(fl, 0.0);
    }
  }

  // Outage intervals: contiguous 1..6 hour gaps.
  for (int s = 0; s < S; ++s) {
    for (int d = 0; d < cfg.duration_days; ++d) {
      if (uni(rng) >= cfg.outage_rate) continue;
      const int dur_min = 60 + static_cast<int>(uni(rng) * 300.0);
      const int start_min = static_cast<int>(uni(rng) * (1440.0 - dur_min));
      const int k0 = d * steps_per_day + start_min / cfg.timestamp_interval_min;
      const int k1 = std::min(T, k0 + dur_min / cfg.timestamp_interval_min);
      for (int k = k0; k < k1; ++k) w.readings.valid(k, s) = 0.0;
    }
  }

  return w;
}

std::vector<std::string> SplitSpec::validate() const {
  std::vector<std::string> v;
  if (!(train.begin < train.end && val.begin < val.end && test.begin < test.end))
    v.push_back("split ranges must be non-empty");
  if (!(train.end <= val.begin && val.end <= test.begin))
    v.push_back("split ranges must be disjoint and ordered train < val < test");
  if (!(query_fraction > 0.0 && query_fraction < 1.0))
    v.push_back("query_fraction must be in (0,1)");
  if (window_stride < 1) v.push_back("window_stride >= 1 violated");
  return v;
}

namespace {

Eigen::RowVectorXd dynamic_features(const World& world, int nb, std::int64_t ts) {
  Eigen::RowVectorXd d(12);
  const int h = world.context.hour_row(ts);
  d(0) = world.context.precip(h, nb);
  d(1) = world.context.temp(h, nb);
  d(2) = world.context.aqi(h, nb);
  d.segment(3, 9) = encode_global_context(ts).transpose();
  return d;
}

}  // namespace

WindowingResult make_windows(const World& world, const FeatureLayout& layout,
                             const TaskMode& task, const SplitSpec& split,
                             Split which, std::uint64_t seed) {
  auto violations = split.validate();
  if (!violations.empty())
    throw std::invalid_argument("SplitSpec: " + violations.front());

  WindowingResult out;
  const TimeRange range = which == Split::train  ? split.train
                          : which == Split::val  ? split.val
                                                 : split.test;
  const auto& rt = world.readings;
  const int T = static_cast<int>(rt.timestamps.size());
  const int S = static_cast<int>(rt.sensor_ids.size());
  const int W = task.window;
  const int H = task.horizon;
  const int min_valid = split.min_valid_sensors > 0 ? split.min_valid_sensors : S / 2;
  const int tail = task.mode == Mode::forecast ? W + H : W;

  std::vector<Eigen::RowVectorXd> static_feat(S);
  std::vector<int> nb_idx(S);
  for (int s = 0; s < S; ++s) {
    static_feat[s] = encode_static(world.sensors[s]);
    nb_idx[s] = world.context.neighborhood_index(world.sensors[s].neighborhood_id);
  }

  Eigen::VectorXd valid_per_t = rt.valid.rowwise().sum();

  int considered = 0, dropped_valid = 0;
  for (int i = 0; i + tail <= T; i += split.window_stride) {
    if (!range.contains(rt.timestamps[i]) ||
        !range.contains(rt.timestamps[i + tail - 1]))
      continue;
    ++considered;
    bool ok = true;
    for (int k = i; k < i + W; ++k)
      if (valid_per_t(k) < min_valid) {
        ok = false;
        break;
      }
    if (!ok) {
      ++dropped_valid;
      continue;
    }

    // Sensors with at least one valid reading in the window.
    std::vector<int> valid_sensors;
    for (int s = 0; s < S; ++s) {
      if (rt.valid.block(i, s, W, 1).sum() > 0.0) valid_sensors.push_back(s);
    }
    if (static_cast<int>(valid_sensors.size()) < 2) {
      ++dropped_valid;
      continue;
    }

    // Seeded per-window partition, independent of emission order.
    std::mt19937_64 wrng(seed ^ (0x9e3779b97f4a7c15ULL * (i + 1)));
    std::shuffle(valid_sensors.begin(), valid_sensors.end(), wrng);
    int n_q = static_cast<int>(
        std::llround(split.query_fraction * valid_sensors.size()));
    n_q = std::clamp(n_q, 1, static_cast<int>(valid_sensors.size()) - 1);
    std::vector<int> q_set(valid_sensors.begin(), valid_sensors.begin() + n_q);
    std::vector<int> o_set(valid_sensors.begin() + n_q, valid_sensors.end());
    std::sort(q_set.begin(), q_set.end());
    std::sort(o_set.begin(), o_set.end());

    TrafficSample sample;
    sample.window_id = i;
    const int n_o = static_cast<int>(o_set.size());
    sample.x_obs.resize(W);
    sample.x_query.resize(W);
    sample.obs_mask = Mat::Zero(n_o, W);
    for (int t = 0; t < W; ++t) {
      const std::int64_t ts = rt.timestamps[i + t];
      Mat& xo = sample.x_obs[t];
      xo = Mat::Zero(n_o, layout.f_total());
      for (int r = 0; r < n_o; ++r) {
        const int s = o_set[r];
        const bool v = rt.valid(i + t, s) > 0.0;
        sample.obs_mask(r, t) = v ? 1.0 : 0.0;
        if (v) {
          xo(r, 0) = rt.speed(i + t, s);
          xo(r, 1) = rt.flow(i + t, s);
        }
        xo.block(r, 2, 1, layout.f_static) = static_feat[s];
        xo.block(r, 2 + layout.f_static, 1, layout.f_dynamic) =
            dynamic_features(world, nb_idx[s], ts);
      }
      Mat& xq = sample.x_query[t];
      xq = Mat::Zero(n_q, layout.f_total() - 2);
      for (int r = 0; r < n_q; ++r) {
        const int s = q_set[r];
        xq.block(r, 0, 1, layout.f_static) = static_feat[s];
        xq.block(r, layout.f_static, 1, layout.f_dynamic) =
            dynamic_features(world, nb_idx[s], ts);
      }
    }

    const int target_start = task.mode == Mode::forecast ? i + W : i + W - H;
    sample.y_target = Mat::Zero(n_q, 2 * H);
    sample.target_mask = Mat::Zero(n_q, H);
    for (int r = 0; r < n_q; ++r) {
      const int s = q_set[r];
      for (int h = 0; h < H; ++h) {
        const int k = target_start + h;
        if (rt.valid(k, s) > 0.0) {
          sample.target_mask(r, h) = 1.0;
          sample.y_target(r, 2 * h) = rt.speed(k, s);
          sample.y_target(r, 2 * h + 1) = rt.flow(k, s);
        }
      }
    }

    sample.global_context = encode_global_context(rt.timestamps[i]);
    for (int s : o_set) sample.sensor_ids_obs.push_back(rt.sensor_ids[s]);
    for (int s : q_set) sample.sensor_ids_query.push_back(rt.sensor_ids[s]);
    out.samples.push_back(std::move(sample));
  }

  if (out.samples.empty()) {
    std::ostringstream os;
    os << "no admissible windows in split (considered " << considered
       << ", dropped by min_valid_sensors=" << min_valid << ": " << dropped_valid
       << ")";
    out.diagnostics.push_back(os.str());
  }
  return out;
}

Normalizer Normalizer::fit(const std::vector<TrafficSample>& train_samples,
                           const FeatureLayout& layout) {
  const int F = layout.f_total();
  Normalizer n;
  n.f_static_ = layout.f_static;
  n.mean_ = Eigen::VectorXd::Zero(F);
  n.std_ = Eigen::VectorXd::Ones(F);
  n.scaled_.assign(F, 0);
  n.scaled_[0] = n.scaled_[1] = 1;
  for (int di : scalable_dynamic_features(layout))
    n.scaled_[2 + layout.f_static + di] = 1;

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(F), sq = Eigen::VectorXd::Zero(F),
                  cnt = Eigen::VectorXd::Zero(F);
  for (const auto& s : train_samples) {
    for (std::size_t t = 0; t < s.x_obs.size(); ++t) {
      const Mat& x = s.x_obs[t];
      for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const bool v = s.obs_mask(r, static_cast<Eigen::Index>(t)) > 0.0;
        for (int f = 0; f < F; ++f) {
          if (!n.scaled_[f]) continue;
          if (f < 2 && !v) continue;  // masked traffic excluded
          sum(f) += x(r, f);
          sq(f) += x(r, f) * x(r, f);
          cnt(f) += 1.0;
        }
      }
    }
  }
  for (int f = 0; f < F; ++f) {
    if (!n.scaled_[f] || cnt(f) <= 0.0) continue;
    n.mean_(f) = sum(f) / cnt(f);
    double var = sq(f) / cnt(f) - n.mean_(f) * n.mean_(f);
    n.std_(f) = var > 1e-12 ? std::sqrt(var) : 1.0;  // zero-variance fallback
  }
  return n;
}

void Normalizer::apply(TrafficSample& s) const {
  const int F = static_cast<int>(mean_.size());
  for (auto& x : s.x_obs)
    for (int f = 0; f < F; ++f)
      if (scaled_[f]) x.col(f) = (x.col(f).array() - mean_(f)) / std_(f);
  for (auto& x : s.x_query)
    for (int f = 2; f < F; ++f)
      if (scaled_[f]) x.col(f - 2) = (x.col(f - 2).array() - mean_(f)) / std_(f);
  // Zero-fill of masked traffic happens post-normalization so that
  // "missing" stays exactly zero in model units.
  for (std::size_t t = 0; t < s.x_obs.size(); ++t)
    for (Eigen::Index r = 0; r < s.x_obs[t].rows(); ++r)
      if (s.obs_mask(r, static_cast<Eigen::Index>(t)) <= 0.0)
        s.x_obs[t](r, 0) = s.x_obs[t](r, 1) = 0.0;
  s.y_target = normalize_targets(s.y_target);
}

void Normalizer::invert(TrafficSample& s) const {
  const int F = static_cast<int>(mean_.size());
  for (auto& x : s.x_obs)
    for (int f = 0; f < F; ++f)
      if (scaled_[f]) x.col(f) = x.col(f).array() * std_(f) + mean_(f);
  for (auto& x : s.x_query)
    for (int f = 2; f < F; ++f)
      if (scaled_[f]) x.col(f - 2) = x.col(f - 2).array() * std_(f) + mean_(f);
  s.y_target = invert_predictions(s.y_target);
}

Mat Normalizer::invert_predictions(const Mat& y_norm) const {
  Mat y = y_norm;
  for (Eigen::Index c = 0; c < y.cols(); ++c) {
    const int f = static_cast<int>(c % 2);
    y.col(c) = y.col(c).array() * std_(f) + mean_(f);
  }
  return y;
}

Mat Normalizer::normalize_targets(const Mat& y_raw) const {
  Mat y = y_raw;
  for (Eigen::Index c = 0; c < y.cols(); ++c) {
    const int f = static_cast<int>(c % 2);
    y.col(c) = (y.col(c).array() - mean_(f)) / std_(f);
  }
  return y;
}

std::string Normalizer::to_json() const {
  nlohmann::json j;
  j["mean"] = std::vector<double>(mean_.data(), mean_.data() + mean_.size());
  j["std"] = std::vector<double>(std_.data(), std_.data() + std_.size());
  j["scaled"] = scaled_;
  j["f_static"] = f_static_;
  return j.dump(2);
}

Normalizer Normalizer::from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  Normalizer n;
  auto mean = j.at("mean").get<std::vector<double>>();
  auto sd = j.at("std").get<std::vector<double>>();
  n.mean_ = Eigen::Map<Eigen::VectorXd>(mean.data(), mean.size());
  n.std_ = Eigen::Map<Eigen::VectorXd>(sd.data(), sd.size());
  n.scaled_ = j.at("scaled").get<std::vector<std::uint8_t>>();
  n.f_static_ = j.at("f_static").get<int>();
  return n;
}

void write_world_csv(const World& world, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream f(fs::path(dir) / "sensors.csv");
    f << "sensor_id,lat,lon,road_class,lanes,max_speed,neighborhood_id,freeway_id\n";
    char buf[256];
    for (const auto& s : world.sensors) {
      std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%s,%d,%.1f,%s,%s\n",
                    s.sensor_id.c_str(), s.lat, s.lon,
                    to_string(s.road_class).c_str(), s.lanes, s.max_speed,
                    s.neighborhood_id.c_str(),
                    s.freeway_id ? s.freeway_id->c_str() : "");
      f << buf;
    }
  }
  {
    std::ofstream f(fs::path(dir) / "readings.csv");
    f << "sensor_id,timestamp_iso8601,speed_mph,flow_veh_per_interval,valid\n";
    const auto& rt = world.readings;
    char buf[256];
    for (std::size_t s = 0; s < rt.sensor_ids.size(); ++s) {
      for (std::size_t k = 0; k < rt.timestamps.size(); ++k) {
        const bool v = rt.valid(k, s) > 0.0;
        std::snprintf(buf, sizeof(buf), "%s,%s,%.6f,%.6f,%d\n",
                      rt.sensor_ids[s].c_str(),
                      format_iso8601(rt.timestamps[k]).c_str(),
                      v ? rt.speed(k, s) : 0.0, v ? rt.flow(k, s) : 0.0, v ? 1 : 0);
        f << buf;
      }
    }
  }
  {
    std::ofstream f(fs::path(dir) / "context.csv");
    f << "neighborhood_id,timestamp_iso8601,precip_mm,temp_c,aqi\n";
    const auto& ct = world.context;
    char buf[256];
    for (std::size_t n = 0; n < ct.neighborhood_ids.size(); ++n) {
      for (std::size_t h = 0; h < ct.timestamps.size(); ++h) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%.3f,%.3f,%.3f\n",
                      ct.neighborhood_ids[n].c_str(),
                      format_iso8601(ct.timestamps[h]).c_str(), ct.precip(h, n),
                      ct.temp(h, n), ct.aqi(h, n));
        f << buf;
      }
    }
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

[[noreturn]] void parse_fail(const std::string& file, std::size_t row,
                             const std::string& what) {
  std::ostringstream os;
  os << file << ":" << row << ": " << what;
  throw std::runtime_error(os.str());
}

}  // namespace

World ingest_csv(const std::string& sensors_path, const std::string& readings_path,
                 const std::string& context_path) {
  World w;
  {
    std::ifstream f(sensors_path);
    if (!f) throw std::runtime_error("cannot open " + sensors_path);
    std::string line;
    std::getline(f, line);
    if (split_csv_line(line).size() != 8)
      parse_fail(sensors_path, 1, "expected 8-column header");
    std::size_t row = 1;
    while (std::getline(f, line)) {
      ++row;
      if (line.empty()) continue;
      auto c = split_csv_line(line);
      if (c.size() != 8) parse_fail(sensors_path, row, "expected 8 columns");
      SensorContext s;
      s.sensor_id = c[0];
      s.lat = std::stod(c[1]);
      s.lon = std::stod(c[2]);
      s.road_class = road_class_from_string(c[3]);
      s.lanes = std::stoi(c[4]);
      s.max_speed = std::stod(c[5]);
      s.neighborhood_id = c[6];
      if (!c[7].empty()) s.freeway_id = c[7];
      auto v = s.validate();
      if (!v.empty()) parse_fail(sensors_path, row, v.front());
      w.sensors.push_back(std::move(s));
    }
  }

  struct Rec {
    double speed, flow;
    bool valid;
  };
  std::map<std::string, std::map<std::int64_t, Rec>> per_sensor;
  std::map<std::string, std::int64_t> last_ts;
  {
    std::ifstream f(readings_path);
    if (!f) throw std::runtime_error("cannot open " + readings_path);
    std::string line;
    std::getline(f, line);
    std::size_t row = 1;
    std::map<std::string, int> known;
    for (std::size_t i = 0; i < w.sensors.size(); ++i)
      known[w.sensors[i].sensor_id] = static_cast<int>(i);
    while (std::getline(f, line)) {
      ++row;
      if (line.empty()) continue;
      auto c = split_csv_line(line);
      if (c.size() != 5) parse_fail(readings_path, row, "expected 5 columns");
      if (!known.count(c[0]))
        parse_fail(readings_path, row, "reading for unlisted sensor \"" + c[0] + "\"");
      std::int64_t ts = parse_iso8601(c[1]);
      double speed = std::stod(c[2]);
      double flow = std::stod(c[3]);
      int valid = std::stoi(c[4]);
      if (flow < 0.0) parse_fail(readings_path, row, "flow >= 0 violated");
      if (speed < 0.0) parse_fail(readings_path, row, "speed >= 0 violated");
      if (valid != 0 && valid != 1) parse_fail(readings_path, row, "valid must be 0 or 1");
      auto it = last_ts.find(c[0]);
      if (it != last_ts.end() && ts <= it->second)
        parse_fail(readings_path, row, "non-monotone timestamps for sensor " + c[0]);
      last_ts[c[0]] = ts;
      per_sensor[c[0]][ts] = Rec{speed, flow, valid == 1};
    }
  }

  std::vector<std::int64_t> all_ts;
  for (const auto& [id, m] : per_sensor)
    for (const auto& [ts, r] : m) all_ts.push_back(ts);
  std::sort(all_ts.begin(), all_ts.end());
  all_ts.erase(std::unique(all_ts.begin(), all_ts.end()), all_ts.end());

  const int T = static_cast<int>(all_ts.size());
  const int S = static_cast<int>(w.sensors.size());
  w.readings.timestamps = all_ts;
  w.readings.sensor_ids.resize(S);
  for (int s = 0; s < S; ++s) w.readings.sensor_ids[s] = w.sensors[s].sensor_id;
  w.readings.speed = Mat::Zero(T, S);
  w.readings.flow = Mat::Zero(T, S);
  w.readings.valid = Mat::Zero(T, S);
  std::map<std::int64_t, int> ts_row;
  for (int k = 0; k < T; ++k) ts_row[all_ts[k]] = k;
  for (int s = 0; s < S; ++s) {
    auto it = per_sensor.find(w.readings.sensor_ids[s]);
    if (it == per_sensor.end()) continue;
    for (const auto& [ts, r] : it->second) {
      const int k = ts_row[ts];
      w.readings.speed(k, s) = r.speed;
      w.readings.flow(k, s) = r.flow;
      w.readings.valid(k, s) = r.valid ? 1.0 : 0.0;
    }
  }

  {
    std::ifstream f(context_path);
    if (!f) throw std::runtime_error("cannot open " + context_path);
    std::string line;
    std::getline(f, line);
    std::size_t row = 1;
    struct CRec {
      double precip, temp, aqi;
    };
    std::map<std::string, std::map<std::int64_t, CRec>> per_nb;
    while (std::getline(f, line)) {
      ++row;
      if (line.empty()) continue;
      auto c = split_csv_line(line);
      if (c.size() != 5) parse_fail(context_path, row, "expected 5 columns");
      per_nb[c[0]][parse_iso8601(c[1])] =
          CRec{std::stod(c[2]), std::stod(c[3]), std::stod(c[4])};
    }
    std::vector<std::int64_t> hts;
    for (const auto& [id, m] : per_nb)
      for (const auto& [ts, r] : m) hts.push_back(ts);
    std::sort(hts.begin(), hts.end());
    hts.erase(std::unique(hts.begin(), hts.end()), hts.end());
    const int H = static_cast<int>(hts.size());
    auto& ct = w.context;
    ct.timestamps = hts;
    for (const auto& [id, m] : per_nb) ct.neighborhood_ids.push_back(id);
    const int N = static_cast<int>(ct.neighborhood_ids.size());
    ct.precip = Mat::Zero(H, N);
    ct.temp = Mat::Zero(H, N);
    ct.aqi = Mat::Zero(H, N);
    std::map<std::int64_t, int> hrow;
    for (int h = 0; h < H; ++h) hrow[hts[h]] = h;
    for (int n = 0; n < N; ++n) {
      for (const auto& [ts, r] : per_nb[ct.neighborhood_ids[n]]) {
        const int h = hrow[ts];
        ct.precip(h, n) = r.precip;
        ct.temp(h, n) = r.temp;
        ct.aqi(h, n) = r.aqi;
      }
    }
  }

  return w;
}

}  // namespace dsgnn

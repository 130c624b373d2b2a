#include "dsgnn/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <stdexcept>

#include "dsgnn/nn.hpp"

namespace dsgnn {

double haversine_km(double lat1, double lon1, double lat2, double lon2) {
  constexpr double kEarthRadiusKm = 6371.0;
  constexpr double deg = std::numbers::pi / 180.0;
  const double dlat = (lat2 - lat1) * deg;
  const double dlon = (lon2 - lon1) * deg;
  const double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(lat1 * deg) * std::cos(lat2 * deg) *
                       std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

DSNRegistry::Range DSNRegistry::type_range(DsnType t) const {
  switch (t) {
    case DsnType::spatial: return {0, n_spatial()};
    case DsnType::semantic: return {n_spatial(), n_semantic()};
    case DsnType::environmental: return {n_static(), n_env};
    case DsnType::temporal: return {n_static() + n_env, n_tmp};
  }
  return {};
}

std::vector<std::string> DSNRegistry::node_names() const {
  static const char* kGroupNames[] = {"road_class", "lanes", "max_speed"};
  std::vector<std::string> names;
  for (const auto& n : neighborhoods) names.push_back("spatial:" + n);
  for (const auto& f : freeways) names.push_back("spatial:" + f);
  for (const auto& [g, v] : semantic_nodes)
    names.push_back(std::string("semantic:") + kGroupNames[g] + "=" +
                    std::to_string(v));
  for (int i = 0; i < n_env; ++i) names.push_back("env:" + std::to_string(i));
  for (int i = 0; i < n_tmp; ++i) names.push_back("tmp:" + std::to_string(i));
  return names;
}

DSNRegistry build_registry(const std::vector<SensorContext>& contexts, int n_env,
                           int n_tmp, int d_id, double sigma_km,
                           bool semantic_present_only) {
  DSNRegistry r;
  r.n_env = n_env;
  r.n_tmp = n_tmp;
  r.d_id = d_id;
  r.sigma_km = sigma_km;
  if (semantic_present_only) {
    std::set<std::pair<int, int>> present;
    for (const auto& c : contexts) {
      present.insert({0, c.road_class == RoadClass::freeway ? 0 : 1});
      present.insert({1, lanes_bucket(c.lanes)});
      present.insert({2, max_speed_bucket(c.max_speed)});
    }
    r.semantic_nodes.assign(present.begin(), present.end());
  } else {
    for (int v = 0; v < kRoadClasses; ++v) r.semantic_nodes.push_back({0, v});
    for (int v = 0; v < kLanesBuckets; ++v) r.semantic_nodes.push_back({1, v});
    for (int v = 0; v < kSpeedBuckets; ++v) r.semantic_nodes.push_back({2, v});
  }
  std::set<std::string> nbs, fws;
  for (const auto& c : contexts) {
    nbs.insert(c.neighborhood_id);
    if (c.freeway_id) fws.insert(*c.freeway_id);
  }
  r.neighborhoods.assign(nbs.begin(), nbs.end());
  r.freeways.assign(fws.begin(), fws.end());
  r.centers.resize(r.neighborhoods.size());
  for (std::size_t i = 0; i < r.neighborhoods.size(); ++i) {
    double lat = 0.0, lon = 0.0;
    int cnt = 0;
    for (const auto& c : contexts) {
      if (c.neighborhood_id != r.neighborhoods[i]) continue;
      lat += c.lat;
      lon += c.lon;
      ++cnt;
    }
    r.centers[i] = {lat / cnt, lon / cnt};
  }
  return r;
}

Mat assign_spatial(const std::vector<SensorContext>& contexts,
                   const DSNRegistry& registry) {
  const int S = static_cast<int>(contexts.size());
  Mat a = Mat::Zero(registry.n_spatial(), S);
  const double two_sigma_sq = 2.0 * registry.sigma_km * registry.sigma_km;
  for (int s = 0; s < S; ++s) {
    const auto& c = contexts[s];
    for (std::size_t i = 0; i < registry.neighborhoods.size(); ++i) {
      const double d = haversine_km(c.lat, c.lon, registry.centers[i].first,
                                    registry.centers[i].second);
      a(static_cast<int>(i), s) = std::exp(-d * d / two_sigma_sq);
    }
    if (c.freeway_id) {
      auto it = std::find(registry.freeways.begin(), registry.freeways.end(),
                          *c.freeway_id);
      if (it != registry.freeways.end())
        a(static_cast<int>(registry.neighborhoods.size() +
                           (it - registry.freeways.begin())),
          s) = 1.0;
    }
  }
  return a;
}

Mat assign_semantic(const std::vector<SensorContext>& contexts,
                    const DSNRegistry& registry) {
  const int S = static_cast<int>(contexts.size());
  Mat a = Mat::Zero(registry.n_semantic(), S);
  for (int s = 0; s < S; ++s) {
    const auto& c = contexts[s];
    const int value[3] = {c.road_class == RoadClass::freeway ? 0 : 1,
                          lanes_bucket(c.lanes), max_speed_bucket(c.max_speed)};
    bool matched[3] = {false, false, false};
    for (std::size_t i = 0; i < registry.semantic_nodes.size(); ++i) {
      const auto& [g, v] = registry.semantic_nodes[i];
      if (value[g] == v) {
        a(static_cast<Eigen::Index>(i), s) = 1.0;
        matched[g] = true;
      }
    }
    for (int g = 0; g < 3; ++g) {
      bool group_present = false;
      for (const auto& [gg, vv] : registry.semantic_nodes)
        if (gg == g) group_present = true;
      if (group_present && !matched[g])
        throw std::logic_error("semantic property value outside all buckets for " +
                               c.sensor_id);
    }
  }
  return a;
}

Mat static_assignment(const std::vector<SensorContext>& contexts,
                      const DSNRegistry& registry) {
  Mat top = assign_spatial(contexts, registry);
  Mat bottom = assign_semantic(contexts, registry);
  Mat a(top.rows() + bottom.rows(), top.cols());
  a << top, bottom;
  return a;
}

void register_gate(ParameterStore& store, const std::string& gate_prefix,
                   int f_dim, int z_dim, int hidden, std::mt19937_64& rng) {
  nn::register_mlp(store, gate_prefix, f_dim + z_dim, hidden, 1, rng);
}

ad::Var assign_dynamic(ParamContext& p, const std::string& gate_prefix,
                       ad::Var x_f, ad::Var z_type) {
  using namespace ad;
  Tape& t = p.tape();
  const int S = static_cast<int>(t.value(x_f).rows());
  const int n = static_cast<int>(t.value(z_type).rows());
  // Pair rows sensor-major: row s*n + i is [x_f[s]; z_i].
  Var xs = repeat_each_row(t, x_f, n);
  Var zs = tile_rows(t, z_type, S);
  Var pairs = concat_cols(t, {xs, zs});
  Var gate = nn::mlp(p, gate_prefix, pairs, nn::Act::tanh);
  Var weights = sigmoid(t, gate);  // (S*n) x 1
  return reshape_colmajor(t, weights, n, S);
}

Mat threshold_mask(const Mat& a_raw, double tau) {
  Mat mask = (a_raw.array() >= tau).cast<double>().matrix();
  for (Eigen::Index c = 0; c < a_raw.cols(); ++c) {
    if (mask.col(c).sum() > 0.0) continue;
    Eigen::Index best;
    a_raw.col(c).maxCoeff(&best);  // rescue rule: keep the largest raw entry
    mask(best, c) = 1.0;
  }
  return mask;
}

AssignmentMatrix threshold_assignments(const Mat& a_raw, double tau) {
  if (tau < 0.0 || tau >= 1.0)
    throw std::invalid_argument("threshold: tau must be in [0,1)");
  AssignmentMatrix out;
  out.tau = tau;
  out.a = a_raw.cwiseProduct(threshold_mask(a_raw, tau));
  return out;
}

}  // namespace dsgnn

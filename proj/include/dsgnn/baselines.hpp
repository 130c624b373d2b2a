#ifndef DSGNN_BASELINES_HPP
#define DSGNN_BASELINES_HPP

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dsgnn/autodiff.hpp"
#include "dsgnn/datamodel.hpp"
#include "dsgnn/params.hpp"

namespace dsgnn {

/// Naive reference predictors, raw units. All of them zero-fill invalid
/// observations; the learned model never does.

/// Per-timestamp mean over valid observation sensors (reconstruct); in
/// forecast mode the window-wide mean is held over the horizon.
Mat mean_observation_baseline(const TrafficSample& sample, const TaskMode& task);

/// Cross-sensor mean at the last window timestamp with any valid sensor,
/// held constant over the horizon.
Mat persistence_baseline(const TrafficSample& sample, const TaskMode& task);

using CoordMap = std::map<std::string, std::pair<double, double>>;

CoordMap sensor_coordinates(const std::vector<SensorContext>& contexts);

/// Copies the closest (haversine) observation sensor's series; in
/// forecast mode its last valid value is held forward.
Mat nearest_observation_baseline(const TrafficSample& sample, const TaskMode& task,
                                 const CoordMap& coords);

/// Per-sensor dense self-attention reconstruction model: every sensor
/// attends over every other, so compute grows with |S|^2. Exists only as
/// the scaling contrast in the benchmark.
class DenseAttentionReference {
 public:
  DenseAttentionReference(int f_total, int horizon, int d_model,
                          std::uint64_t seed);

  /// Masked MSE against the trailing `horizon` window timestamps.
  ad::Var loss(ParamContext& p, const TrafficSample& sample) const;

  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

 private:
  int f_total_, horizon_, d_;
  ParameterStore params_;
};

}  // namespace dsgnn

#endif

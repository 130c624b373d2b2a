#ifndef DSGNN_MODEL_HPP
#define DSGNN_MODEL_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dsgnn/assignment.hpp"
#include "dsgnn/autodiff.hpp"
#include "dsgnn/datamodel.hpp"
#include "dsgnn/dsg.hpp"
#include "dsgnn/encoder.hpp"
#include "dsgnn/head.hpp"
#include "dsgnn/params.hpp"

namespace dsgnn {

struct ModelConfig {
  EncoderDims enc;
  DsgDims dsg;
  HeadDims head;
  int n_env = 8;
  int n_tmp = 8;
  int d_id = 8;
  double sigma_km = 2.0;
  double tau = 0.05;
  int gate_hidden = 32;
  bool smooth_activations = false;  // softplus instead of relu (gradcheck)
  bool semantic_present_only = false;
  std::uint64_t seed = 1;

  /// Double-precision-friendly configuration for gradient verification:
  /// every width <= 6 and few enough nodes that N <= 8 on a 2-neighborhood
  /// arterial-only world.
  static ModelConfig tiny();
};

struct ForwardOptions {
  bool drop_dynamic = false;  // ablation: no environmental/temporal DSNs
  bool drop_static = false;   // ablation: no spatial/semantic DSNs
  bool skip_gcn = false;      // ablation: Z' = Z
  bool compute_l2 = false;
  bool want_diagnostics = false;
};

struct ForwardResult {
  ad::Var y_pred;  // |Q| x (H*2), normalized units
  ad::Var l1;
  ad::Var l2;      // invalid unless compute_l2 and targets exist
  int n_active_nodes = 0;
  // Diagnostics (copies of forward values; filled when want_diagnostics).
  Mat assignment, laplacian, pooled;
  std::vector<Mat> per_type_pooled;
};

/// The full network: encoder, assignments, Deep State Graph and query
/// head over one window. Parameters live in a ParameterStore keyed by
/// stable names; a forward pass is pure given (sample, parameters).
class DeepStateModel {
 public:
  DeepStateModel(FeatureLayout layout, TaskMode task,
                 const std::vector<SensorContext>& contexts, ModelConfig cfg);

  ForwardResult forward(ParamContext& p, const TrafficSample& sample,
                        const ForwardOptions& opts) const;

  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }
  const DSNRegistry& registry() const { return registry_; }
  const ModelConfig& config() const { return cfg_; }
  const FeatureLayout& layout() const { return layout_; }
  const TaskMode& task() const { return task_; }

  int query_feature_dim() const { return layout_.f_static + layout_.f_dynamic; }

  std::int64_t gcn_invocations() const { return gcn_invocations_; }

  /// Structured-text dump of A, L and per-type pooled vectors for one
  /// window (inspection and fixtures).
  std::string dump_diagnostics(const TrafficSample& sample) const;

 private:
  struct ActiveSet {
    std::vector<int> rows;  // registry row indices, ascending
    TypeRanges ranges;      // ranges in the active index space
  };
  ActiveSet active_set(const ForwardOptions& opts) const;

  const Eigen::VectorXd& static_column(const std::string& sensor_id) const;

  FeatureLayout layout_;
  TaskMode task_;
  ModelConfig cfg_;
  DSNRegistry registry_;
  ParameterStore params_;
  std::map<std::string, Eigen::VectorXd> static_cols_;
  mutable std::int64_t gcn_invocations_ = 0;
};

}  // namespace dsgnn

#endif

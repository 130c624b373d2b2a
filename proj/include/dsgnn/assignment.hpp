#ifndef DSGNN_ASSIGNMENT_HPP
#define DSGNN_ASSIGNMENT_HPP

#include <string>
#include <vector>

#include "dsgnn/autodiff.hpp"
#include "dsgnn/datamodel.hpp"
#include "dsgnn/params.hpp"

namespace dsgnn {

/// Great-circle distance in km.
double haversine_km(double lat1, double lon1, double lat2, double lon2);

enum class DsnType { spatial, semantic, environmental, temporal };
inline constexpr int kDsnTypes = 4;

/// Fixed node taxonomy for a dataset version: one spatial DSN per
/// neighborhood and freeway, one semantic DSN per discrete property
/// value, and configured counts of environmental/temporal DSNs. Total N
/// is independent of the number of sensors.
/// Semantic property groups for semantic DSNs.
enum class SemanticGroup { road_class = 0, lanes = 1, max_speed = 2 };

struct DSNRegistry {
  std::vector<std::string> neighborhoods;  // sorted unique ids
  std::vector<std::pair<double, double>> centers;  // member-sensor centroids
  std::vector<std::string> freeways;       // sorted unique ids
  // (group, bucket value) per semantic node, ordered by group then value.
  std::vector<std::pair<int, int>> semantic_nodes;
  int n_env = 8;
  int n_tmp = 8;
  int d_id = 8;          // identity embedding width
  double sigma_km = 2.0; // neighborhood kernel bandwidth

  int n_spatial() const {
    return static_cast<int>(neighborhoods.size() + freeways.size());
  }
  int n_semantic() const { return static_cast<int>(semantic_nodes.size()); }
  int n_static() const { return n_spatial() + n_semantic(); }
  int total() const { return n_static() + n_env + n_tmp; }

  struct Range {
    int begin = 0;
    int count = 0;
  };
  Range type_range(DsnType t) const;

  std::vector<std::string> node_names() const;  // diagnostics
};

/// When `semantic_present_only` is set, only property values that occur in
/// `contexts` get semantic nodes (used for deliberately tiny graphs);
/// otherwise every bucket is enumerated.
DSNRegistry build_registry(const std::vector<SensorContext>& contexts, int n_env,
                           int n_tmp, int d_id, double sigma_km,
                           bool semantic_present_only = false);

/// Gaussian-kernel neighborhood rows and binary freeway rows.
Mat assign_spatial(const std::vector<SensorContext>& contexts,
                   const DSNRegistry& registry);

/// Binary one-hot rows per discrete road property value.
Mat assign_semantic(const std::vector<SensorContext>& contexts,
                    const DSNRegistry& registry);

/// Combined static block (spatial rows then semantic rows), one column
/// per context.
Mat static_assignment(const std::vector<SensorContext>& contexts,
                      const DSNRegistry& registry);

/// Per-(sensor, node) sigmoid gate on [x_f; z_i]. x_f is |S| x F_f,
/// z_type is n x d; result is n x |S|, entries in (0,1).
ad::Var assign_dynamic(ParamContext& p, const std::string& gate_prefix,
                       ad::Var x_f, ad::Var z_type);

void register_gate(ParameterStore& store, const std::string& gate_prefix,
                   int f_dim, int z_dim, int hidden, std::mt19937_64& rng);

/// 0/1 keep-mask: entries < tau dropped, except that an all-zero column
/// gets its single largest raw entry restored.
Mat threshold_mask(const Mat& a_raw, double tau);

/// Thresholded soft assignment weights, rows ordered by DSN type block.
struct AssignmentMatrix {
  Mat a;            // N x |S|
  double tau = 0.0;
};

AssignmentMatrix threshold_assignments(const Mat& a_raw, double tau);

}  // namespace dsgnn

#endif

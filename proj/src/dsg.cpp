#include "dsgnn/dsg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dsgnn/nn.hpp"

namespace dsgnn {

using namespace ad;

void register_dsg(ParameterStore& store, const DsgDims& dims, int n_nodes,
                  int d_id, int global_dim, std::mt19937_64& rng) {
  if (dims.k != dims.d_state)
    throw std::invalid_argument("dsg: k must equal d_state (residual typing)");
  nn::register_mlp(store, "dsg.init", global_dim + d_id, dims.init_hidden,
                   dims.d_state, rng);
  store.create("dsg.identity", n_nodes, d_id, rng);
  store.create_zeros("dsg.alpha_raw", 1, 1);  // alpha starts at 0.5
  store.create("dsg.e_src", n_nodes, dims.d_embed_lap, rng);
  store.create("dsg.e_tgt", n_nodes, dims.d_embed_lap, rng);
  nn::register_attention(store, "dsg.attn", dims.d_state, dims.attn_dim,
                         dims.attn_heads, rng);
  for (int l = 0; l < dims.gcn_layers; ++l)
    store.create("dsg.gcn" + std::to_string(l) + ".w", dims.d_state, dims.d_state,
                 rng);
}

Var init_states(ParamContext& p, const Eigen::RowVectorXd& global_context,
                Var identity, const DsgDims& dims) {
  Tape& t = p.tape();
  const int n = static_cast<int>(t.value(identity).rows());
  Var ctx = broadcast_row(t, t.constant(global_context), n);
  Var in = concat_cols(t, {ctx, identity});
  return nn::mlp(p, "dsg.init", in, nn::Act::tanh);
}

Var update_states(ParamContext& p, Var z0, Var a_thresholded, Var h_obs) {
  Tape& t = p.tape();
  const Mat& a = t.value(a_thresholded);
  Eigen::VectorXd inv_counts(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double cnt = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if (a(i, j) != 0.0) cnt += 1.0;
    inv_counts(i) = cnt > 0.0 ? 1.0 / cnt : 0.0;  // empty S_i -> zero delta
  }
  Var agg = matmul(t, a_thresholded, h_obs);
  Mat scale_mat = inv_counts.replicate(1, t.value(agg).cols());
  Var delta = cmul_const(t, agg, scale_mat);
  return add(t, z0, delta);
}

Var short_term_laplacian(ParamContext& p, Var z, const DsgDims& dims) {
  return nn::attention_weights(p, "dsg.attn", z, dims.attn_dim, dims.attn_heads);
}

Var long_term_laplacian(ParamContext& p, Var e_s, Var e_t, bool smooth) {
  Tape& t = p.tape();
  Var scores = matmul(t, e_s, transpose(t, e_t));
  Var rect = smooth ? softplus(t, scores) : relu(t, scores);
  return row_softmax(t, rect);
}

Mat prune_mask(const Mat& l, double prune_frac) {
  const Eigen::Index n2 = l.size();
  const auto n_prune = static_cast<Eigen::Index>(
      std::floor(prune_frac * static_cast<double>(n2) + 1e-9));
  Mat mask = Mat::Ones(l.rows(), l.cols());
  if (n_prune <= 0) return mask;
  struct Entry {
    double v;
    Eigen::Index r, c;
  };
  std::vector<Entry> entries;
  entries.reserve(n2);
  for (Eigen::Index r = 0; r < l.rows(); ++r)
    for (Eigen::Index c = 0; c < l.cols(); ++c) entries.push_back({l(r, c), r, c});
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.v != b.v) return a.v < b.v;
    if (a.r != b.r) return a.r < b.r;
    return a.c < b.c;
  });
  for (Eigen::Index i = 0; i < n_prune; ++i)
    mask(entries[i].r, entries[i].c) = 0.0;
  return mask;
}

Var combine_and_prune(ParamContext& p, Var l_short, Var l_long, Var alpha_raw,
                      double prune_frac) {
  Tape& t = p.tape();
  if (prune_frac < 0.0 || prune_frac >= 1.0)
    throw std::invalid_argument("prune_frac must be in [0,1)");
  Var alpha = sigmoid(t, alpha_raw);
  Var one_minus = sub(t, t.constant(Mat::Ones(1, 1)), alpha);
  Var blend =
      add(t, mul_scalar(t, l_short, alpha), mul_scalar(t, l_long, one_minus));
  return cmul_const(t, blend, prune_mask(t.value(blend), prune_frac));
}

Var graph_convolve(ParamContext& p, Var z, Var laplacian, const DsgDims& dims,
                   bool smooth) {
  Tape& t = p.tape();
  Var h = z;
  for (int l = 0; l < dims.gcn_layers; ++l) {
    Var prop = matmul(t, matmul(t, laplacian, h), p("dsg.gcn" + std::to_string(l) + ".w"));
    Var act = smooth ? softplus(t, prop) : relu(t, prop);
    h = add(t, act, h);
  }
  return h;
}

Var pool(ParamContext& p, Var z_post, const TypeRanges& ranges) {
  Tape& t = p.tape();
  const int k = static_cast<int>(t.value(z_post).cols());
  Var acc{};
  for (const auto& r : ranges.ranges) {
    Var pt{};
    if (r.count > 0) {
      Var block = rows(t, z_post, r.begin, r.count);
      pt = concat_cols(t, {colwise_mean(t, block), colwise_max(t, block)});
    } else {
      pt = t.constant(Mat::Zero(1, 2 * k));  // empty type contributes zeros
    }
    acc = acc.valid() ? add(t, acc, pt) : pt;
  }
  return scale(t, acc, 1.0 / static_cast<double>(kDsnTypes));
}

}  // namespace dsgnn

#ifndef DSGNN_DSG_HPP
#define DSGNN_DSG_HPP

#include <array>
#include <random>
#include <vector>

#include "dsgnn/assignment.hpp"
#include "dsgnn/autodiff.hpp"
#include "dsgnn/params.hpp"

namespace dsgnn {

struct DsgDims {
  int d_state = 64;   // d_z, equals the observation embedding width
  int d_embed_lap = 16;  // e, long-term embedding width
  int attn_heads = 4;
  int attn_dim = 16;
  int gcn_layers = 2;
  int k = 64;           // post-convolution width (kept equal to d_state)
  double prune_frac = 0.3;
  int init_hidden = 64;
};

/// Registers init MLP, identity embeddings, Laplacian parameters and GCN
/// weights for a registry with N nodes.
void register_dsg(ParameterStore& store, const DsgDims& dims, int n_nodes,
                  int d_id, int global_dim, std::mt19937_64& rng);

/// z_i = MLP([global_context; e_i]) per node; identity embeddings break
/// the symmetry between same-type nodes.
ad::Var init_states(ParamContext& p, const Eigen::RowVectorXd& global_context,
                    ad::Var identity, const DsgDims& dims);

/// Z = Z0 + D A H_obs with D = diag(1/|S_i|); empty rows contribute zero.
ad::Var update_states(ParamContext& p, ad::Var z0, ad::Var a_thresholded,
                      ad::Var h_obs);

/// Head-averaged attention weights over Z (row-stochastic N x N).
ad::Var short_term_laplacian(ParamContext& p, ad::Var z, const DsgDims& dims);

/// Row-softmax of relu(E_s E_t^T). `smooth` swaps relu for softplus.
ad::Var long_term_laplacian(ParamContext& p, ad::Var e_s, ad::Var e_t,
                            bool smooth = false);

/// sigmoid(alpha_raw) convex blend, then bottom-K pruning with
/// lexicographic tie-break. Exactly floor(K*N^2) entries are zeroed.
ad::Var combine_and_prune(ParamContext& p, ad::Var l_short, ad::Var l_long,
                          ad::Var alpha_raw, double prune_frac);

Mat prune_mask(const Mat& l, double prune_frac);

/// Z^(l+1) = act(L Z^(l) W^(l)) + Z^(l), no degree normalization.
ad::Var graph_convolve(ParamContext& p, ad::Var z, ad::Var laplacian,
                       const DsgDims& dims, bool smooth = false);

/// Mixed mean-max pooling per DSN type, then a mean over types; result is
/// a 1 x 2k row. Types with no active nodes contribute zeros.
struct TypeRanges {
  // begin/count per DsnType over the *active* row index space
  std::array<DSNRegistry::Range, kDsnTypes> ranges;
};

ad::Var pool(ParamContext& p, ad::Var z_post, const TypeRanges& ranges);

}  // namespace dsgnn

#endif

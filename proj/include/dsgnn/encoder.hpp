#ifndef DSGNN_ENCODER_HPP
#define DSGNN_ENCODER_HPP

#include <random>
#include <vector>

#include "dsgnn/autodiff.hpp"
#include "dsgnn/datamodel.hpp"
#include "dsgnn/params.hpp"

namespace dsgnn {

struct EncoderDims {
  int d_dynamic = 32;  // dynamic-context GRU hidden
  int d_context = 32;  // context MLP output
  int d_traffic = 32;  // traffic GRU hidden
  int d_embed = 64;    // fused observation embedding
  int mlp_hidden = 64;
};

/// Registers both GRUs and both MLPs under "enc.*".
void register_encoder(ParameterStore& store, const EncoderDims& dims,
                      const FeatureLayout& layout, std::mt19937_64& rng);

/// Final GRU state over the dynamic context features (|S| x d_dynamic).
ad::Var embed_dynamic_context(ParamContext& p, const std::vector<ad::Var>& x_dynamic,
                              const EncoderDims& dims);

/// MLP over [H_dynamic; X_static] (|S| x d_context).
ad::Var embed_context(ParamContext& p, ad::Var h_dynamic, ad::Var x_static,
                      const EncoderDims& dims);

/// Final GRU state over [speed, flow, mask] channels (|S| x d_traffic).
/// Masked entries must already be zero-filled; the mask channel rides along
/// as an explicit input.
ad::Var embed_traffic(ParamContext& p, const std::vector<ad::Var>& x_traffic_masked,
                      const EncoderDims& dims);

/// Fusion MLP over [H_traffic; H_context] (|S| x d_embed).
ad::Var fuse(ParamContext& p, ad::Var h_traffic, ad::Var h_context,
             const EncoderDims& dims);

}  // namespace dsgnn

#endif

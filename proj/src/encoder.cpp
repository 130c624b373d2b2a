#include "dsgnn/encoder.hpp"

#include "dsgnn/nn.hpp"

namespace dsgnn {

void register_encoder(ParameterStore& store, const EncoderDims& dims,
                      const FeatureLayout& layout, std::mt19937_64& rng) {
  nn::register_gru(store, "enc.dyn", layout.f_dynamic, dims.d_dynamic, rng);
  nn::register_mlp(store, "enc.ctx", dims.d_dynamic + layout.f_static,
                   dims.mlp_hidden, dims.d_context, rng);
  nn::register_gru(store, "enc.traffic", 3, dims.d_traffic, rng);
  nn::register_mlp(store, "enc.fuse", dims.d_traffic + dims.d_context,
                   dims.mlp_hidden, dims.d_embed, rng);
}

ad::Var embed_dynamic_context(ParamContext& p, const std::vector<ad::Var>& x_dynamic,
                              const EncoderDims& dims) {
  return nn::gru_last_state(p, "enc.dyn", x_dynamic, dims.d_dynamic);
}

ad::Var embed_context(ParamContext& p, ad::Var h_dynamic, ad::Var x_static,
                      const EncoderDims& dims) {
  ad::Var in = ad::concat_cols(p.tape(), {h_dynamic, x_static});
  return nn::mlp(p, "enc.ctx", in, nn::Act::tanh);
}

ad::Var embed_traffic(ParamContext& p, const std::vector<ad::Var>& x_traffic_masked,
                      const EncoderDims& dims) {
  return nn::gru_last_state(p, "enc.traffic", x_traffic_masked, dims.d_traffic);
}

ad::Var fuse(ParamContext& p, ad::Var h_traffic, ad::Var h_context,
             const EncoderDims& dims) {
  ad::Var in = ad::concat_cols(p.tape(), {h_traffic, h_context});
  return nn::mlp(p, "enc.fuse", in, nn::Act::tanh);
}

}  // namespace dsgnn

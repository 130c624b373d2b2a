#ifndef DSGNN_NN_HPP
#define DSGNN_NN_HPP

#include <random>
#include <string>
#include <vector>

#include "dsgnn/autodiff.hpp"
#include "dsgnn/params.hpp"

namespace dsgnn::nn {

using ad::Var;

enum class Act { tanh, relu, softplus, identity };

Var activate(ad::Tape& t, Var x, Act act);

/// Registers the parameters of a 2-layer MLP under `prefix`.
void register_mlp(ParameterStore& store, const std::string& prefix, int in,
                  int hidden, int out, std::mt19937_64& rng);

/// y = act(x W1 + b1) W2 + b2, optionally with a final activation.
Var mlp(ParamContext& p, const std::string& prefix, Var x, Act hidden_act,
        Act out_act = Act::identity);

/// Registers GRU cell parameters (update/reset/candidate gates).
void register_gru(ParameterStore& store, const std::string& prefix, int in,
                  int hidden, std::mt19937_64& rng);

/// Runs a GRU over `steps` (each rows x in) from a zero initial state and
/// returns the final hidden state (rows x hidden).
Var gru_last_state(ParamContext& p, const std::string& prefix,
                   const std::vector<Var>& steps, int hidden);

/// Registers per-head query/key projections for attention over states.
void register_attention(ParameterStore& store, const std::string& prefix,
                        int dim, int head_dim, int heads, std::mt19937_64& rng);

/// Head-averaged scaled dot-product attention weights (keys = queries = z);
/// each head's weight matrix is row-stochastic, so the average is too.
Var attention_weights(ParamContext& p, const std::string& prefix, Var z,
                      int head_dim, int heads);

}  // namespace dsgnn::nn

#endif

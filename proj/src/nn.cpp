#include "dsgnn/nn.hpp"

#include <cmath>

namespace dsgnn::nn {

using namespace ad;

Var activate(Tape& t, Var x, Act act) {
  switch (act) {
    case Act::tanh: return tanh_act(t, x);
    case Act::relu: return relu(t, x);
    case Act::softplus: return softplus(t, x);
    case Act::identity: return x;
  }
  return x;
}

void register_mlp(ParameterStore& store, const std::string& prefix, int in,
                  int hidden, int out, std::mt19937_64& rng) {
  store.create(prefix + ".w1", in, hidden, rng);
  store.create_zeros(prefix + ".b1", 1, hidden);
  store.create(prefix + ".w2", hidden, out, rng);
  store.create_zeros(prefix + ".b2", 1, out);
}

namespace {
Var linear(ParamContext& p, const std::string& w, const std::string& b, Var x) {
  Tape& t = p.tape();
  Var wx = matmul(t, x, p(w));
  Var bias = broadcast_row(t, p(b), static_cast<int>(t.value(wx).rows()));
  return add(t, wx, bias);
}
}  // namespace

Var mlp(ParamContext& p, const std::string& prefix, Var x, Act hidden_act,
        Act out_act) {
  Tape& t = p.tape();
  Var h = activate(t, linear(p, prefix + ".w1", prefix + ".b1", x), hidden_act);
  return activate(t, linear(p, prefix + ".w2", prefix + ".b2", h), out_act);
}

void register_gru(ParameterStore& store, const std::string& prefix, int in,
                  int hidden, std::mt19937_64& rng) {
  for (const char* g : {"z", "r", "h"}) {
    store.create(prefix + ".w" + g, in, hidden, rng);
    store.create(prefix + ".u" + g, hidden, hidden, rng);
    store.create_zeros(prefix + ".b" + g, 1, hidden);
  }
}

Var gru_last_state(ParamContext& p, const std::string& prefix,
                   const std::vector<Var>& steps, int hidden) {
  Tape& t = p.tape();
  if (steps.empty()) throw std::invalid_argument("gru: W = 0");
  const int rows = static_cast<int>(t.value(steps[0]).rows());
  Var h = t.constant(Mat::Zero(rows, hidden));
  for (Var x : steps) {
    auto gate = [&](const char* g, Var hin) {
      Var pre = add(t, matmul(t, x, p(prefix + ".w" + g)),
                    matmul(t, hin, p(prefix + ".u" + g)));
      return add(t, pre, broadcast_row(t, p(prefix + ".b" + g), rows));
    };
    Var z = sigmoid(t, gate("z", h));
    Var r = sigmoid(t, gate("r", h));
    Var rh = cmul(t, r, h);
    Var cand = tanh_act(t, gate("h", rh));
    // h' = (1 - z) o h + z o cand
    Var keep = sub(t, t.constant(Mat::Ones(rows, hidden)), z);
    h = add(t, cmul(t, keep, h), cmul(t, z, cand));
  }
  return h;
}

void register_attention(ParameterStore& store, const std::string& prefix,
                        int dim, int head_dim, int heads, std::mt19937_64& rng) {
  for (int i = 0; i < heads; ++i) {
    store.create(prefix + ".wq" + std::to_string(i), dim, head_dim, rng);
    store.create(prefix + ".wk" + std::to_string(i), dim, head_dim, rng);
  }
}

Var attention_weights(ParamContext& p, const std::string& prefix, Var z,
                      int head_dim, int heads) {
  Tape& t = p.tape();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  Var acc{};
  for (int i = 0; i < heads; ++i) {
    Var q = matmul(t, z, p(prefix + ".wq" + std::to_string(i)));
    Var k = matmul(t, z, p(prefix + ".wk" + std::to_string(i)));
    Var scores = scale(t, matmul(t, q, transpose(t, k)), inv_sqrt);
    Var w = row_softmax(t, scores);
    acc = acc.valid() ? add(t, acc, w) : w;
  }
  return scale(t, acc, 1.0 / static_cast<double>(heads));
}

}  // namespace dsgnn::nn

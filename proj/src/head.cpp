#include "dsgnn/head.hpp"

#include <json.hpp>

#include <cmath>
#include <stdexcept>

#include "dsgnn/nn.hpp"

namespace dsgnn {

using namespace ad;

void register_head(ParameterStore& store, const HeadDims& dims, int query_dim,
                   int d_state, int k, int horizon, std::mt19937_64& rng) {
  nn::register_mlp(store, "head", query_dim + d_state + k + 2 * k, dims.hidden,
                   horizon * 2, rng);
}

Var infer(ParamContext& p, Var q, Var a_q, Var z, Var z_post, Var g) {
  Tape& t = p.tape();
  const int n_q = static_cast<int>(t.value(q).rows());
  if (n_q == 0)
    return t.constant(Mat::Zero(0, t.value(p("head.b2")).cols()));
  Var zq = matmul(t, a_q, z);
  Var zq_post = matmul(t, a_q, z_post);
  Var gq = broadcast_row(t, g, n_q);
  Var in = concat_cols(t, {q, zq, zq_post, gq});
  return nn::mlp(p, "head", in, nn::Act::tanh);
}

Mat expand_target_mask(const Mat& target_mask) {
  Mat m(target_mask.rows(), target_mask.cols() * 2);
  for (Eigen::Index h = 0; h < target_mask.cols(); ++h) {
    m.col(2 * h) = target_mask.col(h);
    m.col(2 * h + 1) = target_mask.col(h);
  }
  return m;
}

Var loss_query(Tape& t, Var y_pred, const Mat& y_target, const Mat& target_mask) {
  Mat mask = expand_target_mask(target_mask);
  if (mask.sum() <= 0.0) throw std::invalid_argument("no supervised targets");
  return masked_mse(t, y_pred, y_target, mask);
}

void MetricAccumulator::add(const Mat& y_pred_raw, const Mat& y_raw,
                            const Mat& target_mask, double eps_mape) {
  for (Eigen::Index r = 0; r < target_mask.rows(); ++r) {
    for (Eigen::Index h = 0; h < target_mask.cols(); ++h) {
      if (target_mask(r, h) <= 0.0) {
        ++masked_out;
        continue;
      }
      for (int f = 0; f < 2; ++f) {
        const double y = y_raw(r, 2 * h + f);
        const double e = y_pred_raw(r, 2 * h + f) - y;
        abs_err[f] += std::abs(e);
        sq_err[f] += e * e;
        ++count[f];
        if (std::abs(y) >= eps_mape) {
          pct_err[f] += std::abs(e / y) * 100.0;
          ++pct_count[f];
        }
      }
    }
  }
}

MetricReport MetricAccumulator::report(const std::string& mode, int horizon) const {
  MetricReport rep;
  rep.mode = mode;
  rep.horizon = horizon;
  rep.masked_out = masked_out;
  rep.evaluated = count[0];
  auto safe = [](double num, std::int64_t den) {
    return den > 0 ? num / static_cast<double>(den) : 0.0;
  };
  rep.mae_speed = safe(abs_err[0], count[0]);
  rep.rmse_speed = std::sqrt(safe(sq_err[0], count[0]));
  rep.mape_speed = safe(pct_err[0], pct_count[0]);
  rep.mae_flow = safe(abs_err[1], count[1]);
  rep.rmse_flow = std::sqrt(safe(sq_err[1], count[1]));
  rep.mape_flow = safe(pct_err[1], pct_count[1]);
  return rep;
}

MetricReport metrics(const Mat& y_pred_raw, const Mat& y_raw,
                     const Mat& target_mask, double eps_mape) {
  MetricAccumulator acc;
  acc.add(y_pred_raw, y_raw, target_mask, eps_mape);
  return acc.report("", static_cast<int>(target_mask.cols()));
}

std::string MetricReport::to_json() const {
  nlohmann::json j;
  j["mode"] = mode;
  j["horizon"] = horizon;
  j["speed"] = {{"mae", mae_speed}, {"rmse", rmse_speed}, {"mape", mape_speed}};
  j["flow"] = {{"mae", mae_flow}, {"rmse", rmse_flow}, {"mape", mape_flow}};
  j["masked_out"] = masked_out;
  j["evaluated"] = evaluated;
  return j.dump(2);
}

}  // namespace dsgnn

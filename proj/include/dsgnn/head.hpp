#ifndef DSGNN_HEAD_HPP
#define DSGNN_HEAD_HPP

#include <random>
#include <string>

#include "dsgnn/autodiff.hpp"
#include "dsgnn/datamodel.hpp"
#include "dsgnn/params.hpp"

namespace dsgnn {

struct HeadDims {
  int hidden = 256;
};

void register_head(ParameterStore& store, const HeadDims& dims, int query_dim,
                   int d_state, int k, int horizon, std::mt19937_64& rng);

/// Single-shot inference for all horizon timestamps:
/// MLP([q; A_q Z; A_q Z'; g]) -> |Q| x (H*2), column h*2+f.
ad::Var infer(ParamContext& p, ad::Var q, ad::Var a_q, ad::Var z, ad::Var z_post,
              ad::Var g);

/// Masked MSE over both traffic features jointly (normalized units).
/// target is |Q| x (H*2); mask is |Q| x H and covers both features of a
/// timestamp. Throws if the mask is empty.
ad::Var loss_query(ad::Tape& t, ad::Var y_pred, const Mat& y_target,
                   const Mat& target_mask);

/// Expands a |Q| x H mask to |Q| x (H*2) over the feature column layout.
Mat expand_target_mask(const Mat& target_mask);

struct MetricReport {
  double mae_speed = 0, rmse_speed = 0, mape_speed = 0;
  double mae_flow = 0, rmse_flow = 0, mape_flow = 0;
  std::int64_t masked_out = 0;  // target entries excluded by mask
  std::int64_t evaluated = 0;   // (query, timestamp) pairs included
  std::string mode;
  int horizon = 0;

  std::string to_json() const;
};

struct MetricAccumulator {
  double abs_err[2] = {0, 0}, sq_err[2] = {0, 0}, pct_err[2] = {0, 0};
  std::int64_t count[2] = {0, 0}, pct_count[2] = {0, 0};
  std::int64_t masked_out = 0;

  /// Raw (de-normalized) units on both sides.
  void add(const Mat& y_pred_raw, const Mat& y_raw, const Mat& target_mask,
           double eps_mape);
  MetricReport report(const std::string& mode, int horizon) const;
};

inline constexpr double kDefaultEpsMape = 1.0;

MetricReport metrics(const Mat& y_pred_raw, const Mat& y_raw,
                     const Mat& target_mask, double eps_mape = kDefaultEpsMape);

}  // namespace dsgnn

#endif

#include "dsgnn/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dsgnn/assignment.hpp"
#include "dsgnn/nn.hpp"

namespace dsgnn {

namespace {

/// Mean of feature f over sensors valid at window step t (zero if none).
double step_mean(const TrafficSample& s, int t, int f) {
  double sum = 0.0;
  int n = 0;
  for (Eigen::Index i = 0; i < s.obs_mask.rows(); ++i) {
    if (s.obs_mask(i, t) == 0.0) continue;
    sum += s.x_obs[t](i, f);
    ++n;
  }
  return n > 0 ? sum / n : 0.0;
}

int last_valid_step(const TrafficSample& s) {
  for (int t = static_cast<int>(s.x_obs.size()) - 1; t >= 0; --t)
    if (s.obs_mask.col(t).sum() > 0.0) return t;
  return -1;
}

}  // namespace

Mat mean_observation_baseline(const TrafficSample& sample, const TaskMode& task) {
  const int q = static_cast<int>(sample.sensor_ids_query.size());
  const int w = static_cast<int>(sample.x_obs.size());
  Mat y = Mat::Zero(q, task.horizon * 2);
  for (int f = 0; f < 2; ++f) {
    if (task.mode == Mode::reconstruct) {
      // Reconstruction targets the trailing `horizon` steps of the window.
      for (int h = 0; h < task.horizon; ++h) {
        const int t = std::max(0, w - task.horizon + h);
        y.col(h * 2 + f).setConstant(step_mean(sample, std::min(t, w - 1), f));
      }
    } else {
      double sum = 0.0;
      std::int64_t n = 0;
      for (int t = 0; t < w; ++t)
        for (Eigen::Index i = 0; i < sample.obs_mask.rows(); ++i)
          if (sample.obs_mask(i, t) != 0.0) {
            sum += sample.x_obs[t](i, f);
            ++n;
          }
      const double v = n > 0 ? sum / static_cast<double>(n) : 0.0;
      for (int h = 0; h < task.horizon; ++h) y.col(h * 2 + f).setConstant(v);
    }
  }
  return y;
}

Mat persistence_baseline(const TrafficSample& sample, const TaskMode& task) {
  const int q = static_cast<int>(sample.sensor_ids_query.size());
  Mat y = Mat::Zero(q, task.horizon * 2);
  const int t = last_valid_step(sample);
  if (t < 0) return y;
  for (int f = 0; f < 2; ++f) {
    const double v = step_mean(sample, t, f);
    for (int h = 0; h < task.horizon; ++h) y.col(h * 2 + f).setConstant(v);
  }
  return y;
}

CoordMap sensor_coordinates(const std::vector<SensorContext>& contexts) {
  CoordMap m;
  for (const auto& c : contexts) m[c.sensor_id] = {c.lat, c.lon};
  return m;
}

Mat nearest_observation_baseline(const TrafficSample& sample, const TaskMode& task,
                                 const CoordMap& coords) {
  const int q = static_cast<int>(sample.sensor_ids_query.size());
  const int w = static_cast<int>(sample.x_obs.size());
  Mat y = Mat::Zero(q, task.horizon * 2);
  for (int qi = 0; qi < q; ++qi) {
    auto qc = coords.find(sample.sensor_ids_query[qi]);
    if (qc == coords.end())
      throw std::invalid_argument("unknown query sensor " +
                                  sample.sensor_ids_query[qi]);
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t oi = 0; oi < sample.sensor_ids_obs.size(); ++oi) {
      auto oc = coords.find(sample.sensor_ids_obs[oi]);
      if (oc == coords.end())
        throw std::invalid_argument("unknown observation sensor " +
                                    sample.sensor_ids_obs[oi]);
      const double d =
          haversine_km(qc->second.first, qc->second.second, oc->second.first,
                       oc->second.second);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(oi);
      }
    }
    if (best < 0) continue;
    if (task.mode == Mode::reconstruct) {
      // Reconstruction targets the trailing `horizon` steps of the window.
      for (int h = 0; h < task.horizon; ++h) {
        const int t = std::min(std::max(0, w - task.horizon + h), w - 1);
        const double valid = sample.obs_mask(best, t);
        for (int f = 0; f < 2; ++f)
          y(qi, h * 2 + f) = valid != 0.0 ? sample.x_obs[t](best, f) : 0.0;
      }
    } else {
      int t = -1;
      for (int tt = w - 1; tt >= 0; --tt)
        if (sample.obs_mask(best, tt) != 0.0) {
          t = tt;
          break;
        }
      for (int h = 0; h < task.horizon; ++h)
        for (int f = 0; f < 2; ++f)
          y(qi, h * 2 + f) = t >= 0 ? sample.x_obs[t](best, f) : 0.0;
    }
  }
  return y;
}

DenseAttentionReference::DenseAttentionReference(int f_total, int horizon,
                                                int d_model, std::uint64_t seed)
    : f_total_(f_total), horizon_(horizon), d_(d_model) {
  std::mt19937_64 rng(seed);
  params_.create("ref.in.w", f_total, d_model, rng);
  params_.create_zeros("ref.in.b", 1, d_model);
  params_.create("ref.wq", d_model, d_model, rng);
  params_.create("ref.wk", d_model, d_model, rng);
  params_.create("ref.out.w", 2 * d_model, horizon * 2, rng);
  params_.create_zeros("ref.out.b", 1, horizon * 2);
}

ad::Var DenseAttentionReference::loss(ParamContext& p,
                                      const TrafficSample& sample) const {
  using namespace ad;
  Tape& t = p.tape();
  const int s = static_cast<int>(sample.sensor_ids_obs.size());
  const int w = static_cast<int>(sample.x_obs.size());

  // Window-mean sensor features, zero-filled at invalid steps.
  Mat x = Mat::Zero(s, f_total_);
  for (int step = 0; step < w; ++step)
    for (int i = 0; i < s; ++i)
      if (sample.obs_mask(i, step) != 0.0) x.row(i) += sample.x_obs[step].row(i);
  x /= static_cast<double>(w);

  Var h = tanh_act(t, add(t, matmul(t, t.constant(x), p("ref.in.w")),
                          broadcast_row(t, p("ref.in.b"), s)));
  Var qm = matmul(t, h, p("ref.wq"));
  Var km = matmul(t, h, p("ref.wk"));
  Var attn = row_softmax(
      t, scale(t, matmul(t, qm, transpose(t, km)), 1.0 / std::sqrt(double(d_))));
  Var ctx = matmul(t, attn, h);
  Var y = add(t, matmul(t, concat_cols(t, {h, ctx}), p("ref.out.w")),
              broadcast_row(t, p("ref.out.b"), s));

  Mat target = Mat::Zero(s, horizon_ * 2);
  Mat mask = Mat::Zero(s, horizon_ * 2);
  for (int hh = 0; hh < horizon_; ++hh) {
    const int step = std::max(0, w - horizon_ + hh);
    for (int i = 0; i < s; ++i) {
      if (sample.obs_mask(i, step) == 0.0) continue;
      for (int f = 0; f < 2; ++f) {
        target(i, hh * 2 + f) = sample.x_obs[step](i, f);
        mask(i, hh * 2 + f) = 1.0;
      }
    }
  }
  return masked_mse(t, y, target, mask);
}

}  // namespace dsgnn

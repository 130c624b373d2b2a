#include "dsgnn/model.hpp"

#include <json.hpp>

#include <random>
#include <stdexcept>

#include "dsgnn/nn.hpp"

namespace dsgnn {

using namespace ad;

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.enc = EncoderDims{3, 3, 3, 4, 4};
  c.dsg.d_state = 4;
  c.dsg.k = 4;
  c.dsg.d_embed_lap = 3;
  c.dsg.attn_heads = 2;
  c.dsg.attn_dim = 3;
  c.dsg.gcn_layers = 1;
  c.dsg.init_hidden = 4;
  c.head.hidden = 6;
  c.n_env = 2;
  c.n_tmp = 1;
  c.d_id = 3;
  c.gate_hidden = 4;
  c.smooth_activations = true;
  c.semantic_present_only = true;
  return c;
}

DeepStateModel::DeepStateModel(FeatureLayout layout, TaskMode task,
                               const std::vector<SensorContext>& contexts,
                               ModelConfig cfg)
    : layout_(std::move(layout)), task_(task), cfg_(cfg) {
  registry_ = build_registry(contexts, cfg_.n_env, cfg_.n_tmp, cfg_.d_id,
                             cfg_.sigma_km, cfg_.semantic_present_only);
  Mat static_block = static_assignment(contexts, registry_);
  for (std::size_t i = 0; i < contexts.size(); ++i)
    static_cols_[contexts[i].sensor_id] = static_block.col(static_cast<int>(i));

  std::mt19937_64 rng(cfg_.seed);
  register_encoder(params_, cfg_.enc, layout_, rng);
  register_dsg(params_, cfg_.dsg, registry_.total(), cfg_.d_id, 9, rng);
  register_gate(params_, "gate.env", 3, cfg_.dsg.d_state, cfg_.gate_hidden, rng);
  register_gate(params_, "gate.tmp", cfg_.enc.d_traffic, cfg_.dsg.d_state,
                cfg_.gate_hidden, rng);
  params_.create("gate.tmp.placeholder", 1, cfg_.enc.d_traffic, rng);
  register_head(params_, cfg_.head, query_feature_dim(), cfg_.dsg.d_state,
                cfg_.dsg.k, task_.horizon, rng);
}

const Eigen::VectorXd& DeepStateModel::static_column(
    const std::string& sensor_id) const {
  auto it = static_cols_.find(sensor_id);
  if (it == static_cols_.end())
    throw std::out_of_range("unknown sensor id: " + sensor_id);
  return it->second;
}

DeepStateModel::ActiveSet DeepStateModel::active_set(
    const ForwardOptions& opts) const {
  ActiveSet a;
  int cursor = 0;
  auto add_type = [&](DsnType t, bool keep) {
    auto r = registry_.type_range(t);
    auto& out = a.ranges.ranges[static_cast<int>(t)];
    if (!keep || r.count == 0) {
      out = {cursor, 0};
      return;
    }
    out = {cursor, r.count};
    for (int i = 0; i < r.count; ++i) a.rows.push_back(r.begin + i);
    cursor += r.count;
  };
  add_type(DsnType::spatial, !opts.drop_static);
  add_type(DsnType::semantic, !opts.drop_static);
  add_type(DsnType::environmental, !opts.drop_dynamic);
  add_type(DsnType::temporal, !opts.drop_dynamic);
  if (a.rows.empty())
    throw std::invalid_argument("ablation removed every DSN type");
  return a;
}

namespace {

/// [static features; window-mean dynamic features] per row.
Mat summarize_context(const std::vector<Mat>& steps, int static_off, int f_static,
                      int f_dynamic) {
  const Eigen::Index n = steps.empty() ? 0 : steps[0].rows();
  Mat q(n, f_static + f_dynamic);
  if (n == 0) return q;
  q.leftCols(f_static) = steps[0].middleCols(static_off, f_static);
  Mat dyn = Mat::Zero(n, f_dynamic);
  for (const auto& x : steps) dyn += x.middleCols(static_off + f_static, f_dynamic);
  q.rightCols(f_dynamic) = dyn / static_cast<double>(steps.size());
  return q;
}

}  // namespace

ForwardResult DeepStateModel::forward(ParamContext& p, const TrafficSample& sample,
                                      const ForwardOptions& opts) const {
  Tape& t = p.tape();
  const int W = task_.window;
  const int H = task_.horizon;
  const int f_static = layout_.f_static;
  const int f_dynamic = layout_.f_dynamic;
  const int n_obs = static_cast<int>(sample.sensor_ids_obs.size());
  const int n_query = static_cast<int>(sample.sensor_ids_query.size());
  const bool smooth = cfg_.smooth_activations;

  ActiveSet active = active_set(opts);
  const int n_act = static_cast<int>(active.rows.size());

  // ---- Observation encoder ----
  std::vector<Var> x_dyn(W), x_traffic(W);
  for (int k = 0; k < W; ++k) {
    x_dyn[k] = t.constant(sample.x_obs[k].middleCols(2 + f_static, f_dynamic));
    Mat tr(n_obs, 3);
    tr.leftCols(2) = sample.x_obs[k].leftCols(2);
    tr.col(2) = sample.obs_mask.col(k);
    x_traffic[k] = t.constant(std::move(tr));
  }
  Var x_static = t.constant(sample.x_obs[0].middleCols(2, f_static));
  Var h_dyn = embed_dynamic_context(p, x_dyn, cfg_.enc);
  Var h_ctx = embed_context(p, h_dyn, x_static, cfg_.enc);
  Var h_traffic = embed_traffic(p, x_traffic, cfg_.enc);
  Var h_obs = fuse(p, h_traffic, h_ctx, cfg_.enc);

  // ---- DSN initialization ----
  Var identity = select_rows(t, p("dsg.identity"), active.rows);
  Var z0 = init_states(p, sample.global_context, identity, cfg_.dsg);

  // ---- Assignments (observations) ----
  auto env_r = active.ranges.ranges[static_cast<int>(DsnType::environmental)];
  auto tmp_r = active.ranges.ranges[static_cast<int>(DsnType::temporal)];
  const int n_static_act =
      active.ranges.ranges[0].count + active.ranges.ranges[1].count;

  Mat env_feat_obs = Mat::Zero(n_obs, 3);  // window-mean weather/aqi
  for (int k = 0; k < W; ++k)
    env_feat_obs += sample.x_obs[k].middleCols(2 + f_static, 3);
  env_feat_obs /= static_cast<double>(W);

  auto build_assignment = [&](const std::vector<std::string>& ids,
                              Var env_feat, Var tmp_feat) -> Var {
    std::vector<Var> parts;
    if (n_static_act > 0) {
      Mat st(n_static_act, static_cast<Eigen::Index>(ids.size()));
      for (std::size_t c = 0; c < ids.size(); ++c)
        st.col(static_cast<Eigen::Index>(c)) = static_column(ids[c]);
      parts.push_back(t.constant(std::move(st)));
    }
    if (env_r.count > 0) {
      Var z_env = rows(t, z0, env_r.begin, env_r.count);
      parts.push_back(assign_dynamic(p, "gate.env", env_feat, z_env));
    }
    if (tmp_r.count > 0) {
      Var z_tmp = rows(t, z0, tmp_r.begin, tmp_r.count);
      parts.push_back(assign_dynamic(p, "gate.tmp", tmp_feat, z_tmp));
    }
    Var a_raw = parts.size() == 1 ? parts[0] : concat_rows(t, parts);
    return cmul_const(t, a_raw, threshold_mask(t.value(a_raw), cfg_.tau));
  };

  Var a_obs = build_assignment(sample.sensor_ids_obs, t.constant(env_feat_obs),
                               h_traffic);

  // ---- State update, Laplacian, convolution, pooling ----
  Var z = update_states(p, z0, a_obs, h_obs);
  Var l_short = short_term_laplacian(p, z, cfg_.dsg);
  Var e_src = select_rows(t, p("dsg.e_src"), active.rows);
  Var e_tgt = select_rows(t, p("dsg.e_tgt"), active.rows);
  Var l_long = long_term_laplacian(p, e_src, e_tgt, smooth);
  Var lap = combine_and_prune(p, l_short, l_long, p("dsg.alpha_raw"),
                              cfg_.dsg.prune_frac);
  Var z_post;
  if (opts.skip_gcn) {
    z_post = z;
  } else {
    ++gcn_invocations_;
    z_post = graph_convolve(p, z, lap, cfg_.dsg, smooth);
  }
  Var g = pool(p, z_post, active.ranges);

  ForwardResult out;
  out.n_active_nodes = n_act;

  // ---- Query inference ----
  Mat q_feat = summarize_context(sample.x_query, 0, f_static, f_dynamic);
  if (n_query > 0) {
    Var env_feat_q = t.constant(Mat(q_feat.middleCols(f_static, 3)));
    Var tmp_feat_q = broadcast_row(t, p("gate.tmp.placeholder"), n_query);
    Var a_q_cols = build_assignment(sample.sensor_ids_query, env_feat_q, tmp_feat_q);
    Var a_q = transpose(t, a_q_cols);
    out.y_pred = infer(p, t.constant(q_feat), a_q, z, z_post, g);
    if (sample.target_mask.sum() > 0.0)
      out.l1 = loss_query(t, out.y_pred, sample.y_target, sample.target_mask);
  } else {
    out.y_pred = t.constant(Mat::Zero(0, 2 * H));
  }

  // ---- Observation reconstruction loss (L2) ----
  if (opts.compute_l2 && H <= W && n_obs > 0) {
    Mat q2 = summarize_context(sample.x_obs, 2, f_static, f_dynamic);
    Var env_feat_o2 = t.constant(env_feat_obs);
    Var tmp_feat_o2 = broadcast_row(t, p("gate.tmp.placeholder"), n_obs);
    Var a_o2_cols =
        build_assignment(sample.sensor_ids_obs, env_feat_o2, tmp_feat_o2);
    Var a_o2 = transpose(t, a_o2_cols);
    Var y2 = infer(p, t.constant(q2), a_o2, z, z_post, g);
    Mat target2(n_obs, 2 * H);
    Mat mask2(n_obs, H);
    for (int h = 0; h < H; ++h) {
      const int k = W - H + h;
      target2.col(2 * h) = sample.x_obs[k].col(0);
      target2.col(2 * h + 1) = sample.x_obs[k].col(1);
      mask2.col(h) = sample.obs_mask.col(k);
    }
    if (mask2.sum() > 0.0) out.l2 = loss_query(t, y2, target2, mask2);
  }

  if (opts.want_diagnostics) {
    out.assignment = t.value(a_obs);
    out.laplacian = t.value(lap);
    out.pooled = t.value(g);
    const Mat& zp = t.value(z_post);
    for (const auto& r : active.ranges.ranges) {
      if (r.count == 0) {
        out.per_type_pooled.push_back(Mat::Zero(1, 2 * zp.cols()));
        continue;
      }
      Mat block = zp.middleRows(r.begin, r.count);
      Mat pt(1, 2 * zp.cols());
      pt.leftCols(zp.cols()) = block.colwise().mean();
      pt.rightCols(zp.cols()) = block.colwise().maxCoeff();
      out.per_type_pooled.push_back(std::move(pt));
    }
  }
  return out;
}

std::string DeepStateModel::dump_diagnostics(const TrafficSample& sample) const {
  ad::Tape tape;
  ParamContext p(tape, params_);
  ForwardOptions opts;
  opts.want_diagnostics = true;
  ForwardResult r = forward(p, sample, opts);
  nlohmann::json j;
  j["window_id"] = sample.window_id;
  j["node_names"] = registry_.node_names();
  auto mat_to_json = [](const Mat& m) {
    std::vector<std::vector<double>> rows(
        static_cast<std::size_t>(m.rows()),
        std::vector<double>(static_cast<std::size_t>(m.cols())));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] = m(i, c);
    return rows;
  };
  j["assignment"] = mat_to_json(r.assignment);
  j["laplacian"] = mat_to_json(r.laplacian);
  j["pooled"] = mat_to_json(r.pooled);
  static const char* kTypes[] = {"spatial", "semantic", "environmental", "temporal"};
  for (int i = 0; i < kDsnTypes; ++i)
    j["per_type_pooled"][kTypes[i]] = mat_to_json(r.per_type_pooled[i]);
  return j.dump(2);
}

}  // namespace dsgnn

#include "dsgnn/trainer.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace dsgnn {

std::vector<std::string> TrainConfig::validate() const {
  std::vector<std::string> v;
  if (gamma < 0.0) v.push_back("gamma >= 0 violated");
  if (epochs < 1) v.push_back("epochs >= 1 violated");
  if (batch_size < 1) v.push_back("batch_size >= 1 violated");
  if (learning_rate < 0.0) v.push_back("learning_rate >= 0 violated");
  if (patience < 1) v.push_back("patience >= 1 violated");
  if (clip_norm <= 0.0) v.push_back("clip_norm > 0 violated");
  return v;
}

double loss_weight_l2(double gamma, int epoch) {
  return std::pow(0.9, epoch) * gamma;
}

double total_loss(double l1, double l2, double gamma, int epoch) {
  return l1 + loss_weight_l2(gamma, epoch) * l2;
}

AdamOptimizer::AdamOptimizer(const ParameterStore& params) {
  for (const auto& [name, value] : params) {
    m_[name] = Mat::Zero(value.rows(), value.cols());
    v_[name] = Mat::Zero(value.rows(), value.cols());
  }
}

void AdamOptimizer::step(ParameterStore& params,
                         const std::map<std::string, Mat>& grads, double lr,
                         double clip_norm) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double sq_norm = 0.0;
  for (const auto& [name, g] : grads) sq_norm += g.squaredNorm();
  const double norm = std::sqrt(sq_norm);
  const double clip = norm > clip_norm ? clip_norm / norm : 1.0;

  ++t_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  for (auto& [name, value] : params) {
    auto it = grads.find(name);
    if (it == grads.end()) continue;  // parameter unused this step
    Mat g = it->second * clip;
    Mat& m = m_[name];
    Mat& v = v_[name];
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
    Mat mhat = m / bc1;
    Mat vhat = v / bc2;
    value -= lr * mhat.cwiseQuotient((vhat.cwiseSqrt().array() + eps).matrix());
  }
}

namespace {

struct BatchLoss {
  double value = 0.0;
  std::map<std::string, Mat> grads;
};

/// Mean total loss over a batch. Each sample runs on its own tape (the
/// batch mean distributes over per-sample gradients), which keeps peak
/// memory proportional to one window instead of the whole batch.
BatchLoss batch_loss_and_grads(const DeepStateModel& model,
                               const std::vector<const TrafficSample*>& batch,
                               double gamma, int epoch,
                               const ForwardOptions& base_opts) {
  ForwardOptions opts = base_opts;
  opts.compute_l2 = gamma > 0.0;  // gamma = 0 never evaluates the L2 path
  const double w2 = loss_weight_l2(gamma, epoch);
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  BatchLoss out;
  bool any = false;
  for (const TrafficSample* s : batch) {
    ad::Tape tape;
    ParamContext p(tape, model.params());
    ForwardResult r = model.forward(p, *s, opts);
    if (!r.l1.valid()) continue;
    any = true;
    ad::Var loss = r.l1;
    if (opts.compute_l2 && r.l2.valid())
      loss = ad::add(tape, loss, ad::scale(tape, r.l2, w2));
    tape.backward(loss);
    out.value += tape.value(loss)(0, 0) * inv_b;
    for (const auto& [name, var] : p.bound()) {
      const Mat& g = tape.grad(var);
      auto [it, fresh] = out.grads.try_emplace(name, Mat::Zero(g.rows(), g.cols()));
      it->second += inv_b * g;
    }
  }
  if (!any) throw std::runtime_error("batch without supervised targets");
  return out;
}

}  // namespace

double train_step(DeepStateModel& model,
                  const std::vector<const TrafficSample*>& batch,
                  AdamOptimizer& adam, const TrainConfig& cfg, int epoch,
                  const ForwardOptions& base_opts) {
  BatchLoss bl = batch_loss_and_grads(model, batch, cfg.gamma, epoch, base_opts);
  adam.step(model.params(), bl.grads, cfg.learning_rate, cfg.clip_norm);
  return bl.value;
}

double validation_l1(const DeepStateModel& model,
                     const std::vector<TrafficSample>& samples,
                     const ForwardOptions& base_opts) {
  double sum = 0.0;
  int n = 0;
  ForwardOptions opts = base_opts;
  opts.compute_l2 = false;
  for (const auto& s : samples) {
    ad::Tape tape;
    ParamContext p(tape, model.params());
    ForwardResult r = model.forward(p, s, opts);
    if (!r.l1.valid()) continue;
    sum += tape.value(r.l1)(0, 0);
    ++n;
  }
  return n > 0 ? sum / n : 0.0;
}

TrainResult train(DeepStateModel& model, std::vector<TrafficSample> train_samples,
                  const std::vector<TrafficSample>& val_samples,
                  const TrainConfig& cfg, const ForwardOptions& base_opts,
                  std::ostream* log, AdamOptimizer* optimizer) {
  auto violations = cfg.validate();
  if (!violations.empty())
    throw std::invalid_argument("TrainConfig: " + violations.front());
  if (train_samples.empty()) throw std::invalid_argument("no training samples");

  AdamOptimizer local_adam(model.params());
  AdamOptimizer& adam = optimizer ? *optimizer : local_adam;
  TrainResult result;
  std::map<std::string, Mat> best_params;
  int since_best = 0;

  std::vector<const TrafficSample*> order(train_samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = &train_samples[i];

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(cfg.seed ^ (0x9e3779b97f4a7c15ULL * (epoch + 1)));
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t off = 0; off < order.size(); off += cfg.batch_size) {
      std::vector<const TrafficSample*> batch(
          order.begin() + off,
          order.begin() + std::min(order.size(), off + cfg.batch_size));
      BatchLoss bl = batch_loss_and_grads(model, batch, cfg.gamma, epoch, base_opts);
      if (!std::isfinite(bl.value)) {
        std::ostringstream os;
        os << "non-finite loss at epoch " << epoch << " batch " << batches
           << " (first window id " << batch.front()->window_id << "); parameter norms:";
        for (const auto& [name, v] : model.params())
          os << " " << name << "=" << v.norm();
        throw std::runtime_error(os.str());
      }
      adam.step(model.params(), bl.grads, cfg.learning_rate, cfg.clip_norm);
      epoch_loss += bl.value;
      ++batches;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = batches > 0 ? epoch_loss / batches : 0.0;
    rec.val_l1 = validation_l1(model, val_samples, base_opts);
    const double alpha_raw = model.params().at("dsg.alpha_raw")(0, 0);
    rec.alpha = 1.0 / (1.0 + std::exp(-alpha_raw));
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                      .count();
    result.history.push_back(rec);
    if (log)
      (*log) << "epoch " << rec.epoch << " train_loss " << rec.train_loss
             << " val_l1 " << rec.val_l1 << " alpha " << rec.alpha << " elapsed_s "
             << rec.seconds << "\n";

    if (result.best_epoch < 0 || rec.val_l1 < result.best_val_l1) {
      result.best_epoch = epoch;
      result.best_val_l1 = rec.val_l1;
      best_params.clear();
      for (const auto& [name, v] : model.params()) best_params[name] = v;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }

  if (!best_params.empty()) restore_params(model.params(), best_params);
  return result;
}

std::string history_to_json(const std::vector<EpochRecord>& history) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : history) {
    j.push_back({{"epoch", r.epoch},
                 {"train_loss", r.train_loss},
                 {"val_l1", r.val_l1},
                 {"alpha", r.alpha},
                 {"seconds", r.seconds}});
  }
  return j.dump(2);
}

std::vector<EpochRecord> history_from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  std::vector<EpochRecord> out;
  for (const auto& e : j) {
    EpochRecord r;
    r.epoch = e.at("epoch").get<int>();
    r.train_loss = e.at("train_loss").get<double>();
    r.val_l1 = e.at("val_l1").get<double>();
    r.alpha = e.at("alpha").get<double>();
    r.seconds = e.at("seconds").get<double>();
    out.push_back(r);
  }
  return out;
}

GradCheckReport gradcheck(DeepStateModel& model, const TrafficSample& sample,
                          double h, double tolerance, double gamma,
                          const std::string& corrupt) {
  auto loss_value = [&]() {
    ad::Tape tape;
    ParamContext p(tape, model.params());
    ForwardOptions opts;
    opts.compute_l2 = true;
    ForwardResult r = model.forward(p, sample, opts);
    double l1 = r.l1.valid() ? tape.value(r.l1)(0, 0) : 0.0;
    double l2 = r.l2.valid() ? tape.value(r.l2)(0, 0) : 0.0;
    return total_loss(l1, l2, gamma, 0);
  };

  // Analytic pass.
  std::map<std::string, Mat> analytic;
  {
    ad::Tape tape;
    ParamContext p(tape, model.params());
    ForwardOptions opts;
    opts.compute_l2 = true;
    ForwardResult r = model.forward(p, sample, opts);
    ad::Var loss = r.l1;
    if (r.l2.valid())
      loss = ad::add(tape, loss, ad::scale(tape, r.l2, gamma));
    tape.backward(loss);
    for (const auto& [name, var] : p.bound()) analytic[name] = tape.grad(var);
  }
  if (!corrupt.empty()) {
    auto it = analytic.find(corrupt);
    if (it == analytic.end())
      throw std::invalid_argument("corrupt: unknown parameter " + corrupt);
    it->second *= 2.0;
  }

  GradCheckReport report;
  for (auto& [name, value] : model.params()) {
    GradCheckEntry entry;
    entry.param = name;
    const Mat& ga = analytic.count(name)
                        ? analytic[name]
                        : Mat::Zero(value.rows(), value.cols()).eval();
    for (Eigen::Index r = 0; r < value.rows(); ++r) {
      for (Eigen::Index c = 0; c < value.cols(); ++c) {
        const double orig = value(r, c);
        value(r, c) = orig + h;
        const double up = loss_value();
        value(r, c) = orig - h;
        const double down = loss_value();
        value(r, c) = orig;
        const double numeric = (up - down) / (2.0 * h);
        const double a = ga(r, c);
        const double rel =
            std::abs(a - numeric) / std::max(1e-6, std::abs(a) + std::abs(numeric));
        if (rel > entry.max_rel_err) {
          entry.max_rel_err = rel;
          entry.worst_row = static_cast<int>(r);
          entry.worst_col = static_cast<int>(c);
          entry.analytic = a;
          entry.numeric = numeric;
        }
      }
    }
    entry.ok = entry.max_rel_err < tolerance;
    if (!entry.ok) report.ok = false;
    if (entry.max_rel_err > report.max_rel_err) {
      report.max_rel_err = entry.max_rel_err;
      report.worst_param = name;
    }
    report.entries.push_back(entry);
  }
  return report;
}

namespace {

void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_i64(std::ostream& os, std::int64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_string(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void write_mat(std::ostream& os, const Mat& m) {
  write_u64(os, static_cast<std::uint64_t>(m.rows()));
  write_u64(os, static_cast<std::uint64_t>(m.cols()));
  os.write(reinterpret_cast<const char*>(m.data()),
           static_cast<std::streamsize>(sizeof(double) * m.size()));
}

[[noreturn]] void corrupt_fail(std::istream& is, const std::string& what) {
  std::ostringstream os;
  os << "corrupt checkpoint near byte offset " << is.tellg() << ": " << what;
  throw std::runtime_error(os.str());
}

std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) corrupt_fail(is, "truncated u64");
  return v;
}
std::int64_t read_i64(std::istream& is) {
  std::int64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) corrupt_fail(is, "truncated i64");
  return v;
}
std::string read_string(std::istream& is) {
  std::uint64_t n = read_u64(is);
  if (n > (1ULL << 30)) corrupt_fail(is, "implausible string length");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) corrupt_fail(is, "truncated string");
  return s;
}
Mat read_mat(std::istream& is) {
  std::uint64_t r = read_u64(is), c = read_u64(is);
  if (r > (1ULL << 24) || c > (1ULL << 24)) corrupt_fail(is, "implausible shape");
  Mat m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  is.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!is) corrupt_fail(is, "truncated tensor data");
  return m;
}

constexpr char kMagic[8] = {'D', 'S', 'G', 'N', 'N', 'C', 'K', '1'};

}  // namespace

void save_checkpoint(const std::string& path, const ParameterStore& params,
                     const AdamOptimizer& adam, const CheckpointMeta& meta) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os.write(kMagic, sizeof(kMagic));
  write_string(os, meta.format_version);
  write_string(os, meta.dataset_version);
  write_i64(os, meta.epoch);
  write_string(os, meta.layout_json);
  write_string(os, meta.normalizer_json);
  write_u64(os, params.size());
  for (const auto& [name, value] : params) {
    write_string(os, name);
    write_mat(os, value);
  }
  auto& a = const_cast<AdamOptimizer&>(adam);
  write_i64(os, adam.steps());
  for (const auto& [name, value] : a.moment1()) write_mat(os, value);
  for (const auto& [name, value] : a.moment2()) write_mat(os, value);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    corrupt_fail(is, "bad magic");
  LoadedCheckpoint ck;
  ck.meta.format_version = read_string(is);
  if (ck.meta.format_version != kCheckpointFormatVersion)
    throw std::runtime_error("checkpoint format version mismatch: got \"" +
                             ck.meta.format_version + "\", expected \"" +
                             kCheckpointFormatVersion + "\"");
  ck.meta.dataset_version = read_string(is);
  ck.meta.epoch = static_cast<int>(read_i64(is));
  ck.meta.layout_json = read_string(is);
  ck.meta.normalizer_json = read_string(is);
  const std::uint64_t n = read_u64(is);
  std::vector<std::string> names;
  for (std::uint64_t i = 0; i < n; ++i) {
    std::string name = read_string(is);
    names.push_back(name);
    ck.params[name] = read_mat(is);
  }
  ck.adam_steps = read_i64(is);
  for (const auto& name : names) ck.adam_m[name] = read_mat(is);
  for (const auto& name : names) ck.adam_v[name] = read_mat(is);
  return ck;
}

void restore_params(ParameterStore& params, const std::map<std::string, Mat>& saved) {
  for (auto& [name, value] : params) {
    auto it = saved.find(name);
    if (it == saved.end())
      throw std::runtime_error("checkpoint is missing parameter " + name);
    if (it->second.rows() != value.rows() || it->second.cols() != value.cols())
      throw std::runtime_error("checkpoint shape mismatch for " + name);
    value = it->second;
  }
}

}  // namespace dsgnn

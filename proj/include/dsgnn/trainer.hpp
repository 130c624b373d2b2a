#ifndef DSGNN_TRAINER_HPP
#define DSGNN_TRAINER_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dsgnn/model.hpp"
#include "dsgnn/synthdata.hpp"

namespace dsgnn {

struct TrainConfig {
  double gamma = 0.5;  // L2 weight
  int epochs = 40;
  int batch_size = 4;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  int patience = 10;       // early stop on validation L1
  double clip_norm = 5.0;  // global gradient norm

  std::vector<std::string> validate() const;
};

/// L = L1 + 0.9^epoch * gamma * L2.
double loss_weight_l2(double gamma, int epoch);
double total_loss(double l1, double l2, double gamma, int epoch);

/// Adam with bias correction. State layout mirrors the parameter store,
/// so checkpoints can carry it verbatim.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(const ParameterStore& params);

  void step(ParameterStore& params, const std::map<std::string, Mat>& grads,
            double lr, double clip_norm);

  std::int64_t steps() const { return t_; }
  std::map<std::string, Mat>& moment1() { return m_; }
  std::map<std::string, Mat>& moment2() { return v_; }
  void set_steps(std::int64_t t) { t_ = t; }

 private:
  std::map<std::string, Mat> m_, v_;
  std::int64_t t_ = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_l1 = 0.0;
  double alpha = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  double best_val_l1 = 0.0;
};

/// Evaluates mean L1 over (already normalized) samples, no L2 path.
double validation_l1(const DeepStateModel& model,
                     const std::vector<TrafficSample>& samples,
                     const ForwardOptions& base_opts);

/// One optimizer step on a batch (mean loss, one tape); returns the loss.
double train_step(DeepStateModel& model,
                  const std::vector<const TrafficSample*>& batch,
                  AdamOptimizer& adam, const TrainConfig& cfg, int epoch,
                  const ForwardOptions& base_opts);

/// Minibatch Adam training; deterministic given cfg.seed. Keeps the
/// best-validation parameters in the model on return. Aborts with
/// diagnostics on non-finite loss.
TrainResult train(DeepStateModel& model, std::vector<TrafficSample> train_samples,
                  const std::vector<TrafficSample>& val_samples,
                  const TrainConfig& cfg, const ForwardOptions& base_opts,
                  std::ostream* log = nullptr,
                  AdamOptimizer* optimizer = nullptr);

std::string history_to_json(const std::vector<EpochRecord>& history);
std::vector<EpochRecord> history_from_json(const std::string& text);

// ---- Gradient verification ----

struct GradCheckEntry {
  std::string param;
  double max_rel_err = 0.0;
  int worst_row = 0, worst_col = 0;
  double analytic = 0.0, numeric = 0.0;
  bool ok = true;
};

struct GradCheckReport {
  bool ok = true;
  double max_rel_err = 0.0;
  std::string worst_param;
  std::vector<GradCheckEntry> entries;
};

/// Central finite differences (step h) of L = L1 + gamma*L2 against the
/// analytic gradients, parameter tensor by parameter tensor. `corrupt`
/// multiplies one analytic tensor by 2 (fault-injection self test).
GradCheckReport gradcheck(DeepStateModel& model, const TrafficSample& sample,
                          double h = 1e-5, double tolerance = 1e-4,
                          double gamma = 0.5,
                          const std::string& corrupt = "");

// ---- Checkpointing ----

inline constexpr const char* kCheckpointFormatVersion = "dsgnn-ckpt-1";

struct CheckpointMeta {
  std::string format_version = kCheckpointFormatVersion;
  std::string dataset_version;
  int epoch = 0;
  std::string layout_json;
  std::string normalizer_json;
};

void save_checkpoint(const std::string& path, const ParameterStore& params,
                     const AdamOptimizer& adam, const CheckpointMeta& meta);

struct LoadedCheckpoint {
  CheckpointMeta meta;
  std::map<std::string, Mat> params;
  std::map<std::string, Mat> adam_m, adam_v;
  std::int64_t adam_steps = 0;
};

/// Throws with byte-offset diagnostics on corrupt files and on format
/// version mismatch.
LoadedCheckpoint load_checkpoint(const std::string& path);

/// Copies checkpoint tensors into the store; shape or name mismatch
/// fails loudly.
void restore_params(ParameterStore& params, const std::map<std::string, Mat>& saved);

}  // namespace dsgnn

#endif

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ducd/data.hpp"
#include "ducd/metrics.hpp"
#include "ducd/model.hpp"

namespace ducd {

struct TrainConfig {
  ModelConfig model;
  double lr = 1e-3;
  int epochs = 30;
  int batch_size = 8;
  std::uint64_t seed = 7;
  std::string data_root;
  std::string out_dir;

  // Adam moments; fixed.
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  void validate() const;
};

// Flat "key = value" config text; '#' starts a comment. Unknown keys fail
// fast with ConfigError.
TrainConfig parse_train_config_text(const std::string& text);
TrainConfig parse_train_config_file(const std::string& path);
std::string serialize_train_config(const TrainConfig& cfg);

// Adam with bias correction. State is kept per parameter in registration
// order; a parameter without a populated gradient is an error.
class Adam {
 public:
  Adam(double lr, double beta1 = TrainConfig::kBeta1,
       double beta2 = TrainConfig::kBeta2, double eps = TrainConfig::kEps);
  void step(ParamStore& params);
  std::int64_t steps_taken() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Checkpoint: magic "DUCD", version u32, config text, ordered parameter
// records (name, dims, little-endian f64 payload). Reload reproduces every
// parameter bitwise.
void save_checkpoint(const std::string& path, const TrainConfig& cfg,
                     const ParamStore& params);

struct LoadedCheckpoint {
  TrainConfig cfg;
  std::vector<std::pair<std::string, Tensor>> params;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

// Copies checkpoint tensors into the model; unknown names, missing names
// or shape disagreements raise errors.
void apply_checkpoint(const LoadedCheckpoint& ckpt, DualUNet& model);

// Pooled evaluation of a model over one split.
struct EvalResult {
  Metrics metrics;
  double mean_loss = 0.0;
};
EvalResult evaluate_model(const DualUNet& model, const Dataset& ds,
                          int batch_size, double threshold);

struct TrainResult {
  std::string csv_path;
  std::string best_ckpt_path;
  std::string last_ckpt_path;
  int best_epoch = 0;
  double best_val_f1 = 0.0;
  std::vector<double> train_loss;  // per epoch
};

// Full training loop: shuffled batches, forward -> bcl -> backward -> adam,
// per-epoch validation at the configured threshold, CSV logging, best-F1
// and final checkpoints. Deterministic byte-for-byte given (seed, config,
// data).
TrainResult train(const TrainConfig& cfg);

// Loads a checkpoint, rebuilds the model for the split's image size and
// returns pooled metrics; also writes one CSV row next to the checkpoint.
EvalResult evaluate_checkpoint(const std::string& ckpt_path,
                               const std::string& data_root,
                               const std::string& split,
                               std::optional<double> threshold_override);

struct AblationRow {
  Variant variant;
  Metrics test;
  TrainResult run;
};

// Trains base/mdam/full with identical seed and data, evaluates each best
// checkpoint on the test split, writes ablation.csv and an aligned table.
std::vector<AblationRow> ablate(const TrainConfig& cfg);

// Pooled baseline metrics over a dataset at a fixed threshold, and the
// best IoU over a threshold sweep (the strongest classical comparison).
Metrics evaluate_baseline(const Dataset& ds, double theta_c);
double best_baseline_iou(const Dataset& ds);

// --- gradient-check suites ---------------------------------------------------

struct GradCheckEntry {
  std::string name;
  double err = 0.0;
  double tol = 0.0;
  bool pass() const { return err < tol; }
};

// Per-operation checks with pinned seeds; linear ops at 1e-8, smooth
// nonlinear ops at 1e-4.
std::vector<GradCheckEntry> gradcheck_ops();

// End-to-end: BCL of the full-variant forward on a 2-sample 16x16 batch,
// checked over a pinned random 64-coordinate parameter subset.
std::vector<GradCheckEntry> gradcheck_model();

}  // namespace ducd

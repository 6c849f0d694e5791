#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "ducd/loss.hpp"
#include "ducd/train.hpp"

namespace fs = std::filesystem;

namespace ducd {
namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string metrics_csv(const Metrics& m) {
  return cat(fmt(m.precision), ",", fmt(m.recall), ",", fmt(m.f1), ",",
             fmt(m.iou));
}

Dataset load_split_or_fail(const std::string& root, const std::string& split) {
  try {
    return load_dataset(root, split);
  } catch (const IoError& e) {
    throw TrainError(cat("dataset not found: ", e.what()));
  }
}

}  // namespace

EvalResult evaluate_model(const DualUNet& model, const Dataset& ds,
                          int batch_size, double threshold) {
  NoGradGuard ng;
  ConfusionAccumulator acc;
  double loss_sum = 0.0;
  std::size_t batches = 0;
  for (const auto& idx :
       batch_indices(ds.samples.size(),
                     static_cast<std::size_t>(batch_size), std::nullopt)) {
    Batch b = make_batch(ds, idx);
    Tensor d = model.forward(b.x1, b.x2);
    loss_sum += bcl_loss(d, b.labels, model.config().margin).item();
    acc.add(DualUNet::predict(d, threshold), b.labels);
    ++batches;
  }
  EvalResult r;
  r.metrics = acc.finish();
  r.mean_loss = loss_sum / static_cast<double>(batches);
  return r;
}

TrainResult train(const TrainConfig& cfg) {
  cfg.validate();
  Dataset train_ds = load_split_or_fail(cfg.data_root, "train");
  Dataset val_ds = load_split_or_fail(cfg.data_root, "val");
  const auto h = train_ds.samples.front().x1.dim(1);
  const auto w = train_ds.samples.front().x1.dim(2);

  DualUNet model(cfg.model, h, w, cfg.seed);
  Adam opt(cfg.lr);

  fs::create_directories(cfg.out_dir);
  TrainResult result;
  result.csv_path = (fs::path(cfg.out_dir) / "metrics.csv").string();
  result.best_ckpt_path = (fs::path(cfg.out_dir) / "best.ckpt").string();
  result.last_ckpt_path = (fs::path(cfg.out_dir) / "last.ckpt").string();

  std::ofstream csv(result.csv_path, std::ios::trunc);
  if (!csv) throw IoError(cat(result.csv_path, ": cannot write"));
  csv << "epoch,split,loss,precision,recall,f1,iou\n";

  double best_f1 = -1.0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const std::uint64_t shuffle_seed =
        cfg.seed * 1000003ULL + static_cast<std::uint64_t>(epoch);
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (const auto& idx :
         batch_indices(train_ds.samples.size(),
                       static_cast<std::size_t>(cfg.batch_size),
                       shuffle_seed)) {
      Batch b = make_batch(train_ds, idx);
      Tensor d = model.forward(b.x1, b.x2);
      Tensor loss = bcl_loss(d, b.labels, cfg.model.margin);
      const double lv = loss.item();
      if (!std::isfinite(lv))
        throw TrainError(cat("non-finite loss ", lv, " at epoch ", epoch,
                             ", batch ", steps));
      model.params().zero_grads();
      backward(loss);
      opt.step(model.params());
      loss_sum += lv;
      ++steps;
    }
    const double train_loss = loss_sum / static_cast<double>(steps);
    result.train_loss.push_back(train_loss);

    EvalResult val =
        evaluate_model(model, val_ds, cfg.batch_size, cfg.model.threshold);
    csv << epoch << ",train," << fmt(train_loss) << ",,,,\n";
    csv << epoch << ",val," << fmt(val.mean_loss) << ","
        << metrics_csv(val.metrics) << "\n";
    csv.flush();
    std::cout << "epoch " << epoch << "  train_loss " << fmt(train_loss)
              << "  val_loss " << fmt(val.mean_loss) << "  val_f1 "
              << fmt(val.metrics.f1) << "\n";

    if (val.metrics.f1 > best_f1) {
      best_f1 = val.metrics.f1;
      result.best_epoch = epoch;
      result.best_val_f1 = best_f1;
      save_checkpoint(result.best_ckpt_path, cfg, model.params());
    }
  }
  save_checkpoint(result.last_ckpt_path, cfg, model.params());
  return result;
}

EvalResult evaluate_checkpoint(const std::string& ckpt_path,
                               const std::string& data_root,
                               const std::string& split,
                               std::optional<double> threshold_override) {
  LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
  Dataset ds = load_split_or_fail(data_root, split);
  const auto h = ds.samples.front().x1.dim(1);
  const auto w = ds.samples.front().x1.dim(2);
  DualUNet model(ckpt.cfg.model, h, w, ckpt.cfg.seed);
  apply_checkpoint(ckpt, model);
  const double threshold =
      threshold_override.value_or(ckpt.cfg.model.threshold);
  EvalResult r = evaluate_model(model, ds, ckpt.cfg.batch_size, threshold);

  const fs::path out =
      fs::path(ckpt_path).parent_path() / cat("eval_", split, ".csv");
  std::ofstream csv(out, std::ios::trunc);
  csv << "epoch,split,loss,precision,recall,f1,iou\n";
  csv << 0 << "," << split << "," << fmt(r.mean_loss) << ","
      << metrics_csv(r.metrics) << "\n";
  return r;
}

std::vector<AblationRow> ablate(const TrainConfig& cfg) {
  cfg.validate();
  std::vector<AblationRow> rows;
  for (Variant v : {Variant::base, Variant::mdam, Variant::full}) {
    TrainConfig sub = cfg;
    sub.model.variant = v;
    sub.out_dir = (fs::path(cfg.out_dir) / to_string(v)).string();
    std::cout << "=== ablation variant " << to_string(v) << " ===\n";
    AblationRow row;
    row.variant = v;
    row.run = train(sub);
    row.test = evaluate_checkpoint(row.run.best_ckpt_path, cfg.data_root,
                                   "test", std::nullopt)
                   .metrics;
    rows.push_back(std::move(row));
  }

  fs::create_directories(cfg.out_dir);
  std::ofstream csv(fs::path(cfg.out_dir) / "ablation.csv", std::ios::trunc);
  csv << "variant,precision,recall,f1,iou\n";
  for (const auto& r : rows)
    csv << to_string(r.variant) << "," << metrics_csv(r.test) << "\n";

  std::ofstream txt(fs::path(cfg.out_dir) / "ablation.txt", std::ios::trunc);
  char line[160];
  std::snprintf(line, sizeof(line), "%-8s %10s %10s %10s %10s\n", "variant",
                "precision", "recall", "f1", "iou");
  txt << line;
  std::cout << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%-8s %10.4f %10.4f %10.4f %10.4f\n",
                  to_string(r.variant).c_str(), r.test.precision,
                  r.test.recall, r.test.f1, r.test.iou);
    txt << line;
    std::cout << line;
  }
  return rows;
}

Metrics evaluate_baseline(const Dataset& ds, double theta_c) {
  ConfusionAccumulator acc;
  for (const auto& s : ds.samples)
    acc.add(classical_diff_baseline(s.x1, s.x2, theta_c), s.label);
  return acc.finish();
}

double best_baseline_iou(const Dataset& ds) {
  double best = 0.0;
  for (int i = 1; i <= 30; ++i) {
    const double theta = 0.02 * static_cast<double>(i);
    best = std::max(best, evaluate_baseline(ds, theta).iou);
  }
  return best;
}

}  // namespace ducd

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mingle/metrics.hpp"
#include "mingle/model.hpp"

namespace mingle::train {

struct TrainConfig {
  double lr = 1e-3;
  double weight_decay = 1e-3;
  int max_epochs = 200;
  int patience = 20;  // consecutive non-improving epochs on validation AUROC
  int n_seeds = 5;
  uint64_t seed_base = 1;

  void validate() const;
};

struct EpochStat {
  int epoch = 0;
  double train_loss = 0.0;
  metrics::MetricSet val;
};

struct RunRecord {
  std::string variant;
  uint64_t seed = 0;
  std::vector<EpochStat> epochs;
  int selected_epoch = -1;  // argmax validation AUROC, earliest on ties
  metrics::MetricSet test;
  double wall_seconds = 0.0;
};

// Full-batch Adam with decoupled weight decay over the flattened parameters.
class AdamW {
 public:
  AdamW(size_t n, double lr, double weight_decay);
  void step(std::vector<double>& params, const std::vector<double>& grads);

 private:
  double lr_, wd_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long long t_ = 0;
  std::vector<double> m_, v_;
};

std::vector<uint8_t> split_mask(const Hypergraph& h, const Dataset& ds, SplitTag tag);

metrics::MetricSet metrics_on_split(const Mat& probs, const Mat& labels,
                                    const std::vector<uint8_t>& mask);

// Trains one model on the train split with early stopping on validation
// AUROC; restores and returns the best-epoch parameters. Loss is computed on
// train-split visit edges only; every edge still propagates messages.
RunRecord train_one(const model::GraphBatch& batch, const Dataset& ds, const model::ModelConfig& cfg,
                    const TrainConfig& tcfg, uint64_t seed, model::ModelParams* best_params = nullptr);

// Ablation variants: flag settings per Table-style rows.
model::ModelConfig variant_config(const model::ModelConfig& base, const std::string& variant);
const std::vector<std::string>& ablation_variants();  // full, wo_concept, wo_note
const std::vector<std::string>& all_variants();       // + backbone

// Runs variants x seeds; optionally saves per-run checkpoints into
// `checkpoint_dir` as <variant>_seed<seed>.ckpt.
std::vector<RunRecord> run_suite(const model::GraphBatch& batch, const Dataset& ds,
                                 const model::ModelConfig& base_cfg, const TrainConfig& tcfg,
                                 const std::vector<std::string>& variants,
                                 const std::string& checkpoint_dir = "");

// Hyperparameter grid: hidden dims x layer counts, plus the
// structural:semantic dimension-ratio sweep as an independent axis.
struct GridPoint {
  int d = 0;
  int layers = 0;
  double ratio = 0.0;  // 0 = keep configured ratio
  std::string label;
};

struct GridSpec {
  std::vector<int> dims = {24, 48, 72, 96};
  std::vector<int> layer_counts = {1, 2, 3, 4};
  std::vector<double> ratios = {0.5, 0.67, 1.0, 1.5, 2.0};
};

enum class GridAxes { dims_layers, ratio, all };

std::vector<GridPoint> enumerate_grid(const GridSpec& spec, GridAxes axes);

// Line-record artifacts.
void write_run_log(const std::vector<RunRecord>& records, const std::string& path);
void write_suite_summary(const std::vector<RunRecord>& records, const std::string& path);
std::map<std::string, std::vector<metrics::MetricSet>> load_suite_summary(const std::string& path);

}  // namespace mingle::train

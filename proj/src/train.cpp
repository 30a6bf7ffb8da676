#include "mingle/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mingle/common.hpp"

namespace mingle::train {

void TrainConfig::validate() const {
  if (lr <= 0.0 || weight_decay < 0.0) throw DataError("learning rate must be positive, decay >= 0");
  if (max_epochs < 1 || n_seeds < 1) throw DataError("max_epochs and seeds must be >= 1");
  if (patience < 0 || patience > max_epochs) throw DataError("patience must be in [0, max_epochs]");
}

AdamW::AdamW(size_t n, double lr, double weight_decay)
    : lr_(lr), wd_(weight_decay), m_(n, 0.0), v_(n, 0.0) {}

void AdamW::step(std::vector<double>& params, const std::vector<double>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw DataError("optimizer state size mismatch");
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    double g = grads[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
    double mhat = m_[i] / bc1;
    double vhat = v_[i] / bc2;
    double p = params[i];
    params[i] = p - lr_ * (mhat / (std::sqrt(vhat) + eps_) + wd_ * p);
  }
}

std::vector<uint8_t> split_mask(const Hypergraph& h, const Dataset& ds, SplitTag tag) {
  std::vector<uint8_t> mask(h.n_visit_edges, 0);
  for (int e = 0; e < h.n_visit_edges; ++e)
    mask[e] = ds.split_of(h.edges[e].visit_id) == tag ? 1 : 0;
  return mask;
}

metrics::MetricSet metrics_on_split(const Mat& probs, const Mat& labels,
                                    const std::vector<uint8_t>& mask) {
  int n = 0;
  for (uint8_t b : mask) n += b ? 1 : 0;
  if (n == 0) throw DataError("empty split for metrics");
  Mat p(n, probs.cols), y(n, labels.cols);
  int r = 0;
  for (int i = 0; i < probs.rows; ++i) {
    if (!mask[i]) continue;
    for (int j = 0; j < probs.cols; ++j) p(r, j) = probs(i, j);
    for (int j = 0; j < labels.cols; ++j) y(r, j) = labels(i, j);
    ++r;
  }
  return metrics::compute_all(p, y);
}

RunRecord train_one(const model::GraphBatch& batch, const Dataset& ds, const model::ModelConfig& cfg,
                    const TrainConfig& tcfg, uint64_t seed, model::ModelParams* best_params) {
  tcfg.validate();
  auto t_start = std::chrono::steady_clock::now();

  const Hypergraph& h = *batch.h;
  std::vector<uint8_t> train_m = split_mask(h, ds, SplitTag::train);
  std::vector<uint8_t> val_m = split_mask(h, ds, SplitTag::val);
  std::vector<uint8_t> test_m = split_mask(h, ds, SplitTag::test);
  if (std::count(train_m.begin(), train_m.end(), 1) == 0) throw DataError("no train split assigned");

  model::GraphBatch work = batch;
  work.loss_mask = train_m;

  model::ModelConfig run_cfg = cfg;
  run_cfg.seed = seed;
  model::ModelParams params = model::ModelParams::init(run_cfg);
  model::ModelParams grads = model::ModelParams::zeros_like(params);
  AdamW opt(params.n_scalars(), tcfg.lr, tcfg.weight_decay);

  RunRecord rec;
  rec.seed = seed;

  double best_auroc = -1.0;
  std::vector<double> best_flat;
  int since_best = 0;

  for (int epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
    Mat probs;
    double loss;
    try {
      loss = model::forward_backward(work, params, grads, &probs);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ")");
    }
    if (!std::isfinite(loss))
      throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch));

    EpochStat stat;
    stat.epoch = epoch;
    stat.train_loss = loss;
    stat.val = metrics_on_split(probs, batch.labels, val_m);
    rec.epochs.push_back(stat);

    if (stat.val.auroc > best_auroc) {
      best_auroc = stat.val.auroc;
      rec.selected_epoch = epoch;
      best_flat = params.flatten();
      since_best = 0;
    } else {
      ++since_best;
      if (since_best > tcfg.patience) break;
    }

    std::vector<double> flat = params.flatten();
    opt.step(flat, grads.flatten());
    params.unflatten(flat);
  }

  params.unflatten(best_flat);
  Mat probs;
  model::loss_only(work, params, &probs);
  rec.test = metrics_on_split(probs, batch.labels, test_m);
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  if (best_params) *best_params = std::move(params);
  return rec;
}

model::ModelConfig variant_config(const model::ModelConfig& base, const std::string& variant) {
  model::ModelConfig cfg = base;
  if (variant == "full") {
    cfg.use_concept_semantics = true;
    cfg.use_note_semantics = true;
  } else if (variant == "wo_concept") {
    cfg.use_concept_semantics = false;
    cfg.use_note_semantics = true;
  } else if (variant == "wo_note") {
    cfg.use_concept_semantics = true;
    cfg.use_note_semantics = false;
  } else if (variant == "backbone") {
    cfg.use_concept_semantics = false;
    cfg.use_note_semantics = false;
  } else {
    throw DataError("unknown variant: " + variant);
  }
  return cfg;
}

const std::vector<std::string>& ablation_variants() {
  static const std::vector<std::string> v = {"full", "wo_concept", "wo_note"};
  return v;
}

const std::vector<std::string>& all_variants() {
  static const std::vector<std::string> v = {"full", "wo_concept", "wo_note", "backbone"};
  return v;
}

std::vector<RunRecord> run_suite(const model::GraphBatch& batch, const Dataset& ds,
                                 const model::ModelConfig& base_cfg, const TrainConfig& tcfg,
                                 const std::vector<std::string>& variants,
                                 const std::string& checkpoint_dir) {
  std::vector<RunRecord> records;
  for (const std::string& variant : variants) {
    model::ModelConfig cfg = variant_config(base_cfg, variant);
    for (int i = 0; i < tcfg.n_seeds; ++i) {
      uint64_t seed = tcfg.seed_base + static_cast<uint64_t>(i);
      model::ModelParams best;
      RunRecord rec = train_one(batch, ds, cfg, tcfg, seed, &best);
      rec.variant = variant;
      if (!checkpoint_dir.empty())
        best.save(checkpoint_dir + "/" + variant + "_seed" + std::to_string(seed) + ".ckpt");
      records.push_back(std::move(rec));
    }
  }
  return records;
}

std::vector<GridPoint> enumerate_grid(const GridSpec& spec, GridAxes axes) {
  std::vector<GridPoint> points;
  if (axes == GridAxes::dims_layers || axes == GridAxes::all) {
    for (int d : spec.dims)
      for (int l : spec.layer_counts) {
        GridPoint p;
        p.d = d;
        p.layers = l;
        p.label = "d" + std::to_string(d) + "_L" + std::to_string(l);
        points.push_back(p);
      }
  }
  if (axes == GridAxes::ratio || axes == GridAxes::all) {
    for (double r : spec.ratios) {
      GridPoint p;
      p.ratio = r;
      char buf[32];
      std::snprintf(buf, sizeof(buf), "ratio%g", r);
      p.label = buf;
      points.push_back(p);
    }
  }
  return points;
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_run_log(const std::vector<RunRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << "run\tepoch\tsplit\tmetric\tvalue\n";
  for (const auto& rec : records) {
    std::string run = rec.variant + ":" + std::to_string(rec.seed);
    for (const auto& ep : rec.epochs) {
      out << run << '\t' << ep.epoch << "\ttrain\tloss\t" << fmt17(ep.train_loss) << '\n';
      for (const std::string& name : metrics::metric_names())
        out << run << '\t' << ep.epoch << "\tval\t" << name << '\t'
            << fmt17(metrics::metric_value(ep.val, name)) << '\n';
    }
  }
}

void write_suite_summary(const std::vector<RunRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << "variant\tseed\tmetric\tvalue\n";
  for (const auto& rec : records) {
    out << rec.variant << '\t' << rec.seed << "\tselected_epoch\t" << rec.selected_epoch << '\n';
    for (const std::string& name : metrics::metric_names())
      out << rec.variant << '\t' << rec.seed << '\t' << name << '\t'
          << fmt17(metrics::metric_value(rec.test, name)) << '\n';
  }
}

std::map<std::string, std::vector<metrics::MetricSet>> load_suite_summary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open suite summary: " + path);
  std::string line;
  std::getline(in, line);  // header
  std::map<std::string, std::map<uint64_t, metrics::MetricSet>> by_variant_seed;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string variant, seed_s, metric, value_s;
    if (!std::getline(row, variant, '\t') || !std::getline(row, seed_s, '\t') ||
        !std::getline(row, metric, '\t') || !std::getline(row, value_s, '\t'))
      throw DataError("bad suite summary line: " + line);
    if (metric == "selected_epoch") continue;
    uint64_t seed = std::stoull(seed_s);
    double value = std::stod(value_s);
    auto& m = by_variant_seed[variant][seed];
    if (metric == "acc") m.acc = value;
    else if (metric == "auroc") m.auroc = value;
    else if (metric == "aupr") m.aupr = value;
    else if (metric == "macro_f1") m.macro_f1 = value;
    else throw DataError("unknown metric in suite summary: " + metric);
  }
  std::map<std::string, std::vector<metrics::MetricSet>> out;
  for (auto& [variant, by_seed] : by_variant_seed)
    for (auto& [seed, m] : by_seed) out[variant].push_back(m);
  return out;
}

}  // namespace mingle::train

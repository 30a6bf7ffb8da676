// Acceptance suite: one check per numbered criterion, each printing a
// [PASS]/[FAIL] line. Run with no arguments for everything, or pass criterion
// numbers. Exits nonzero if any selected criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mingle/cli.hpp"
#include "mingle/common.hpp"
#include "mingle/deepwalk.hpp"
#include "mingle/interpret.hpp"
#include "mingle/metrics.hpp"
#include "mingle/reference.hpp"
#include "mingle/train.hpp"

using namespace mingle;
namespace fs = std::filesystem;

namespace {

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& why) {
    if (!ok && pass) {
      pass = false;
      detail = why;
    }
  }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// ---------------------------------------------------------------------------
// 1. Gradient fidelity
// ---------------------------------------------------------------------------
Outcome criterion_gradients() {
  Outcome out;
  double t0 = now_seconds();
  double worst = 0.0;
  for (int layers : {1, 2}) {
    cli::TinyInstance tiny = cli::make_tiny_instance(layers, 8, 2);
    model::GraphBatch batch = tiny.batch();
    model::ModelParams params = model::ModelParams::init(tiny.cfg);
    double err = model::gradient_check(batch, params, 1e-5);
    worst = std::max(worst, err);
  }
  double elapsed = now_seconds() - t0;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "max relative error %.3e over L in {1,2} (%.1fs)", worst, elapsed);
  out.detail = buf;
  out.check(worst < 1e-4, std::string("error above 1e-4: ") + buf);
  out.check(elapsed < 30.0, "runtime above 30s");
  return out;
}

// ---------------------------------------------------------------------------
// 2. Attention invariants + relabeling invariance
// ---------------------------------------------------------------------------
Outcome criterion_attention() {
  Outcome out;
  double worst_row = 0.0, worst_perm = 0.0;
  for (uint64_t trial = 0; trial < 20 && out.pass; ++trial) {
    std::mt19937_64 g(mix64(0xACC2, trial));
    int n_visits = 20 + static_cast<int>(g() % 31);  // <= 50
    int n_codes = 12 + static_cast<int>(g() % 20);
    Dataset ds = generate_synthetic_dataset(n_visits, n_codes, TaskKind::binary,
                                            SignalSpec::mixed(), 100 + trial);
    Hypergraph h = add_self_loops(build_hypergraph(ds));

    model::ModelConfig cfg;
    cfg.d = 16;
    cfg.heads = 4;
    cfg.layers = 1 + static_cast<int>(trial % 2);
    cfg.d1 = 8;
    cfg.d2 = 8;
    cfg.seed = 500 + trial;

    // Seeded tables keyed by the original identifiers.
    EmbeddingTable s, c, n;
    s.kind = TableKind::structural;
    s.dim = cfg.d1;
    c.kind = TableKind::concepts;
    c.dim = cfg.d2;
    n.kind = TableKind::note;
    n.dim = cfg.d2;
    std::mt19937_64 tg(mix64(0x7AB1E5, trial));
    std::map<std::string, std::vector<double>> srows, crows, nrows;
    for (const auto& code : ds.codes) {
      std::vector<double> sv(cfg.d1), cv(cfg.d2);
      for (double& x : sv) x = normal01(tg);
      for (double& x : cv) x = normal01(tg);
      srows[code.code_id] = sv;
      crows[code.code_id] = cv;
    }
    for (const auto& v : ds.visits) {
      std::vector<double> nv(cfg.d2);
      for (double& x : nv) x = normal01(tg);
      nrows[v.visit_id] = nv;
    }
    for (const auto& [key, vec] : srows) s.add(key, vec);
    for (const auto& [key, vec] : crows) c.add(key, vec);
    for (const auto& [key, vec] : nrows) n.add(key, vec);

    model::ModelParams params = model::ModelParams::init(cfg);
    model::GraphBatch batch = model::GraphBatch::assemble(h, s, c, n, ds, cfg);
    model::LayerState state;
    Mat probs;
    model::loss_only(batch, params, &probs, &state);

    for (const auto& layer : state.attention)
      for (const auto& row : layer) {
        double sum = 0.0;
        for (double w : row) {
          out.check(w >= 0.0, "negative attention weight");
          sum += w;
        }
        worst_row = std::max(worst_row, std::abs(sum - 1.0));
      }

    // Relabel nodes and edges: permuted identifiers change the sorted order.
    std::vector<int> cperm(ds.codes.size()), vperm(ds.visits.size());
    for (size_t i = 0; i < cperm.size(); ++i) cperm[i] = static_cast<int>(i);
    for (size_t i = 0; i < vperm.size(); ++i) vperm[i] = static_cast<int>(i);
    deterministic_shuffle(cperm, g);
    deterministic_shuffle(vperm, g);
    std::map<std::string, std::string> code_map, visit_map;
    for (size_t i = 0; i < cperm.size(); ++i) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "R%04d", cperm[i]);
      code_map[ds.codes[i].code_id] = buf;
    }
    for (size_t i = 0; i < vperm.size(); ++i) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "W%05d", vperm[i]);
      visit_map[ds.visits[i].visit_id] = buf;
    }

    Dataset renamed = ds;
    for (auto& code : renamed.codes) code.code_id = code_map.at(code.code_id);
    for (auto& v : renamed.visits) {
      v.visit_id = visit_map.at(v.visit_id);
      for (auto& cid : v.codes) cid = code_map.at(cid);
      std::sort(v.codes.begin(), v.codes.end());
    }
    renamed.rebuild_indexes();
    Hypergraph h2 = add_self_loops(build_hypergraph(renamed));

    EmbeddingTable s2, c2, n2;
    s2.kind = TableKind::structural;
    s2.dim = cfg.d1;
    c2.kind = TableKind::concepts;
    c2.dim = cfg.d2;
    n2.kind = TableKind::note;
    n2.dim = cfg.d2;
    for (const auto& [key, vec] : srows) s2.add(code_map.at(key), vec);
    for (const auto& [key, vec] : crows) c2.add(code_map.at(key), vec);
    for (const auto& [key, vec] : nrows) n2.add(visit_map.at(key), vec);

    model::GraphBatch batch2 = model::GraphBatch::assemble(h2, s2, c2, n2, renamed, cfg);
    Mat probs2;
    model::loss_only(batch2, params, &probs2);

    for (const auto& v : ds.visits) {
      int e1 = h.visit_edge_of(v.visit_id);
      int e2 = h2.visit_edge_of(visit_map.at(v.visit_id));
      worst_perm = std::max(worst_perm, std::abs(probs(e1, 0) - probs2(e2, 0)));
    }
  }
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "20 graphs: max |row sum - 1| %.2e, max relabeling prob drift %.2e", worst_row,
                worst_perm);
  if (out.pass) out.detail = buf;
  out.check(worst_row <= 1e-6, std::string("attention row sum off: ") + buf);
  out.check(worst_perm <= 1e-6, std::string("relabeling drift: ") + buf);
  return out;
}

// ---------------------------------------------------------------------------
// 3. Forward oracle
// ---------------------------------------------------------------------------
Outcome criterion_forward_oracle() {
  Outcome out;
  double worst = 0.0;
  for (int layers : {1, 2}) {
    cli::TinyInstance tiny = cli::make_tiny_instance(layers, 8, 2);
    model::GraphBatch batch = tiny.batch();
    model::ModelParams params = model::ModelParams::init(tiny.cfg);
    Mat probs;
    model::loss_only(batch, params, &probs);
    ref::ReferenceOutput expected = ref::forward(batch, params);
    for (int i = 0; i < probs.rows; ++i)
      for (int j = 0; j < probs.cols; ++j)
        worst = std::max(worst, std::abs(probs(i, j) - expected.probs(i, j)));
  }
  char buf[120];
  std::snprintf(buf, sizeof(buf), "max |prob - reference| %.3e on the 3-node/2-visit instance", worst);
  out.detail = buf;
  out.check(worst < 1e-10, std::string("forward differs from the straight-line reference: ") + buf);
  return out;
}

// ---------------------------------------------------------------------------
// 4. Metric oracles
// ---------------------------------------------------------------------------
namespace oracle {

double auroc_pairwise(const Mat& probs, const Mat& labels, int col) {
  double wins = 0.0;
  long long pairs = 0;
  for (int i = 0; i < probs.rows; ++i) {
    if (labels(i, col) < 0.5) continue;
    for (int j = 0; j < probs.rows; ++j) {
      if (labels(j, col) > 0.5) continue;
      ++pairs;
      if (probs(i, col) > probs(j, col)) wins += 1.0;
      else if (probs(i, col) == probs(j, col)) wins += 0.5;
    }
  }
  return wins / pairs;
}

double ap_direct(const Mat& probs, const Mat& labels, int col) {
  double ap = 0.0;
  long long n_pos = 0;
  for (int i = 0; i < probs.rows; ++i) {
    if (labels(i, col) < 0.5) continue;
    ++n_pos;
    long long rank = 1, tp = 1;
    for (int j = 0; j < probs.rows; ++j) {
      if (j == i) continue;
      bool precedes = probs(j, col) > probs(i, col) || (probs(j, col) == probs(i, col) && j < i);
      if (precedes) {
        ++rank;
        if (labels(j, col) > 0.5) ++tp;
      }
    }
    ap += static_cast<double>(tp) / rank;
  }
  return ap / n_pos;
}

double f1_class(const Mat& probs, const Mat& labels, int col, bool positive) {
  long long tp = 0, fp = 0, fn = 0;
  for (int i = 0; i < probs.rows; ++i) {
    bool pred = probs(i, col) >= 0.5;
    bool truth = labels(i, col) > 0.5;
    if (!positive) {
      pred = !pred;
      truth = !truth;
    }
    if (pred && truth) ++tp;
    else if (pred) ++fp;
    else if (truth) ++fn;
  }
  if (2 * tp + fp + fn == 0) return 0.0;
  return 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
}

}  // namespace oracle

Outcome criterion_metrics() {
  Outcome out;
  double worst_rank = 0.0;

  // Analytic anchors.
  Mat p1(1, 1), y1(1, 1);
  p1(0, 0) = 0.5;
  y1(0, 0) = 1.0;
  out.check(std::abs(model::bce_loss(p1, y1) - std::log(2.0)) < 1e-9, "bce(1, 0.5) != ln 2");
  y1(0, 0) = 0.0;
  out.check(std::abs(model::bce_loss(p1, y1) - std::log(2.0)) < 1e-9, "bce(0, 0.5) != ln 2");
  Mat ap_p(4, 1), ap_y(4, 1);
  double ap_scores[4] = {0.9, 0.8, 0.7, 0.1};
  for (int i = 0; i < 4; ++i) {
    ap_p(i, 0) = ap_scores[i];
    ap_y(i, 0) = i == 3 ? 1.0 : 0.0;
  }
  out.check(std::abs(metrics::aupr(ap_p, ap_y) - 0.25) < 1e-12, "single positive ranked last != 1/4");

  for (uint64_t trial = 0; trial < 100; ++trial) {
    std::mt19937_64 g(mix64(0xACC4, trial));
    int n = 4 + static_cast<int>(g() % 47);  // <= 50 rows
    int cols = trial % 4 == 0 ? 3 : 1;
    Mat probs(n, cols), labels(n, cols);
    for (int col = 0; col < cols; ++col) {
      int n_pos = 0;
      for (int i = 0; i < n; ++i) {
        probs(i, col) = trial % 5 == 0 ? static_cast<double>(g() % 4) / 3.0 : u01(g);
        labels(i, col) = g() % 2;
        n_pos += labels(i, col) > 0.5 ? 1 : 0;
      }
      if (n_pos == 0) labels(0, col) = 1.0;
      if (n_pos == n) labels(0, col) = 0.0;
    }

    double auroc_expected = 0.0, ap_expected = 0.0, f1_expected = 0.0;
    long long correct = 0;
    for (int col = 0; col < cols; ++col) {
      auroc_expected += oracle::auroc_pairwise(probs, labels, col) / cols;
      ap_expected += oracle::ap_direct(probs, labels, col) / cols;
      if (cols == 1)
        f1_expected = 0.5 * (oracle::f1_class(probs, labels, col, true) +
                             oracle::f1_class(probs, labels, col, false));
      else
        f1_expected += oracle::f1_class(probs, labels, col, true) / cols;
      for (int i = 0; i < n; ++i)
        correct += ((probs(i, col) >= 0.5) == (labels(i, col) > 0.5)) ? 1 : 0;
    }
    double acc_expected = static_cast<double>(correct) / (static_cast<double>(n) * cols);

    worst_rank = std::max(worst_rank, std::abs(metrics::auroc(probs, labels) - auroc_expected));
    worst_rank = std::max(worst_rank, std::abs(metrics::aupr(probs, labels) - ap_expected));
    out.check(std::abs(metrics::accuracy(probs, labels) - acc_expected) < 1e-12,
              "accuracy mismatch vs brute force");
    out.check(std::abs(metrics::macro_f1(probs, labels) - f1_expected) < 1e-12,
              "macro-F1 mismatch vs brute force");
  }
  char buf[140];
  std::snprintf(buf, sizeof(buf), "100 instances: max AUROC/AUPR deviation %.2e; anchors hold",
                worst_rank);
  if (out.pass) out.detail = buf;
  out.check(worst_rank < 1e-9, std::string("rank metric off: ") + buf);
  return out;
}

// ---------------------------------------------------------------------------
// Shared pipeline pieces for criteria 5, 6, 8
// ---------------------------------------------------------------------------
struct PipelineResult {
  Dataset ds;
  Hypergraph h;
  EmbeddingTable structural, concepts, notes;
  SyntheticInfo info;
};

PipelineResult build_pipeline(int n_visits, int n_codes, const SignalSpec& spec, uint64_t gen_seed,
                              uint64_t split_seed, uint64_t embed_seed, int d1, int d2) {
  PipelineResult r;
  r.ds = generate_synthetic_dataset(n_visits, n_codes, TaskKind::binary, spec, gen_seed, &r.info);
  r.ds = split_dataset(r.ds, split_seed);
  r.h = add_self_loops(build_hypergraph(r.ds));

  auto walks = random_walks(clique_expansion(r.h), 10, 20, embed_seed);
  SkipGramConfig sg;
  sg.dim = d1;
  sg.seed = embed_seed;
  r.structural = train_skipgram(walks, r.h.node_ids, sg);

  ProviderConfig pc;
  pc.kind = ProviderKind::fallback;
  pc.d2 = d2;
  pc.seed = embed_seed;
  EmbeddingProvider provider(pc);
  r.concepts = embed_concepts(provider, r.ds);
  r.notes = embed_notes(provider, r.ds, {"Admission Date", "Service"});
  return r;
}

model::ModelConfig acceptance_model_config(int d1, int d2) {
  model::ModelConfig cfg;
  cfg.d = 32;
  cfg.layers = 1;
  cfg.heads = 4;
  cfg.d1 = d1;
  cfg.d2 = d2;
  return cfg;
}

train::TrainConfig acceptance_train_config() {
  train::TrainConfig tcfg;  // lr 1e-3, weight decay 1e-3 per the protocol
  tcfg.max_epochs = 400;
  tcfg.patience = 60;
  tcfg.n_seeds = 5;
  return tcfg;
}

// ---------------------------------------------------------------------------
// 5. Ablation ordering
// ---------------------------------------------------------------------------
Outcome criterion_ablations() {
  Outcome out;
  double t0 = now_seconds();
  PipelineResult pipe = build_pipeline(2000, 200, SignalSpec::mixed(), 7, 0, 17, 32, 32);
  model::ModelConfig cfg = acceptance_model_config(32, 32);
  train::TrainConfig tcfg = acceptance_train_config();
  model::GraphBatch batch =
      model::GraphBatch::assemble(pipe.h, pipe.structural, pipe.concepts, pipe.notes, pipe.ds, cfg);

  auto records = train::run_suite(batch, pipe.ds, cfg, tcfg, train::all_variants());
  std::map<std::string, double> mean_auroc;
  std::map<std::string, int> counts;
  for (const auto& rec : records) {
    mean_auroc[rec.variant] += rec.test.auroc;
    counts[rec.variant] += 1;
  }
  for (auto& [variant, total] : mean_auroc) total /= counts.at(variant);
  double elapsed = now_seconds() - t0;

  char buf[240];
  std::snprintf(buf, sizeof(buf),
                "mean test AUROC full %.4f, wo_concept %.4f, wo_note %.4f, backbone %.4f (%.0fs)",
                mean_auroc["full"], mean_auroc["wo_concept"], mean_auroc["wo_note"],
                mean_auroc["backbone"], elapsed);
  out.detail = buf;
  out.check(counts["full"] == 5 && counts["backbone"] == 5, "expected 5 runs per variant");
  out.check(mean_auroc["full"] >= mean_auroc["wo_concept"] + 0.03,
            std::string("full does not beat wo_concept by 0.03: ") + buf);
  out.check(mean_auroc["full"] >= mean_auroc["wo_note"] + 0.03,
            std::string("full does not beat wo_note by 0.03: ") + buf);
  out.check(mean_auroc["wo_concept"] >= mean_auroc["backbone"] - 0.01,
            std::string("wo_concept below backbone - 0.01: ") + buf);
  out.check(mean_auroc["wo_note"] >= mean_auroc["backbone"] - 0.01,
            std::string("wo_note below backbone - 0.01: ") + buf);
  out.check(elapsed < 900.0, "runtime above 15 minutes");
  return out;
}

// ---------------------------------------------------------------------------
// 6. Interpretability signal
// ---------------------------------------------------------------------------
Outcome criterion_interpretability() {
  Outcome out;
  double t0 = now_seconds();
  PipelineResult pipe = build_pipeline(1200, 150, SignalSpec::structure_only(), 7, 0, 17, 32, 32);
  model::ModelConfig cfg = acceptance_model_config(32, 32);
  train::TrainConfig tcfg = acceptance_train_config();
  model::GraphBatch batch =
      model::GraphBatch::assemble(pipe.h, pipe.structural, pipe.concepts, pipe.notes, pipe.ds, cfg);

  std::set<std::string> pair(pipe.info.structure_pair.begin(), pipe.info.structure_pair.end());
  double hit_rate_sum = 0.0;
  for (int i = 0; i < tcfg.n_seeds; ++i) {
    uint64_t seed = tcfg.seed_base + static_cast<uint64_t>(i);
    model::ModelParams best;
    train::train_one(batch, pipe.ds, cfg, tcfg, seed, &best);
    model::GraphBatch eval = batch;
    eval.loss_mask.clear();
    model::LayerState state;
    model::loss_only(eval, best, nullptr, &state);

    long long hits = 0, positives = 0;
    for (const auto& v : pipe.ds.visits) {
      if (pipe.ds.split_of(v.visit_id) != SplitTag::test || !v.label[0]) continue;
      ++positives;
      auto report = interpret::node_importance(state, pipe.h, pipe.ds, v.visit_id, cfg.layers);
      std::set<std::string> top2;
      for (size_t k = 0; k < report.ranked.size() && k < 2; ++k) top2.insert(report.ranked[k].code_id);
      if (top2 == pair) ++hits;
    }
    hit_rate_sum += positives > 0 ? static_cast<double>(hits) / positives : 0.0;
  }
  double mean_hit_rate = hit_rate_sum / tcfg.n_seeds;
  double elapsed = now_seconds() - t0;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "label-determining pair in top-2 for %.1f%% of positive test visits (5-seed mean, %.0fs)",
                100.0 * mean_hit_rate, elapsed);
  out.detail = buf;
  out.check(mean_hit_rate >= 0.80, std::string("top-2 rate below 80%: ") + buf);
  return out;
}

// ---------------------------------------------------------------------------
// 7. Protocol conformance
// ---------------------------------------------------------------------------
Outcome criterion_protocol() {
  Outcome out;

  for (int p : {100, 137, 2000}) {
    Dataset ds = generate_synthetic_dataset(p, 60, TaskKind::binary, SignalSpec::mixed(), 2);
    Dataset split = split_dataset(ds, 0);
    int train_n = 0, val_n = 0, test_n = 0;
    for (const auto& v : split.visits) {
      SplitTag t = split.split_of(v.visit_id);
      train_n += t == SplitTag::train;
      val_n += t == SplitTag::val;
      test_n += t == SplitTag::test;
    }
    out.check(val_n == p / 10, "val size != floor(0.1 P) at P=" + std::to_string(p));
    out.check(test_n == p / 5, "test size != floor(0.2 P) at P=" + std::to_string(p));
    out.check(train_n == p - p / 10 - p / 5, "train size != remainder at P=" + std::to_string(p));
  }

  train::GridSpec spec;
  auto dl = train::enumerate_grid(spec, train::GridAxes::dims_layers);
  out.check(dl.size() == 16, "dims x layers grid != 16 configs");
  std::set<std::pair<int, int>> combos;
  for (const auto& pnt : dl) combos.insert({pnt.d, pnt.layers});
  for (int d : {24, 48, 72, 96})
    for (int l : {1, 2, 3, 4})
      out.check(combos.count({d, l}) == 1, "missing grid point d=" + std::to_string(d));
  auto ratios = train::enumerate_grid(spec, train::GridAxes::ratio);
  std::vector<double> ratio_values;
  for (const auto& pnt : ratios) ratio_values.push_back(pnt.ratio);
  out.check(ratio_values == std::vector<double>{0.5, 0.67, 1.0, 1.5, 2.0},
            "ratio sweep != {0.5, 0.67, 1, 1.5, 2}");

  // Aggregation over exactly 5 seeds with significance flags.
  std::map<std::string, std::vector<metrics::MetricSet>> runs;
  std::mt19937_64 g(11);
  for (int i = 0; i < 5; ++i) {
    double hi = 0.82 + 0.005 * u01(g), lo = 0.64 + 0.005 * u01(g);
    runs["full"].push_back({hi, hi, hi, hi});
    runs["wo_note"].push_back({lo, lo, lo, lo});
  }
  metrics::MetricsReport report = metrics::aggregate(runs, "full");
  out.check(report.rows.size() == 2, "aggregate row count");
  for (const auto& row : report.rows) {
    out.check(row.n_runs == 5, "aggregation not over exactly 5 seeds");
    for (const std::string& name : metrics::metric_names()) {
      out.check(row.mean.count(name) == 1 && row.stddev.count(name) == 1,
                "missing mean/std for " + name);
    }
  }
  out.check(report.rows[1].significant_vs_full.at("auroc"), "significance flag not set");

  if (out.pass)
    out.detail = "split floors exact; grid = 16 dim-layer configs + 5 ratios; 5-seed mean/std/flags";
  return out;
}

// ---------------------------------------------------------------------------
// 8. Determinism
// ---------------------------------------------------------------------------
Outcome criterion_determinism() {
  Outcome out;
  fs::path base = fs::temp_directory_path() / "mingle_acceptance_det";
  fs::remove_all(base);
  fs::create_directories(base);

  auto run_pipeline = [&](const std::string& tag) {
    fs::path out_dir = base / tag;
    std::string ini = (base / (tag + ".ini")).string();
    std::ofstream cfg(ini);
    cfg << "[data]\nsource = synthetic\nn_visits = 300\nn_codes = 60\nsignal = mixed\n"
           "generator_seed = 7\nsplit_seed = 0\n"
           "[embedding]\nd2 = 16\nratio = 1.0\nwalks_per_node = 5\nwalk_length = 10\nsg_epochs = 2\n"
           "[model]\nd = 16\nlayers = 1\nheads = 2\n"
           "[train]\nmax_epochs = 30\npatience = 30\nseeds = 2\nvariants = ablations\n"
           "[output]\ndir = "
        << out_dir.string() << "\n";
    cfg.close();
    ExperimentConfig config = ExperimentConfig::from_file(ini);
    std::ostringstream sink;
    cli::cmd_generate(config, sink);
    cli::cmd_embed(config, sink);
    cli::cmd_train(config, sink);
    cli::cmd_evaluate(config, sink);
    return out_dir;
  };

  fs::path a = run_pipeline("a");
  fs::path b = run_pipeline("b");

  int compared = 0;
  for (const char* name : {"records.tsv", "codes.tsv", "notes.tsv", "hypergraph.tsv",
                           "emb_structural.tsv", "emb_concept.tsv", "emb_note.tsv",
                           "suite_summary.tsv", "report.tsv", "report.txt"}) {
    std::string fa = read_file((a / name).string());
    std::string fb = read_file((b / name).string());
    out.check(!fa.empty(), std::string("missing artifact ") + name);
    out.check(fa == fb, std::string("artifact differs between runs: ") + name);
    ++compared;
  }
  fs::remove_all(base);
  if (out.pass)
    out.detail = std::to_string(compared) + " artifacts bit-identical across two pipeline runs";
  return out;
}

struct Criterion {
  int number;
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "gradient fidelity", criterion_gradients},
    {2, "attention invariants", criterion_attention},
    {3, "forward oracle", criterion_forward_oracle},
    {4, "metric oracles", criterion_metrics},
    {5, "ablation ordering", criterion_ablations},
    {6, "interpretability signal", criterion_interpretability},
    {7, "protocol conformance", criterion_protocol},
    {8, "determinism", criterion_determinism},
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const Criterion& c : kCriteria) {
    if (!selected.empty() && !selected.count(c.number)) continue;
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] %d %s: %s\n", outcome.pass ? "PASS" : "FAIL", c.number, c.name,
                outcome.detail.c_str());
    std::fflush(stdout);
    failures += outcome.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}

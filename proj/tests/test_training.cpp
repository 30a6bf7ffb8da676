#include <cmath>
#include <set>

#include "doctest.h"
#include "mingle/cli.hpp"
#include "mingle/common.hpp"
#include "mingle/deepwalk.hpp"
#include "mingle/train.hpp"
#include "test_support.hpp"

using namespace mingle;

namespace {

// Small planted dataset with tables, ready for training runs.
struct TrainFixture {
  Dataset ds;
  Hypergraph h;
  EmbeddingTable structural, concepts, notes;
  model::ModelConfig cfg;
  model::GraphBatch batch;

  TrainFixture(int n_visits, const SignalSpec& spec, uint64_t seed, bool random_labels = false) {
    ds = generate_synthetic_dataset(n_visits, 40, TaskKind::binary, spec, seed);
    if (random_labels) {
      std::mt19937_64 g(seed + 999);
      for (auto& v : ds.visits) v.label[0] = static_cast<uint8_t>(g() % 2);
    }
    ds = split_dataset(ds, 0);
    h = add_self_loops(build_hypergraph(ds));

    auto walks = random_walks(clique_expansion(h), 6, 12, 5);
    SkipGramConfig sg;
    sg.dim = 12;
    sg.epochs = 3;
    structural = train_skipgram(walks, h.node_ids, sg);

    ProviderConfig pc;
    pc.d2 = 12;
    EmbeddingProvider provider(pc);
    concepts = embed_concepts(provider, ds);
    notes = embed_notes(provider, ds, {"Admission Date", "Service"});

    cfg.d = 16;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.d1 = 12;
    cfg.d2 = 12;
    batch = model::GraphBatch::assemble(h, structural, concepts, notes, ds, cfg);
  }
};

}  // namespace

TEST_SUITE("training") {

TEST_CASE("train_one descends and is deterministic per seed") {
  TrainFixture fx(120, SignalSpec::semantics_only(), 11);
  train::TrainConfig tcfg;
  tcfg.max_epochs = 25;
  tcfg.patience = 25;

  train::RunRecord a = train::train_one(fx.batch, fx.ds, fx.cfg, tcfg, 1);
  CHECK(a.epochs.back().train_loss < a.epochs.front().train_loss);

  train::RunRecord b = train::train_one(fx.batch, fx.ds, fx.cfg, tcfg, 1);
  REQUIRE(a.epochs.size() == b.epochs.size());
  for (size_t i = 0; i < a.epochs.size(); ++i) {
    CHECK(a.epochs[i].train_loss == b.epochs[i].train_loss);  // bit-identical trajectory
    CHECK(a.epochs[i].val.auroc == b.epochs[i].val.auroc);
  }
  CHECK(a.selected_epoch == b.selected_epoch);
  CHECK(a.test.auroc == b.test.auroc);

  train::RunRecord c = train::train_one(fx.batch, fx.ds, fx.cfg, tcfg, 2);
  CHECK(a.epochs[5].train_loss != c.epochs[5].train_loss);
}

TEST_CASE("early stopping") {
  TrainFixture fx(120, SignalSpec::semantics_only(), 13);
  SUBCASE("selected epoch is the argmax of validation AUROC") {
    train::TrainConfig tcfg;
    tcfg.max_epochs = 30;
    tcfg.patience = 8;
    train::RunRecord rec = train::train_one(fx.batch, fx.ds, fx.cfg, tcfg, 3);
    double best = -1.0;
    int best_epoch = -1;
    for (const auto& ep : rec.epochs)
      if (ep.val.auroc > best) {
        best = ep.val.auroc;
        best_epoch = ep.epoch;
      }
    CHECK(rec.selected_epoch == best_epoch);
    for (const auto& ep : rec.epochs) CHECK(rec.epochs[rec.selected_epoch - 1].val.auroc >= ep.val.auroc);
  }
  SUBCASE("patience 0 stops after the first non-improving epoch") {
    train::TrainConfig tcfg;
    tcfg.max_epochs = 50;
    tcfg.patience = 0;
    train::RunRecord rec = train::train_one(fx.batch, fx.ds, fx.cfg, tcfg, 3);
    // The run ends exactly one epoch after the last improvement.
    CHECK(rec.epochs.size() == static_cast<size_t>(rec.selected_epoch) + 1);
  }
}

TEST_CASE("decoupled weight decay shrinks parameters under random labels") {
  TrainFixture fx(100, SignalSpec::mixed(), 17, /*random_labels=*/true);
  model::GraphBatch batch = fx.batch;
  batch.loss_mask = train::split_mask(fx.h, fx.ds, SplitTag::train);

  auto run = [&](double wd) {
    model::ModelConfig cfg = fx.cfg;
    cfg.seed = 5;
    model::ModelParams params = model::ModelParams::init(cfg);
    model::ModelParams grads = model::ModelParams::zeros_like(params);
    train::AdamW opt(params.n_scalars(), 1e-3, wd);
    for (int epoch = 0; epoch < 30; ++epoch) {
      model::forward_backward(batch, params, grads);
      std::vector<double> flat = params.flatten();
      opt.step(flat, grads.flatten());
      params.unflatten(flat);
    }
    double norm = 0.0;
    for (double x : params.flatten()) norm += x * x;
    return std::sqrt(norm);
  };
  CHECK(run(1e-3) <= run(0.0));
}

TEST_CASE("divergence raises a numeric error naming the epoch") {
  TrainFixture fx(100, SignalSpec::mixed(), 19);
  train::TrainConfig tcfg;
  tcfg.lr = 1e30;
  tcfg.max_epochs = 10;
  tcfg.patience = 10;
  CHECK_THROWS_WITH_AS(train::train_one(fx.batch, fx.ds, fx.cfg, tcfg, 1),
                       doctest::Contains("epoch"), NumericError);
}

TEST_CASE("run_suite") {
  TrainFixture fx(120, SignalSpec::semantics_only(), 23);
  train::TrainConfig tcfg;
  tcfg.max_epochs = 6;
  tcfg.patience = 6;
  tcfg.n_seeds = 2;

  SUBCASE("ablation mode runs 3 variants x seeds") {
    auto records = train::run_suite(fx.batch, fx.ds, fx.cfg, tcfg, train::ablation_variants());
    CHECK(records.size() == 6);
    std::set<std::string> variants;
    for (const auto& r : records) variants.insert(r.variant);
    CHECK(variants == std::set<std::string>{"full", "wo_concept", "wo_note"});
  }
  SUBCASE("summary and log artifacts round-trip") {
    TempDir dir("train_suite");
    auto records = train::run_suite(fx.batch, fx.ds, fx.cfg, tcfg, {"full"}, dir.path.string());
    CHECK(std::filesystem::exists(dir.file("full_seed1.ckpt")));
    CHECK(std::filesystem::exists(dir.file("full_seed2.ckpt")));

    train::write_suite_summary(records, dir.file("summary.tsv"));
    auto loaded = train::load_suite_summary(dir.file("summary.tsv"));
    REQUIRE(loaded.count("full") == 1);
    REQUIRE(loaded.at("full").size() == 2);
    CHECK(loaded.at("full")[0].auroc == records[0].test.auroc);

    train::write_run_log(records, dir.file("log.tsv"));
    std::string log = read_file(dir.file("log.tsv"));
    CHECK(log.find("full:1\t1\ttrain\tloss") != std::string::npos);
    CHECK(log.find("val\tauroc") != std::string::npos);
  }
}

TEST_CASE("variant configs toggle the ablation flags") {
  model::ModelConfig base;
  CHECK(train::variant_config(base, "full").use_concept_semantics);
  CHECK(train::variant_config(base, "full").use_note_semantics);
  CHECK_FALSE(train::variant_config(base, "wo_concept").use_concept_semantics);
  CHECK(train::variant_config(base, "wo_concept").use_note_semantics);
  CHECK(train::variant_config(base, "wo_note").use_concept_semantics);
  CHECK_FALSE(train::variant_config(base, "wo_note").use_note_semantics);
  CHECK_FALSE(train::variant_config(base, "backbone").use_concept_semantics);
  CHECK_FALSE(train::variant_config(base, "backbone").use_note_semantics);
  CHECK_THROWS_AS(train::variant_config(base, "nope"), DataError);
}

TEST_CASE("grid enumeration matches the swept values") {
  train::GridSpec spec;
  auto dl = train::enumerate_grid(spec, train::GridAxes::dims_layers);
  CHECK(dl.size() == 16);
  std::set<std::pair<int, int>> combos;
  for (const auto& p : dl) combos.insert({p.d, p.layers});
  for (int d : {24, 48, 72, 96})
    for (int l : {1, 2, 3, 4}) CHECK(combos.count({d, l}) == 1);

  auto ratio = train::enumerate_grid(spec, train::GridAxes::ratio);
  REQUIRE(ratio.size() == 5);
  std::vector<double> ratios;
  for (const auto& p : ratio) ratios.push_back(p.ratio);
  CHECK(ratios == std::vector<double>{0.5, 0.67, 1.0, 1.5, 2.0});

  CHECK(train::enumerate_grid(spec, train::GridAxes::all).size() == 21);
}

TEST_CASE("multilabel task trains end to end") {
  Dataset ds = generate_synthetic_dataset(140, 40, TaskKind::multilabel25, SignalSpec::mixed(), 31);
  ds = split_dataset(ds, 1);
  Hypergraph h = add_self_loops(build_hypergraph(ds));
  auto walks = random_walks(clique_expansion(h), 4, 8, 5);
  SkipGramConfig sg;
  sg.dim = 8;
  sg.epochs = 2;
  EmbeddingTable structural = train_skipgram(walks, h.node_ids, sg);
  ProviderConfig pc;
  pc.d2 = 8;
  EmbeddingProvider provider(pc);
  EmbeddingTable concepts = embed_concepts(provider, ds);
  EmbeddingTable notes = embed_notes(provider, ds, {"Admission Date", "Service"});

  model::ModelConfig cfg;
  cfg.d = 12;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.d1 = 8;
  cfg.d2 = 8;
  cfg.task = TaskKind::multilabel25;
  model::GraphBatch batch = model::GraphBatch::assemble(h, structural, concepts, notes, ds, cfg);
  CHECK(batch.labels.cols == 25);

  train::TrainConfig tcfg;
  tcfg.max_epochs = 6;
  tcfg.patience = 6;
  train::RunRecord rec = train::train_one(batch, ds, cfg, tcfg, 1);
  CHECK(rec.epochs.back().train_loss < rec.epochs.front().train_loss);
  CHECK(rec.test.auroc > 0.0);
  CHECK(rec.test.auroc <= 1.0);
}

TEST_CASE("train config validation") {
  train::TrainConfig bad;
  bad.patience = 300;
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = train::TrainConfig{};
  bad.lr = 0.0;
  CHECK_THROWS_AS(bad.validate(), DataError);
}

}  // TEST_SUITE

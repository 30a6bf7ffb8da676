#include "mingle/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "mingle/common.hpp"
#include "mingle/deepwalk.hpp"
#include "mingle/interpret.hpp"
#include "mingle/metrics.hpp"

namespace fs = std::filesystem;

namespace mingle::cli {

namespace {

void require_file(const std::string& path, const std::string& hint) {
  if (!fs::exists(path)) throw DataError("missing " + path + ": " + hint);
}

Dataset load_pipeline_dataset(const ExperimentConfig& cfg) {
  require_file(cfg.records_file(), "run generate first (or point [data] at existing files)");
  require_file(cfg.codes_file(), "run generate first (or point [data] at existing files)");
  std::optional<std::string> notes;
  if (!cfg.notes_file().empty() && fs::exists(cfg.notes_file())) notes = cfg.notes_file();
  Dataset ds = load_dataset(cfg.records_file(), cfg.codes_file(), notes);
  if (cfg.textualize_missing) {
    for (auto& v : ds.visits)
      if (v.note_text.empty()) v.note_text = textualize_visit(v, ds);
  }
  return ds;
}

struct Tables {
  EmbeddingTable structural, concepts, notes;
};

Tables load_tables(const ExperimentConfig& cfg) {
  const std::string dir = cfg.out_dir;
  for (const char* name : {"emb_structural.tsv", "emb_concept.tsv", "emb_note.tsv"})
    require_file(dir + "/" + name, "run embed first");
  Tables t;
  t.structural = EmbeddingTable::load(dir + "/emb_structural.tsv");
  t.concepts = EmbeddingTable::load(dir + "/emb_concept.tsv");
  t.notes = EmbeddingTable::load(dir + "/emb_note.tsv");
  return t;
}

EmbeddingTable structural_from_walks(const std::vector<std::vector<int>>& walks,
                                     const std::vector<std::string>& node_ids,
                                     const ExperimentConfig& cfg, int d1) {
  SkipGramConfig sg;
  sg.dim = d1;
  sg.window = cfg.window;
  sg.negatives = cfg.negatives;
  sg.epochs = cfg.sg_epochs;
  sg.seed = cfg.embed_seed;
  return train_skipgram(walks, node_ids, sg);
}

}  // namespace

void cmd_generate(const ExperimentConfig& cfg, std::ostream& out) {
  if (cfg.source != "synthetic")
    throw UsageError("generate needs a synthetic data spec ([data] source = synthetic)");
  fs::create_directories(cfg.out_dir);
  Dataset ds = generate_synthetic_dataset(cfg.n_visits, cfg.n_codes, cfg.task, cfg.signal_spec(),
                                          cfg.generator_seed);
  save_dataset(ds, cfg.records_file(), cfg.codes_file(), cfg.notes_file());
  long long positives = 0;
  for (const auto& v : ds.visits) positives += v.label[0];
  out << "generated " << ds.visits.size() << " visits, " << ds.codes.size() << " codes (task "
      << (cfg.task == TaskKind::binary ? "binary" : "multilabel-25") << ", signal " << cfg.signal
      << ", label[0] base rate " << static_cast<double>(positives) / ds.visits.size() << ") -> "
      << cfg.out_dir << "\n";
}

void cmd_embed(const ExperimentConfig& cfg, std::ostream& out) {
  fs::create_directories(cfg.out_dir);
  Dataset ds = load_pipeline_dataset(cfg);

  std::vector<std::string> warnings;
  Hypergraph h = add_self_loops(build_hypergraph(ds, &warnings));
  for (const auto& w : warnings) out << "warning: " << w << "\n";
  dump_hypergraph(h, cfg.out_dir + "/hypergraph.tsv");

  WeightedGraph g = clique_expansion(h);
  auto walks = random_walks(g, cfg.walks_per_node, cfg.walk_length, cfg.embed_seed);
  EmbeddingTable structural = structural_from_walks(walks, h.node_ids, cfg, cfg.d1);
  structural.save(cfg.out_dir + "/emb_structural.tsv");

  EmbeddingProvider provider(cfg.provider_config());
  EmbeddingTable concepts = embed_concepts(provider, ds);
  concepts.save(cfg.out_dir + "/emb_concept.tsv");
  EmbeddingTable notes = embed_notes(provider, ds, cfg.blocked_sections);
  notes.save(cfg.out_dir + "/emb_note.tsv");

  out << "embedded " << h.n_nodes() << " nodes (structural d1=" << cfg.d1 << "), "
      << concepts.size() << " concepts and " << notes.size() << " notes (d2=" << cfg.d2
      << "); provider calls " << provider.remote_calls() << ", cache hits " << provider.cache_hits();
  if (provider.truncations() > 0) out << ", truncated texts " << provider.truncations();
  out << "\n";
}

void cmd_train(const ExperimentConfig& cfg, std::ostream& out) {
  Dataset ds = split_dataset(load_pipeline_dataset(cfg), cfg.split_seed, cfg.stratified);
  Tables tables = load_tables(cfg);
  Hypergraph h = add_self_loops(build_hypergraph(ds));

  model::ModelConfig mcfg = cfg.model_config();
  model::GraphBatch batch =
      model::GraphBatch::assemble(h, tables.structural, tables.concepts, tables.notes, ds, mcfg);

  fs::create_directories(cfg.out_dir + "/checkpoints");
  auto records =
      train::run_suite(batch, ds, mcfg, cfg.train_cfg, cfg.variant_list(), cfg.out_dir + "/checkpoints");
  train::write_run_log(records, cfg.out_dir + "/train_log.tsv");
  train::write_suite_summary(records, cfg.out_dir + "/suite_summary.tsv");

  for (const auto& rec : records) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-12s seed %llu  epoch %3d  test auroc %.4f  (%.1fs)",
                  rec.variant.c_str(), static_cast<unsigned long long>(rec.seed), rec.selected_epoch,
                  rec.test.auroc, rec.wall_seconds);
    out << buf << "\n";
  }
  out << "wrote " << records.size() << " runs -> " << cfg.out_dir << "/suite_summary.tsv\n";
}

void cmd_evaluate(const ExperimentConfig& cfg, std::ostream& out) {
  const std::string summary = cfg.out_dir + "/suite_summary.tsv";
  if (!fs::exists(summary))
    throw DataError("no checkpoint or suite summary in " + cfg.out_dir + ": run train first");
  auto runs = train::load_suite_summary(summary);
  metrics::MetricsReport report = metrics::aggregate(runs, "full");
  std::ofstream table(cfg.out_dir + "/report.txt", std::ios::binary);
  if (!table) throw DataError("cannot write " + cfg.out_dir + "/report.txt");
  table << report.to_table();
  report.save_tsv(cfg.out_dir + "/report.tsv");
  out << report.to_table();
}

void cmd_explain(const ExperimentConfig& cfg, const std::string& visit_id, int k, int layer,
                 std::ostream& out) {
  Dataset ds = load_pipeline_dataset(cfg);
  Tables tables = load_tables(cfg);
  Hypergraph h = add_self_loops(build_hypergraph(ds));

  const std::string ckpt_dir = cfg.out_dir + "/checkpoints";
  const std::string base_seed = std::to_string(cfg.train_cfg.seed_base);
  const std::string full_ckpt = ckpt_dir + "/full_seed" + base_seed + ".ckpt";
  if (!fs::exists(full_ckpt)) throw DataError("no checkpoint at " + full_ckpt + ": run train first");

  auto report_for = [&](const std::string& ckpt, const std::string& variant) {
    model::ModelParams params = model::ModelParams::load(ckpt);
    model::GraphBatch batch =
        model::GraphBatch::assemble(h, tables.structural, tables.concepts, tables.notes, ds, params.cfg);
    model::LayerState state;
    model::loss_only(batch, params, nullptr, &state);
    int use_layer = layer < 0 ? params.cfg.layers : layer;
    return interpret::node_importance(state, h, ds, visit_id, use_layer, variant);
  };

  interpret::NodeImportanceReport full_report = report_for(full_ckpt, "full");
  const VisitRecord& visit = ds.visits.at(ds.visit_index.at(visit_id));
  std::string filtered_note = filter_note_sections(visit.note_text, cfg.blocked_sections);

  std::ostringstream text;
  text << interpret::format_report(full_report, filtered_note);

  const std::string backbone_ckpt = ckpt_dir + "/backbone_seed" + base_seed + ".ckpt";
  if (fs::exists(backbone_ckpt)) {
    interpret::NodeImportanceReport backbone_report = report_for(backbone_ckpt, "backbone");
    text << interpret::format_report(backbone_report, "");
    auto overlap = interpret::compare_variants(full_report, backbone_report, k);
    text << "top-" << overlap.k << " overlap (full vs backbone):\n";
    auto list = [&](const char* tag, const std::vector<std::string>& ids) {
      text << "  " << tag << ":";
      for (const auto& id : ids) text << " " << id;
      text << "\n";
    };
    list("shared", overlap.shared);
    list("full only", overlap.only_first);
    list("backbone only", overlap.only_second);
  }

  fs::create_directories(cfg.out_dir);
  std::ofstream file(cfg.out_dir + "/explain_" + visit_id + ".txt", std::ios::binary);
  if (!file) throw DataError("cannot write explain report");
  file << text.str();
  out << text.str();
}

void cmd_gridsearch(const ExperimentConfig& cfg, train::GridAxes axes, bool dry_run,
                    std::ostream& out) {
  train::GridSpec spec;
  auto points = train::enumerate_grid(spec, axes);
  if (dry_run) {
    for (const auto& p : points) {
      out << p.label;
      if (p.ratio > 0.0)
        out << "  d1=" << static_cast<int>(std::lround(p.ratio * cfg.d2)) << " d2=" << cfg.d2;
      else
        out << "  d=" << p.d << " layers=" << p.layers;
      out << "\n";
    }
    out << points.size() << " grid configurations\n";
    return;
  }

  Dataset ds = split_dataset(load_pipeline_dataset(cfg), cfg.split_seed, cfg.stratified);
  Tables tables = load_tables(cfg);
  Hypergraph h = add_self_loops(build_hypergraph(ds));

  // Ratio points re-train the structural embedding at their own d1; one walk
  // corpus serves every width.
  WeightedGraph g = clique_expansion(h);
  std::vector<std::vector<int>> walks;

  std::ofstream summary(cfg.out_dir + "/grid_summary.tsv", std::ios::binary);
  if (!summary) throw DataError("cannot write grid summary");
  summary << "config\tmetric\tmean\tstd\n";

  std::string best_label;
  double best_val = -1.0;
  for (const auto& p : points) {
    model::ModelConfig mcfg = cfg.model_config();
    const EmbeddingTable* structural = &tables.structural;
    EmbeddingTable ratio_structural;
    if (p.ratio > 0.0) {
      int d1 = std::max(2, static_cast<int>(std::lround(p.ratio * cfg.d2)));
      if (walks.empty()) walks = random_walks(g, cfg.walks_per_node, cfg.walk_length, cfg.embed_seed);
      ratio_structural = structural_from_walks(walks, h.node_ids, cfg, d1);
      structural = &ratio_structural;
      mcfg.d1 = d1;
    } else {
      mcfg.d = p.d;
      mcfg.layers = p.layers;
    }
    model::GraphBatch batch =
        model::GraphBatch::assemble(h, *structural, tables.concepts, tables.notes, ds, mcfg);
    auto records = train::run_suite(batch, ds, mcfg, cfg.train_cfg, {"full"});

    std::map<std::string, std::vector<metrics::MetricSet>> runs;
    double val_sum = 0.0;
    for (auto& rec : records) {
      runs["full"].push_back(rec.test);
      val_sum += rec.epochs.at(rec.selected_epoch - 1).val.auroc;
    }
    double val_mean = val_sum / records.size();
    metrics::MetricsReport rep = metrics::aggregate(runs, "full");
    for (const std::string& name : metrics::metric_names()) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.6f\t%.6f", rep.rows[0].mean.at(name),
                    rep.rows[0].stddev.at(name));
      summary << p.label << '\t' << name << '\t' << buf << '\n';
    }
    char line[160];
    std::snprintf(line, sizeof(line), "%-12s val auroc %.4f  test auroc %.4f", p.label.c_str(),
                  val_mean, rep.rows[0].mean.at("auroc"));
    out << line << "\n";
    if (val_mean > best_val) {
      best_val = val_mean;
      best_label = p.label;
    }
  }
  out << "best by validation AUROC: " << best_label << " (" << best_val << ")\n";
}

model::GraphBatch TinyInstance::batch() const {
  return model::GraphBatch::assemble(h, structural, concepts, notes, ds, cfg);
}

TinyInstance make_tiny_instance(int layers, int d, int heads, int d1, int d2) {
  TinyInstance t;
  t.ds.task = TaskKind::binary;
  t.ds.codes = {{"A", "icd10", "acute systolic heart failure"},
                {"B", "rxnorm", "furosemide"},
                {"C", "icd10", "chronic kidney disease"}};
  VisitRecord v1;
  v1.visit_id = "visit1";
  v1.codes = {"A", "B"};
  v1.note_text = "History: volume overload responding to diuresis.";
  v1.label = {1};
  VisitRecord v2;
  v2.visit_id = "visit2";
  v2.codes = {"B", "C"};
  v2.note_text = "History: stable renal function, continue current dosing.";
  v2.label = {0};
  t.ds.visits = {v1, v2};
  t.ds.rebuild_indexes();

  t.h = add_self_loops(build_hypergraph(t.ds));

  ProviderConfig pc;
  pc.kind = ProviderKind::fallback;
  pc.d2 = d2;
  pc.seed = 11;
  EmbeddingProvider provider(pc);
  t.concepts = embed_concepts(provider, t.ds);
  t.notes = embed_notes(provider, t.ds, {});

  t.structural.kind = TableKind::structural;
  t.structural.dim = d1;
  std::mt19937_64 g(mix64(29, 0x71E5));
  for (const auto& node : t.h.node_ids) {
    std::vector<double> row(d1);
    for (double& x : row) x = normal01(g) * 0.5;
    t.structural.add(node, row);
  }

  t.cfg.d = d;
  t.cfg.layers = layers;
  t.cfg.heads = heads;
  t.cfg.d1 = d1;
  t.cfg.d2 = d2;
  t.cfg.task = TaskKind::binary;
  t.cfg.seed = 5;
  return t;
}

bool cmd_gradcheck(int layers, double eps, double threshold, std::ostream& out) {
  std::vector<int> layer_counts = layers == 0 ? std::vector<int>{1, 2} : std::vector<int>{layers};
  bool all_pass = true;
  for (int L : layer_counts) {
    TinyInstance tiny = make_tiny_instance(L);
    model::GraphBatch batch = tiny.batch();
    model::ModelParams params = model::ModelParams::init(tiny.cfg);
    double err = model::gradient_check(batch, params, eps);
    bool pass = err < threshold;
    all_pass = all_pass && pass;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "L=%d: max relative error %.3e (threshold %.0e) %s", L, err,
                  threshold, pass ? "PASS" : "FAIL");
    out << buf << "\n";
  }
  return all_pass;
}

int run(int argc, char** argv) {
  CLI::App app{"mingle: hypergraph EHR fusion of structural records and text semantics"};
  app.footer(config_key_help());
  app.require_subcommand(1);

  std::string config_path, visit_id, axes_name = "all";
  int k = 5, layer = -1, gc_layers = 0;
  double gc_eps = 1e-5, gc_threshold = 1e-4;
  bool dry_run = false;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "experiment config file")->required();
  };

  CLI::App* generate = app.add_subcommand("generate", "write a synthetic dataset to the output dir");
  add_config(generate);
  CLI::App* embed = app.add_subcommand("embed", "build structural, concept and note embeddings");
  add_config(embed);
  CLI::App* train_cmd = app.add_subcommand("train", "train the configured variant suite");
  add_config(train_cmd);
  CLI::App* evaluate = app.add_subcommand("evaluate", "aggregate run metrics into the report table");
  add_config(evaluate);
  CLI::App* explain = app.add_subcommand("explain", "rank important codes for a visit by attention");
  add_config(explain);
  explain->add_option("--visit", visit_id, "visit id to explain")->required();
  explain->add_option("-k", k, "top-k codes for the variant comparison (default 5)");
  explain->add_option("--layer", layer, "attention layer (default last; 0 = mean over layers)");
  CLI::App* grid = app.add_subcommand("gridsearch", "sweep hidden dim x layers and the dim ratio");
  add_config(grid);
  grid->add_option("--axes", axes_name, "dl | ratio | all (default all)");
  grid->add_flag("--dry-run", dry_run, "list grid configurations without training");
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
  gradcheck->add_option("--layers", gc_layers, "layer count to check (default: both 1 and 2)");
  gradcheck->add_option("--eps", gc_eps, "finite-difference step (default 1e-5)");
  gradcheck->add_option("--threshold", gc_threshold, "max relative error allowed (default 1e-4)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gradcheck->parsed()) return cmd_gradcheck(gc_layers, gc_eps, gc_threshold, std::cout) ? 0 : 4;

    ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
    if (generate->parsed()) {
      cmd_generate(cfg, std::cout);
    } else if (embed->parsed()) {
      cmd_embed(cfg, std::cout);
    } else if (train_cmd->parsed()) {
      cmd_train(cfg, std::cout);
    } else if (evaluate->parsed()) {
      cmd_evaluate(cfg, std::cout);
    } else if (explain->parsed()) {
      cmd_explain(cfg, visit_id, k, layer, std::cout);
    } else if (grid->parsed()) {
      train::GridAxes axes = train::GridAxes::all;
      if (axes_name == "dl") axes = train::GridAxes::dims_layers;
      else if (axes_name == "ratio") axes = train::GridAxes::ratio;
      else if (axes_name != "all") throw UsageError("bad --axes: " + axes_name);
      cmd_gridsearch(cfg, axes, dry_run, std::cout);
    }
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const ProviderError& e) {
    std::cerr << "provider error: " << e.what() << "\n";
    if (!e.failed_keys.empty()) {
      std::cerr << "failed keys:";
      for (const auto& key : e.failed_keys) std::cerr << " " << key;
      std::cerr << "\n";
    }
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace mingle::cli

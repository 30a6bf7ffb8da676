#include <sstream>

#include "doctest.h"
#include "mingle/cli.hpp"
#include "mingle/common.hpp"
#include "test_support.hpp"

using namespace mingle;

namespace {

std::string config_text(const std::string& out_dir, const std::string& extra = "") {
  return "[data]\n"
         "source = synthetic\n"
         "n_visits = 140\n"
         "n_codes = 40\n"
         "signal = semantics-only\n"
         "generator_seed = 3\n"
         "[embedding]\n"
         "d2 = 12\n"
         "ratio = 1.0\n"
         "walks_per_node = 4\n"
         "walk_length = 8\n"
         "sg_epochs = 2\n"
         "[model]\n"
         "d = 16\n"
         "layers = 1\n"
         "heads = 2\n"
         "[train]\n"
         "max_epochs = 8\n"
         "patience = 8\n"
         "seeds = 2\n"
         "variants = ablations\n"
         "[output]\n"
         "dir = " +
         out_dir + "\n" + extra;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config parsing") {
  TempDir dir("cli_cfg");
  SUBCASE("defaults and ratio-derived d1") {
    write_file(dir.file("a.ini"),
               "[embedding]\nratio = 2.0\nd2 = 32\n[output]\ndir = " + dir.file("out") + "\n");
    ExperimentConfig cfg = ExperimentConfig::from_file(dir.file("a.ini"));
    CHECK(cfg.derived_d1() == 64);
    CHECK(cfg.train_cfg.lr == 1e-3);
    CHECK(cfg.train_cfg.weight_decay == 1e-3);
    CHECK(cfg.train_cfg.max_epochs == 200);
    CHECK(cfg.train_cfg.patience == 20);
    CHECK(cfg.train_cfg.n_seeds == 5);
    CHECK(cfg.blocked_sections == std::vector<std::string>{"Admission Date", "Service"});
  }
  SUBCASE("explicit d1 wins over the ratio") {
    write_file(dir.file("b.ini"), "[embedding]\nratio = 2.0\nd2 = 32\nd1 = 24\n");
    CHECK(ExperimentConfig::from_file(dir.file("b.ini")).derived_d1() == 24);
  }
  SUBCASE("unknown keys are rejected") {
    write_file(dir.file("c.ini"), "[model]\nhidden = 32\n");
    CHECK_THROWS_WITH_AS(ExperimentConfig::from_file(dir.file("c.ini")),
                         doctest::Contains("hidden"), DataError);
  }
  SUBCASE("fractional ratios round to the nearest width") {
    write_file(dir.file("d.ini"), "[embedding]\nratio = 0.67\nd2 = 32\n");
    CHECK(ExperimentConfig::from_file(dir.file("d.ini")).derived_d1() == 21);  // round(21.44)
  }
}

TEST_CASE("pipeline composes from a fresh directory") {
  TempDir dir("cli_pipe");
  std::string out_dir = dir.file("run");
  write_file(dir.file("exp.ini"), config_text(out_dir));
  ExperimentConfig cfg = ExperimentConfig::from_file(dir.file("exp.ini"));
  std::ostringstream log;

  cli::cmd_generate(cfg, log);
  CHECK(std::filesystem::exists(out_dir + "/records.tsv"));
  CHECK(std::filesystem::exists(out_dir + "/codes.tsv"));
  CHECK(std::filesystem::exists(out_dir + "/notes.tsv"));
  CHECK(log.str().find("140 visits") != std::string::npos);

  SUBCASE("generate is re-runnable byte-identically") {
    std::string first = read_file(out_dir + "/records.tsv");
    cli::cmd_generate(cfg, log);
    CHECK(read_file(out_dir + "/records.tsv") == first);
  }

  SUBCASE("evaluate before train names the missing step") {
    CHECK_THROWS_WITH_AS(cli::cmd_evaluate(cfg, log), doctest::Contains("no checkpoint"), DataError);
  }

  SUBCASE("embed, train, evaluate, explain") {
    cli::cmd_embed(cfg, log);
    CHECK(std::filesystem::exists(out_dir + "/emb_structural.tsv"));
    CHECK(std::filesystem::exists(out_dir + "/emb_concept.tsv"));
    CHECK(std::filesystem::exists(out_dir + "/emb_note.tsv"));

    // Second embed run answers everything from the cache.
    std::ostringstream second;
    cli::cmd_embed(cfg, second);
    CHECK(second.str().find("cache hits 0") == std::string::npos);

    std::ostringstream train_log;
    cli::cmd_train(cfg, train_log);
    CHECK(std::filesystem::exists(out_dir + "/suite_summary.tsv"));
    CHECK(std::filesystem::exists(out_dir + "/checkpoints/full_seed1.ckpt"));
    CHECK(std::filesystem::exists(out_dir + "/checkpoints/wo_note_seed2.ckpt"));

    std::ostringstream eval_log;
    cli::cmd_evaluate(cfg, eval_log);
    CHECK(std::filesystem::exists(out_dir + "/report.txt"));
    CHECK(std::filesystem::exists(out_dir + "/report.tsv"));
    // Ablation suite: exactly the three variant rows.
    CHECK(eval_log.str().find("full") != std::string::npos);
    CHECK(eval_log.str().find("wo_concept") != std::string::npos);
    CHECK(eval_log.str().find("wo_note") != std::string::npos);
    CHECK(eval_log.str().find("backbone") == std::string::npos);

    std::ostringstream explain_log;
    std::string visit = "V100003";
    cli::cmd_explain(cfg, visit, 3, -1, explain_log);
    CHECK(std::filesystem::exists(out_dir + "/explain_" + visit + ".txt"));
    CHECK(explain_log.str().find("visit " + visit) != std::string::npos);
  }
}

TEST_CASE("explain clips k to the visit size") {
  TempDir dir("cli_clip");
  std::string out_dir = dir.file("run");
  // Hand-built files-mode dataset with a 2-code visit to explain.
  std::string records;
  for (int i = 0; i < 40; ++i)
    records += "p" + std::to_string(i) + "\t" + (i % 2 ? "1" : "0") + "\t" +
               (i == 0 ? "A,B" : (i % 3 ? "A,B,C,D" : "B,C,D")) + "\n";
  write_file(dir.file("records.tsv"), records);
  write_file(dir.file("codes.tsv"),
             "A\ticd10\talpha\nB\ticd10\tbeta\nC\ticd10\tgamma\nD\ticd10\tdelta\n");
  write_file(dir.file("exp.ini"),
             "[data]\nsource = files\nrecords = " + dir.file("records.tsv") +
                 "\ncodes = " + dir.file("codes.tsv") +
                 "\n[embedding]\nd2 = 8\nd1 = 8\nwalks_per_node = 2\nwalk_length = 4\nsg_epochs = 1\n"
                 "[model]\nd = 8\nlayers = 1\nheads = 2\n"
                 "[train]\nmax_epochs = 3\npatience = 3\nseeds = 1\nvariants = all\n"
                 "[output]\ndir = " +
                 out_dir + "\n");
  ExperimentConfig cfg = ExperimentConfig::from_file(dir.file("exp.ini"));
  std::ostringstream log;
  cli::cmd_embed(cfg, log);
  cli::cmd_train(cfg, log);

  std::ostringstream explain_log;
  cli::cmd_explain(cfg, "p0", 3, -1, explain_log);
  // Visit p0 has two codes: the ranking has 2 entries and the comparison
  // clips to k = 2 (backbone checkpoint exists in `all` mode).
  CHECK(explain_log.str().find("top-2 overlap") != std::string::npos);
  CHECK(explain_log.str().find(" 1. ") != std::string::npos);
  CHECK(explain_log.str().find(" 2. ") != std::string::npos);
  CHECK(explain_log.str().find(" 3. ") == std::string::npos);
}

TEST_CASE("embed records the ratio-derived width in the table header") {
  TempDir dir("cli_ratio");
  std::string out_dir = dir.file("run");
  write_file(dir.file("exp.ini"),
             "[data]\nsource = synthetic\nn_visits = 60\nn_codes = 20\nsignal = semantics-only\n"
             "[embedding]\nd2 = 8\nratio = 2.0\nwalks_per_node = 2\nwalk_length = 4\nsg_epochs = 1\n"
             "[output]\ndir = " +
                 out_dir + "\n");
  ExperimentConfig cfg = ExperimentConfig::from_file(dir.file("exp.ini"));
  CHECK(cfg.derived_d1() == 16);
  std::ostringstream log;
  cli::cmd_generate(cfg, log);
  cli::cmd_embed(cfg, log);
  EmbeddingTable structural = EmbeddingTable::load(out_dir + "/emb_structural.tsv");
  CHECK(structural.dim == 16);
  CHECK(read_file(out_dir + "/emb_structural.tsv").rfind("# kind=structural dim=16", 0) == 0);
  CHECK(std::filesystem::exists(out_dir + "/hypergraph.tsv"));
}

TEST_CASE("textualize_missing fills empty notes from concept names") {
  TempDir dir("cli_textualize");
  std::string out_dir = dir.file("run");
  std::string records;
  for (int i = 0; i < 12; ++i) records += "p" + std::to_string(i) + "\t1\tA,B\n";
  write_file(dir.file("records.tsv"), records);
  write_file(dir.file("codes.tsv"), "A\ticd10\thypertension\nB\trxnorm\tmetformin\n");
  write_file(dir.file("exp.ini"),
             "[data]\nsource = files\nrecords = " + dir.file("records.tsv") +
                 "\ncodes = " + dir.file("codes.tsv") +
                 "\ntextualize_missing = true\n"
                 "[embedding]\nd2 = 8\nd1 = 8\nwalks_per_node = 2\nwalk_length = 4\nsg_epochs = 1\n"
                 "[output]\ndir = " +
                 out_dir + "\n");
  ExperimentConfig cfg = ExperimentConfig::from_file(dir.file("exp.ini"));
  std::ostringstream log;
  cli::cmd_embed(cfg, log);
  EmbeddingTable notes = EmbeddingTable::load(out_dir + "/emb_note.tsv");
  // Every visit gets the manufactured sentence, so no zero note rows remain.
  for (const auto& row : notes.rows) {
    double norm = 0.0;
    for (double x : row) norm += x * x;
    CHECK(norm > 0.5);
  }
}

TEST_CASE("gridsearch dry run enumerates the full grid") {
  TempDir dir("cli_grid");
  write_file(dir.file("exp.ini"), config_text(dir.file("out")));
  ExperimentConfig cfg = ExperimentConfig::from_file(dir.file("exp.ini"));

  std::ostringstream all_log;
  cli::cmd_gridsearch(cfg, train::GridAxes::all, /*dry_run=*/true, all_log);
  CHECK(all_log.str().find("21 grid configurations") != std::string::npos);
  CHECK(all_log.str().find("d24_L1") != std::string::npos);
  CHECK(all_log.str().find("d96_L4") != std::string::npos);
  CHECK(all_log.str().find("ratio0.67") != std::string::npos);

  std::ostringstream dl_log;
  cli::cmd_gridsearch(cfg, train::GridAxes::dims_layers, true, dl_log);
  CHECK(dl_log.str().find("16 grid configurations") != std::string::npos);
}

TEST_CASE("gridsearch trains the ratio sweep") {
  TempDir dir("cli_gridrun");
  std::string out_dir = dir.file("run");
  write_file(dir.file("exp.ini"),
             "[data]\nsource = synthetic\nn_visits = 80\nn_codes = 24\nsignal = semantics-only\n"
             "[embedding]\nd2 = 8\nd1 = 8\nwalks_per_node = 2\nwalk_length = 4\nsg_epochs = 1\n"
             "[model]\nd = 8\nlayers = 1\nheads = 2\n"
             "[train]\nmax_epochs = 2\npatience = 2\nseeds = 1\n"
             "[output]\ndir = " +
                 out_dir + "\n");
  ExperimentConfig cfg = ExperimentConfig::from_file(dir.file("exp.ini"));
  std::ostringstream log;
  cli::cmd_generate(cfg, log);
  cli::cmd_embed(cfg, log);
  cli::cmd_gridsearch(cfg, train::GridAxes::ratio, /*dry_run=*/false, log);
  CHECK(log.str().find("best by validation AUROC") != std::string::npos);
  std::string summary = read_file(out_dir + "/grid_summary.tsv");
  for (const char* label : {"ratio0.5", "ratio0.67", "ratio1", "ratio1.5", "ratio2"})
    CHECK(summary.find(label) != std::string::npos);
}

TEST_CASE("gradcheck command passes both layer counts") {
  std::ostringstream log;
  CHECK(cli::cmd_gradcheck(0, 1e-5, 1e-4, log));
  CHECK(log.str().find("L=1") != std::string::npos);
  CHECK(log.str().find("L=2") != std::string::npos);
  CHECK(log.str().find("FAIL") == std::string::npos);
}

TEST_CASE("run maps errors to exit codes") {
  SUBCASE("no subcommand is a usage error") {
    const char* argv[] = {"mingle"};
    CHECK(cli::run(1, const_cast<char**>(argv)) == 1);
  }
  SUBCASE("missing config file is a data error") {
    const char* argv[] = {"mingle", "generate", "-c", "/nonexistent/exp.ini"};
    CHECK(cli::run(4, const_cast<char**>(argv)) == 2);
  }
  SUBCASE("generate without a synthetic spec is a usage error") {
    TempDir dir("cli_exit");
    write_file(dir.file("records.tsv"), "p0\t1\tA\n");
    write_file(dir.file("codes.tsv"), "A\ticd10\talpha\n");
    write_file(dir.file("exp.ini"), "[data]\nsource = files\nrecords = " + dir.file("records.tsv") +
                                        "\ncodes = " + dir.file("codes.tsv") + "\n");
    std::string cfg_arg = dir.file("exp.ini");
    const char* argv[] = {"mingle", "generate", "-c", cfg_arg.c_str()};
    CHECK(cli::run(4, const_cast<char**>(argv)) == 1);
  }
}

}  // TEST_SUITE

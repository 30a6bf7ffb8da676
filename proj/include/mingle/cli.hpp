#pragma once

#include <iosfwd>
#include <string>

#include "mingle/config.hpp"
#include "mingle/train.hpp"

namespace mingle::cli {

// Pipeline commands. Each throws UsageError/DataError/ProviderError/
// NumericError on failure; run() maps those to exit codes 1/2/3/4.

void cmd_generate(const ExperimentConfig& cfg, std::ostream& out);
void cmd_embed(const ExperimentConfig& cfg, std::ostream& out);
void cmd_train(const ExperimentConfig& cfg, std::ostream& out);
void cmd_evaluate(const ExperimentConfig& cfg, std::ostream& out);
void cmd_explain(const ExperimentConfig& cfg, const std::string& visit_id, int k, int layer,
                 std::ostream& out);
void cmd_gridsearch(const ExperimentConfig& cfg, train::GridAxes axes, bool dry_run,
                    std::ostream& out);

// Canonical gradient-check instance: 3 codes, 2 visits, binary labels,
// d = 8, 2 heads, double precision throughout.
struct TinyInstance {
  Dataset ds;
  Hypergraph h;
  EmbeddingTable structural, concepts, notes;
  model::ModelConfig cfg;

  model::GraphBatch batch() const;  // references this->h; keep the instance alive
};

TinyInstance make_tiny_instance(int layers, int d = 8, int heads = 2, int d1 = 6, int d2 = 5);

// Returns true when every checked layer count passes the threshold.
bool cmd_gradcheck(int layers, double eps, double threshold, std::ostream& out);

int run(int argc, char** argv);

}  // namespace mingle::cli

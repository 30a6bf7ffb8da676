#pragma once

#include <string>
#include <vector>

#include "mingle/data.hpp"
#include "mingle/hypergraph.hpp"
#include "mingle/model.hpp"

namespace mingle::interpret {

// Important-node extraction from the recorded attention weights of the
// node->edge direction: the importance of a code for a visit is its
// head-averaged attention weight in that visit's hyperedge update.

struct RankedCode {
  std::string code_id;
  std::string concept_name;
  double score = 0.0;
};

struct NodeImportanceReport {
  std::string visit_id;
  std::vector<RankedCode> ranked;  // non-increasing scores, ties by code_id
  int layer = 0;                   // 1-based; 0 = mean over layers
  std::string variant;
};

// layer: 1..L selects one layer's attention row; 0 averages over layers.
NodeImportanceReport node_importance(const model::LayerState& state, const Hypergraph& h,
                                     const Dataset& ds, const std::string& visit_id, int layer,
                                     const std::string& variant = "");

struct VariantOverlap {
  std::vector<std::string> shared;       // in both top-k lists
  std::vector<std::string> only_first;   // unique to the first report
  std::vector<std::string> only_second;  // unique to the second
  int k = 0;                             // clipped to the smaller visit size
};

VariantOverlap compare_variants(const NodeImportanceReport& a, const NodeImportanceReport& b, int k);

// Per-visit text block: ranked codes with scores plus the (filtered) note.
std::string format_report(const NodeImportanceReport& report, const std::string& note_text);

}  // namespace mingle::interpret

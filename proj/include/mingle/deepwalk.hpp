#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mingle/embedding.hpp"
#include "mingle/hypergraph.hpp"

namespace mingle {

// Weighted random walks over the clique expansion. Each (node, walk) pair gets
// its own generator derived from the seed, so the corpus is identical whether
// walks are produced serially or in parallel. Isolated nodes yield length-1
// walks.
std::vector<std::vector<int>> random_walks(const WeightedGraph& g, int walks_per_node, int walk_length,
                                           uint64_t seed);

struct SkipGramConfig {
  int dim = 64;
  int window = 5;
  int negatives = 5;
  int epochs = 5;
  double lr = 0.025;
  uint64_t seed = 1;
};

// Skip-gram with negative sampling over the walk corpus. Keys name the rows of
// the returned structural table (keys[i] labels node index i). Nodes that never
// appear in a context keep their seeded initialization.
EmbeddingTable train_skipgram(const std::vector<std::vector<int>>& walks,
                              const std::vector<std::string>& keys, const SkipGramConfig& cfg);

}  // namespace mingle

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mingle/embedding.hpp"
#include "mingle/hypergraph.hpp"
#include "mingle/mat.hpp"

namespace mingle::model {

// Hypergraph attention network with two-level semantic fusion:
//  - node features concatenate structural and concept-name embeddings, then a
//    learned projection maps them to the hidden width;
//  - hyperedge semantics rows (note embedding for visit edges, concept
//    embedding for selfloop edges) pass through MLP1 and are fused into every
//    hyperedge update through MLP2.
// Message passing alternates multi-head scaled dot-product attention in both
// directions; edges update first from current nodes, then nodes from fresh
// edges. Edge embeddings at layer 0 come from a linear map of the mean member
// feature.

struct ModelConfig {
  int d = 32;      // hidden width, divisible by heads
  int layers = 1;  // 1..4
  int heads = 4;
  int d1 = 32;  // structural embedding width
  int d2 = 32;  // semantic embedding width
  TaskKind task = TaskKind::binary;
  bool use_concept_semantics = true;
  bool use_note_semantics = true;
  uint64_t seed = 1;

  int n_outputs() const { return label_arity(task); }
  void validate() const;
};

struct AttentionParams {
  Mat wq, wk, wv;  // d x d
  Mat wo;          // d x d
  Mat bo;          // 1 x d
};

struct ModelParams {
  ModelConfig cfg;

  Mat w_in, b_in;      // (d1+d2) x d, 1 x d
  Mat w_e0, b_e0;      // d x d, 1 x d
  Mat mlp1_w1, mlp1_b1, mlp1_w2, mlp1_b2;  // d2 -> d -> d
  std::vector<AttentionParams> node_to_edge;  // per layer
  std::vector<AttentionParams> edge_to_node;  // per layer
  Mat mlp2_w1, mlp2_b1, mlp2_w2, mlp2_b2;  // 2d -> d -> d
  Mat cls_w1, cls_b1, cls_w2, cls_b2;      // L*d -> d -> n_out

  static ModelParams init(const ModelConfig& cfg);
  static ModelParams zeros_like(const ModelParams& other);

  // Stable name -> tensor registry; ordering defines the flattened layout.
  std::vector<std::pair<std::string, Mat*>> tensors();
  std::vector<std::pair<std::string, const Mat*>> tensors() const;
  size_t n_scalars() const;
  std::vector<double> flatten() const;
  void unflatten(const std::vector<double>& flat);
  void zero();
  bool finite() const;

  void save(const std::string& path) const;
  static ModelParams load(const std::string& path);
};

// Per-layer states plus the attention records used for interpretation:
// attention[l][e] holds the head-averaged weights over edge e's member nodes
// at layer l+1 (rows are non-negative and sum to 1).
struct LayerState {
  std::vector<Mat> node_states;  // X[0..L], each n_nodes x d
  std::vector<Mat> edge_states;  // E[0..L], each n_edges x d
  std::vector<std::vector<std::vector<double>>> attention;  // [layer][edge][member]
};

// Node feature assembly: rows [S_v ; C_v] (concept part zeroed under the
// concept-semantics ablation). S and C are keyed by code_id.
Mat node_features_raw(const EmbeddingTable& structural, const EmbeddingTable& concepts,
                      const Hypergraph& h, const ModelConfig& cfg);

// Projected node initialization: relu(raw * w_in + b_in).
Mat init_node_features(const EmbeddingTable& structural, const EmbeddingTable& concepts,
                       const Hypergraph& h, const ModelParams& params);

// Per-edge semantic input rows (d2 wide): note embedding for visit edges,
// concept embedding for selfloop edges.
Mat edge_semantic_rows(const EmbeddingTable& notes, const EmbeddingTable& concepts, const Hypergraph& h,
                       const ModelConfig& cfg);

// H = MLP1(semantic rows), or all-zeros under the note-semantics ablation.
Mat build_hyperedge_semantics(const EmbeddingTable& notes, const EmbeddingTable& concepts,
                              const Hypergraph& h, const ModelParams& params);

// Single-target attention update (query attends over member rows). Exposed for
// tests; the forward pass runs the batched equivalent.
std::vector<double> attention_update(const Mat& members, const std::vector<double>& query,
                                     const AttentionParams& p, int heads,
                                     std::vector<double>* weights_out = nullptr);

// MLP2 on [aggregated ; he_row].
std::vector<double> fused_edge_update(const std::vector<double>& aggregated,
                                      const std::vector<double>& he_row, const ModelParams& params);

LayerState forward(const Hypergraph& h, const Mat& x0, const Mat& hsem, const ModelParams& params);

// Probabilities for visit edges only (n_visit_edges x n_outputs), in visit
// edge order.
Mat classify(const Hypergraph& h, const LayerState& state, const ModelParams& params);

// Mean binary cross-entropy over rows where mask is nonzero (all rows when
// mask is empty); probabilities are clamped to [1e-7, 1-1e-7].
double bce_loss(const Mat& probs, const Mat& labels, const std::vector<uint8_t>& mask = {});

// Assembled inputs for training and gradient checking.
struct GraphBatch {
  const Hypergraph* h = nullptr;
  Mat structural;  // n_nodes x d1, node order
  Mat concepts;    // n_nodes x d2, node order
  Mat notes;       // n_visit_edges x d2, visit edge order
  Mat labels;      // n_visit_edges x n_outputs
  std::vector<uint8_t> loss_mask;  // per visit edge; empty = all

  static GraphBatch assemble(const Hypergraph& h, const EmbeddingTable& structural,
                             const EmbeddingTable& concepts, const EmbeddingTable& notes,
                             const Dataset& ds, const ModelConfig& cfg);
};

// Full forward + analytic backward; returns the loss and fills `grads`
// (zeroed first). Optionally exposes probabilities and the layer state.
double forward_backward(const GraphBatch& batch, const ModelParams& params, ModelParams& grads,
                        Mat* probs_out = nullptr, LayerState* state_out = nullptr);

double loss_only(const GraphBatch& batch, const ModelParams& params, Mat* probs_out = nullptr,
                 LayerState* state_out = nullptr);

// Central finite-difference check of every parameter tensor; tensors larger
// than `max_entries_per_tensor` are sampled. Returns the max relative error.
double gradient_check(const GraphBatch& batch, const ModelParams& params, double eps = 1e-5,
                      int max_entries_per_tensor = 1000, uint64_t sample_seed = 0);

}  // namespace mingle::model

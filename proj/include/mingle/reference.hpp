#pragma once

#include "mingle/model.hpp"

namespace mingle::ref {

// Serial straight-line re-derivation of the model forward pass, kept separate
// from the OpenMP kernels so tests and the benchmark can compare the two
// paths. Plain nested loops only; no shared kernel code.
struct ReferenceOutput {
  std::vector<Mat> node_states;  // X[0..L]
  std::vector<Mat> edge_states;  // E[0..L]
  Mat probs;                     // visit edges x n_outputs
  double loss = 0.0;
};

ReferenceOutput forward(const model::GraphBatch& batch, const model::ModelParams& params);

}  // namespace mingle::ref

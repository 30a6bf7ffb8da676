// Timing harness: OpenMP forward/backward kernels against the serial
// straight-line reference on a synthetic instance, with an agreement check.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "mingle/common.hpp"
#include "mingle/deepwalk.hpp"
#include "mingle/reference.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace mingle;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mingle_bench: parallel kernels vs serial reference"};
  int n_visits = 1000, n_codes = 120, d = 32, layers = 2, heads = 4, repeat = 3;
  app.add_option("--visits", n_visits, "synthetic visits (default 1000)");
  app.add_option("--codes", n_codes, "synthetic codes (default 120)");
  app.add_option("--d", d, "hidden width (default 32)");
  app.add_option("--layers", layers, "layers (default 2)");
  app.add_option("--heads", heads, "heads (default 4)");
  app.add_option("--repeat", repeat, "timed repetitions (default 3)");
  CLI11_PARSE(app, argc, argv);

  try {
    Dataset ds = generate_synthetic_dataset(n_visits, n_codes, TaskKind::binary,
                                            SignalSpec::mixed(), 42);
    Hypergraph h = add_self_loops(build_hypergraph(ds));
    WeightedGraph g = clique_expansion(h);

    auto walks = random_walks(g, 10, 20, 7);
    SkipGramConfig sg;
    sg.dim = d;
    EmbeddingTable structural = train_skipgram(walks, h.node_ids, sg);

    ProviderConfig pc;
    pc.d2 = d;
    EmbeddingProvider provider(pc);
    EmbeddingTable concepts = embed_concepts(provider, ds);
    EmbeddingTable notes = embed_notes(provider, ds, {"Admission Date", "Service"});

    model::ModelConfig cfg;
    cfg.d = d;
    cfg.layers = layers;
    cfg.heads = heads;
    cfg.d1 = d;
    cfg.d2 = d;
    model::GraphBatch batch = model::GraphBatch::assemble(h, structural, concepts, notes, ds, cfg);
    model::ModelParams params = model::ModelParams::init(cfg);
    model::ModelParams grads = model::ModelParams::zeros_like(params);

#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (compiled without OpenMP)\n");
#endif
    std::printf("instance: %d visits, %d nodes, %d hyperedges, d=%d L=%d h=%d\n",
                static_cast<int>(ds.visits.size()), h.n_nodes(), h.n_edges(), d, layers, heads);

    // Warm-up plus agreement check.
    Mat probs;
    model::loss_only(batch, params, &probs);
    ref::ReferenceOutput ref_out = ref::forward(batch, params);
    double max_diff = 0.0;
    for (int i = 0; i < probs.rows; ++i)
      for (int j = 0; j < probs.cols; ++j)
        max_diff = std::max(max_diff, std::abs(probs(i, j) - ref_out.probs(i, j)));
    std::printf("parallel vs reference max |dprob|: %.3e\n", max_diff);

    auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < repeat; ++r) model::loss_only(batch, params);
    double fwd = seconds_since(t0) / repeat;

    t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < repeat; ++r) model::forward_backward(batch, params, grads);
    double fwbw = seconds_since(t0) / repeat;

    t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < repeat; ++r) ref::forward(batch, params);
    double ref_fwd = seconds_since(t0) / repeat;

    std::printf("%-28s %10.4f s\n", "forward (parallel kernels)", fwd);
    std::printf("%-28s %10.4f s\n", "forward+backward (parallel)", fwbw);
    std::printf("%-28s %10.4f s\n", "forward (serial reference)", ref_fwd);
    std::printf("reference/parallel forward ratio: %.2fx\n", ref_fwd / fwd);

    if (max_diff > 1e-9) {
      std::fprintf(stderr, "agreement check failed (max diff %.3e > 1e-9)\n", max_diff);
      return 4;
    }
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

#include "mingle/deepwalk.hpp"

#include <algorithm>
#include <cmath>

#include "mingle/common.hpp"

namespace mingle {

std::vector<std::vector<int>> random_walks(const WeightedGraph& g, int walks_per_node, int walk_length,
                                           uint64_t seed) {
  if (walk_length < 2) throw DataError("walk_length must be >= 2");
  if (walks_per_node < 1) throw DataError("walks_per_node must be >= 1");

  // Cumulative weights per node for O(log deg) weighted steps.
  std::vector<std::vector<double>> cum(g.n);
  for (int v = 0; v < g.n; ++v) {
    double total = 0.0;
    cum[v].reserve(g.adj[v].size());
    for (const auto& [u, w] : g.adj[v]) {
      total += w;
      cum[v].push_back(total);
    }
  }

  std::vector<std::vector<int>> walks(static_cast<size_t>(g.n) * walks_per_node);
#pragma omp parallel for schedule(static)
  for (int v = 0; v < g.n; ++v) {
    for (int r = 0; r < walks_per_node; ++r) {
      std::mt19937_64 rng(mix64(seed, (static_cast<uint64_t>(v) << 20) | static_cast<uint64_t>(r)));
      std::vector<int>& walk = walks[static_cast<size_t>(v) * walks_per_node + r];
      walk.push_back(v);
      int cur = v;
      for (int step = 1; step < walk_length; ++step) {
        if (g.adj[cur].empty()) break;
        double pick = u01(rng) * cum[cur].back();
        size_t k = std::upper_bound(cum[cur].begin(), cum[cur].end(), pick) - cum[cur].begin();
        if (k >= g.adj[cur].size()) k = g.adj[cur].size() - 1;
        cur = g.adj[cur][k].first;
        walk.push_back(cur);
      }
    }
  }
  return walks;
}

namespace {

inline double sigmoid(double x) {
  if (x > 8.0) return 1.0;
  if (x < -8.0) return 0.0;
  return 1.0 / (1.0 + std::exp(-x));
}

}  // namespace

EmbeddingTable train_skipgram(const std::vector<std::vector<int>>& walks,
                              const std::vector<std::string>& keys, const SkipGramConfig& cfg) {
  if (cfg.dim < 2) throw DataError("skip-gram dimension must be >= 2");
  if (walks.empty()) throw DataError("empty walk corpus");
  const int n = static_cast<int>(keys.size());
  const int d = cfg.dim;

  std::vector<long long> counts(n, 0);
  size_t total_tokens = 0;
  for (const auto& w : walks) {
    for (int t : w) {
      if (t < 0 || t >= n) throw DataError("walk token out of range");
      ++counts[t];
    }
    total_tokens += w.size();
  }

  // Unigram^0.75 negative-sampling distribution.
  std::vector<double> noise_cum(n, 0.0);
  double noise_total = 0.0;
  for (int i = 0; i < n; ++i) {
    noise_total += counts[i] > 0 ? std::pow(static_cast<double>(counts[i]), 0.75) : 0.0;
    noise_cum[i] = noise_total;
  }
  if (noise_total <= 0.0) throw DataError("empty walk corpus");

  std::mt19937_64 init_rng(mix64(cfg.seed, 0xE31B));
  std::vector<double> in(static_cast<size_t>(n) * d), out(static_cast<size_t>(n) * d, 0.0);
  for (double& x : in) x = (u01(init_rng) - 0.5) / d;

  std::mt19937_64 rng(mix64(cfg.seed, 0x5619));
  std::vector<double> accum(d);
  const double total_steps = static_cast<double>(total_tokens) * cfg.epochs + 1.0;
  size_t processed = 0;

  auto sample_negative = [&]() {
    double pick = u01(rng) * noise_total;
    size_t k = std::upper_bound(noise_cum.begin(), noise_cum.end(), pick) - noise_cum.begin();
    return static_cast<int>(std::min(k, static_cast<size_t>(n - 1)));
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& walk : walks) {
      int len = static_cast<int>(walk.size());
      for (int p = 0; p < len; ++p) {
        ++processed;
        double lr = cfg.lr * std::max(1.0 - static_cast<double>(processed) / total_steps, 1e-4);
        int cw = 1 + static_cast<int>(rng() % cfg.window);
        int center = walk[p];
        double* vin = &in[static_cast<size_t>(center) * d];
        for (int q = std::max(0, p - cw); q <= std::min(len - 1, p + cw); ++q) {
          if (q == p) continue;
          int context = walk[q];
          std::fill(accum.begin(), accum.end(), 0.0);
          for (int s = 0; s < cfg.negatives + 1; ++s) {
            int target;
            double label;
            if (s == 0) {
              target = context;
              label = 1.0;
            } else {
              target = sample_negative();
              if (target == context) continue;
              label = 0.0;
            }
            double* vout = &out[static_cast<size_t>(target) * d];
            double f = 0.0;
            for (int j = 0; j < d; ++j) f += vin[j] * vout[j];
            double gval = (label - sigmoid(f)) * lr;
            for (int j = 0; j < d; ++j) {
              accum[j] += gval * vout[j];
              vout[j] += gval * vin[j];
            }
          }
          for (int j = 0; j < d; ++j) vin[j] += accum[j];
        }
      }
    }
  }

  EmbeddingTable table;
  table.kind = TableKind::structural;
  table.dim = d;
  for (int i = 0; i < n; ++i)
    table.add(keys[i], std::vector<double>(in.begin() + static_cast<size_t>(i) * d,
                                           in.begin() + static_cast<size_t>(i + 1) * d));
  return table;
}

}  // namespace mingle

#include "mingle/reference.hpp"

#include <algorithm>
#include <cmath>

#include "mingle/common.hpp"

namespace mingle::ref {

namespace {

// y = x * W + b for a single row, naive.
std::vector<double> linear_row(const std::vector<double>& x, const Mat& w, const Mat& b) {
  std::vector<double> y(w.cols, 0.0);
  for (int j = 0; j < w.cols; ++j) {
    double s = b.empty() ? 0.0 : b(0, j);
    for (int i = 0; i < w.rows; ++i) s += x[i] * w(i, j);
    y[j] = s;
  }
  return y;
}

std::vector<double> relu_row(std::vector<double> x) {
  for (double& v : x) v = v > 0.0 ? v : 0.0;
  return x;
}

std::vector<double> get_row(const Mat& m, int i) {
  return std::vector<double>(m.row(i), m.row(i) + m.cols);
}

void set_row(Mat& m, int i, const std::vector<double>& v) {
  for (int j = 0; j < m.cols; ++j) m(i, j) = v[j];
}

// One hidden layer MLP: linear, relu, linear.
std::vector<double> mlp_row(const std::vector<double>& x, const Mat& w1, const Mat& b1, const Mat& w2,
                            const Mat& b2) {
  return linear_row(relu_row(linear_row(x, w1, b1)), w2, b2);
}

// Multi-head attention for one target: query row attends over member rows.
std::vector<double> attend(const std::vector<double>& query_in, const Mat& source_in,
                           const std::vector<int>& members, const model::AttentionParams& p,
                           int heads) {
  const int d = p.wq.cols;
  const int dh = d / heads;
  std::vector<double> q = linear_row(query_in, p.wq, Mat());
  std::vector<std::vector<double>> k, v;
  for (int s : members) {
    k.push_back(linear_row(get_row(source_in, s), p.wk, Mat()));
    v.push_back(linear_row(get_row(source_in, s), p.wv, Mat()));
  }
  std::vector<double> concat(d, 0.0);
  for (int hd = 0; hd < heads; ++hd) {
    std::vector<double> score(members.size());
    double mx = -1e300;
    for (size_t j = 0; j < members.size(); ++j) {
      double s = 0.0;
      for (int t = 0; t < dh; ++t) s += q[hd * dh + t] * k[j][hd * dh + t];
      score[j] = s / std::sqrt(static_cast<double>(dh));
      mx = std::max(mx, score[j]);
    }
    double z = 0.0;
    for (size_t j = 0; j < members.size(); ++j) {
      score[j] = std::exp(score[j] - mx);
      z += score[j];
    }
    for (size_t j = 0; j < members.size(); ++j) {
      double a = score[j] / z;
      for (int t = 0; t < dh; ++t) concat[hd * dh + t] += a * v[j][hd * dh + t];
    }
  }
  return relu_row(linear_row(concat, p.wo, p.bo));
}

}  // namespace

ReferenceOutput forward(const model::GraphBatch& batch, const model::ModelParams& params) {
  const Hypergraph& h = *batch.h;
  const model::ModelConfig& cfg = params.cfg;
  const int n = h.n_nodes();
  const int m = h.n_edges();
  const int d = cfg.d;
  const int L = cfg.layers;

  ReferenceOutput out;

  // Node features: [structural ; concept-or-zero] -> linear -> relu.
  Mat x0(n, d);
  for (int vtx = 0; vtx < n; ++vtx) {
    std::vector<double> raw(cfg.d1 + cfg.d2, 0.0);
    for (int j = 0; j < cfg.d1; ++j) raw[j] = batch.structural(vtx, j);
    if (cfg.use_concept_semantics)
      for (int j = 0; j < cfg.d2; ++j) raw[cfg.d1 + j] = batch.concepts(vtx, j);
    set_row(x0, vtx, relu_row(linear_row(raw, params.w_in, params.b_in)));
  }

  // Shared hyperedge semantics.
  Mat hsem(m, d);
  if (cfg.use_note_semantics) {
    for (int e = 0; e < m; ++e) {
      std::vector<double> z(cfg.d2, 0.0);
      if (h.edges[e].kind == EdgeKind::visit) {
        for (int j = 0; j < cfg.d2; ++j) z[j] = batch.notes(e, j);
      } else if (cfg.use_concept_semantics) {
        for (int j = 0; j < cfg.d2; ++j) z[j] = batch.concepts(h.edges[e].members[0], j);
      }
      set_row(hsem, e, mlp_row(z, params.mlp1_w1, params.mlp1_b1, params.mlp1_w2, params.mlp1_b2));
    }
  }

  // Layer-0 edge states: linear map of the mean member feature.
  Mat e0(m, d);
  for (int e = 0; e < m; ++e) {
    std::vector<double> mean(d, 0.0);
    for (int vtx : h.edges[e].members)
      for (int j = 0; j < d; ++j) mean[j] += x0(vtx, j);
    for (double& x : mean) x /= static_cast<double>(h.edges[e].members.size());
    set_row(e0, e, linear_row(mean, params.w_e0, params.b_e0));
  }

  out.node_states.push_back(x0);
  out.edge_states.push_back(e0);

  for (int l = 0; l < L; ++l) {
    const Mat& x_prev = out.node_states[l];
    const Mat& e_prev = out.edge_states[l];

    Mat e_new(m, d);
    for (int e = 0; e < m; ++e) {
      std::vector<double> aggregated =
          attend(get_row(e_prev, e), x_prev, h.edges[e].members, params.node_to_edge[l], cfg.heads);
      std::vector<double> fused(2 * d, 0.0);
      for (int j = 0; j < d; ++j) {
        fused[j] = aggregated[j];
        fused[d + j] = hsem(e, j);
      }
      set_row(e_new, e, mlp_row(fused, params.mlp2_w1, params.mlp2_b1, params.mlp2_w2, params.mlp2_b2));
    }

    Mat x_new(n, d);
    for (int vtx = 0; vtx < n; ++vtx) {
      std::vector<double> updated =
          attend(get_row(x_prev, vtx), e_new, h.node_edges[vtx], params.edge_to_node[l], cfg.heads);
      set_row(x_new, vtx, updated);
    }

    out.edge_states.push_back(e_new);
    out.node_states.push_back(x_new);
  }

  // Classification over visit edges: layer-concatenated edge states.
  const int nv = h.n_visit_edges;
  const int n_out = cfg.n_outputs();
  out.probs = Mat(nv, n_out);
  double total = 0.0;
  long long counted = 0;
  for (int e = 0; e < nv; ++e) {
    std::vector<double> concat(static_cast<size_t>(L) * d);
    for (int l = 1; l <= L; ++l)
      for (int j = 0; j < d; ++j) concat[(l - 1) * d + j] = out.edge_states[l](e, j);
    std::vector<double> logits =
        mlp_row(concat, params.cls_w1, params.cls_b1, params.cls_w2, params.cls_b2);
    for (int j = 0; j < n_out; ++j) out.probs(e, j) = 1.0 / (1.0 + std::exp(-logits[j]));
    if (!batch.labels.empty()) {
      if (!batch.loss_mask.empty() && !batch.loss_mask[e]) continue;
      ++counted;
      for (int j = 0; j < n_out; ++j) {
        double p = std::clamp(out.probs(e, j), 1e-7, 1.0 - 1e-7);
        double y = batch.labels(e, j);
        total += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
      }
    }
  }
  out.loss = counted > 0 ? total / (static_cast<double>(counted) * n_out) : 0.0;
  return out;
}

}  // namespace mingle::ref

#include "mingle/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mingle/common.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mingle::model {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

constexpr double kProbEps = 1e-7;

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

int thread_id() {
#ifdef _OPENMP
  return omp_get_thread_num();
#else
  return 0;
#endif
}

}  // namespace

void ModelConfig::validate() const {
  if (d < 1 || heads < 1 || d % heads != 0)
    throw DataError("hidden dim must be positive and divisible by heads");
  if (layers < 1 || layers > 4) throw DataError("layers must be in [1,4]");
  if (d1 < 1 || d2 < 1) throw DataError("embedding dims must be >= 1");
}

ModelParams ModelParams::init(const ModelConfig& cfg) {
  cfg.validate();
  ModelParams p;
  p.cfg = cfg;
  const int d = cfg.d;
  p.w_in = Mat(cfg.d1 + cfg.d2, d);
  p.b_in = Mat(1, d);
  p.w_e0 = Mat(d, d);
  p.b_e0 = Mat(1, d);
  p.mlp1_w1 = Mat(cfg.d2, d);
  p.mlp1_b1 = Mat(1, d);
  p.mlp1_w2 = Mat(d, d);
  p.mlp1_b2 = Mat(1, d);
  p.node_to_edge.resize(cfg.layers);
  p.edge_to_node.resize(cfg.layers);
  for (int l = 0; l < cfg.layers; ++l) {
    for (AttentionParams* ap : {&p.node_to_edge[l], &p.edge_to_node[l]}) {
      ap->wq = Mat(d, d);
      ap->wk = Mat(d, d);
      ap->wv = Mat(d, d);
      ap->wo = Mat(d, d);
      ap->bo = Mat(1, d);
    }
  }
  p.mlp2_w1 = Mat(2 * d, d);
  p.mlp2_b1 = Mat(1, d);
  p.mlp2_w2 = Mat(d, d);
  p.mlp2_b2 = Mat(1, d);
  p.cls_w1 = Mat(cfg.layers * d, d);
  p.cls_b1 = Mat(1, d);
  p.cls_w2 = Mat(d, cfg.n_outputs());
  p.cls_b2 = Mat(1, cfg.n_outputs());

  // Uniform fan-in initialization, one substream per tensor so the layout
  // ordering cannot change existing values.
  uint64_t ordinal = 0;
  for (auto& [name, mat] : p.tensors()) {
    std::mt19937_64 g(mix64(cfg.seed, 0x1A17 + ordinal++));
    bool is_bias = mat->rows == 1 && name.find('w') == std::string::npos;
    if (is_bias) continue;  // biases start at zero
    double bound = 1.0 / std::sqrt(static_cast<double>(mat->rows));
    fill_uniform(*mat, -bound, bound, g);
  }
  return p;
}

ModelParams ModelParams::zeros_like(const ModelParams& other) {
  ModelParams p = other;
  p.zero();
  return p;
}

std::vector<std::pair<std::string, Mat*>> ModelParams::tensors() {
  std::vector<std::pair<std::string, Mat*>> out;
  out.emplace_back("w_in", &w_in);
  out.emplace_back("b_in", &b_in);
  out.emplace_back("w_e0", &w_e0);
  out.emplace_back("b_e0", &b_e0);
  out.emplace_back("mlp1_w1", &mlp1_w1);
  out.emplace_back("mlp1_b1", &mlp1_b1);
  out.emplace_back("mlp1_w2", &mlp1_w2);
  out.emplace_back("mlp1_b2", &mlp1_b2);
  for (size_t l = 0; l < node_to_edge.size(); ++l) {
    std::string prefix = "layer" + std::to_string(l) + ".v2e.";
    out.emplace_back(prefix + "wq", &node_to_edge[l].wq);
    out.emplace_back(prefix + "wk", &node_to_edge[l].wk);
    out.emplace_back(prefix + "wv", &node_to_edge[l].wv);
    out.emplace_back(prefix + "wo", &node_to_edge[l].wo);
    out.emplace_back(prefix + "bo", &node_to_edge[l].bo);
  }
  for (size_t l = 0; l < edge_to_node.size(); ++l) {
    std::string prefix = "layer" + std::to_string(l) + ".e2v.";
    out.emplace_back(prefix + "wq", &edge_to_node[l].wq);
    out.emplace_back(prefix + "wk", &edge_to_node[l].wk);
    out.emplace_back(prefix + "wv", &edge_to_node[l].wv);
    out.emplace_back(prefix + "wo", &edge_to_node[l].wo);
    out.emplace_back(prefix + "bo", &edge_to_node[l].bo);
  }
  out.emplace_back("mlp2_w1", &mlp2_w1);
  out.emplace_back("mlp2_b1", &mlp2_b1);
  out.emplace_back("mlp2_w2", &mlp2_w2);
  out.emplace_back("mlp2_b2", &mlp2_b2);
  out.emplace_back("cls_w1", &cls_w1);
  out.emplace_back("cls_b1", &cls_b1);
  out.emplace_back("cls_w2", &cls_w2);
  out.emplace_back("cls_b2", &cls_b2);
  return out;
}

std::vector<std::pair<std::string, const Mat*>> ModelParams::tensors() const {
  auto mut = const_cast<ModelParams*>(this)->tensors();
  std::vector<std::pair<std::string, const Mat*>> out;
  out.reserve(mut.size());
  for (auto& [name, m] : mut) out.emplace_back(name, m);
  return out;
}

size_t ModelParams::n_scalars() const {
  size_t n = 0;
  for (auto& [name, m] : tensors()) n += m->size();
  return n;
}

std::vector<double> ModelParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(n_scalars());
  for (auto& [name, m] : tensors()) flat.insert(flat.end(), m->a.begin(), m->a.end());
  return flat;
}

void ModelParams::unflatten(const std::vector<double>& flat) {
  size_t pos = 0;
  for (auto& [name, m] : tensors()) {
    if (pos + m->size() > flat.size()) throw DataError("flattened parameter vector too short");
    std::copy(flat.begin() + pos, flat.begin() + pos + m->size(), m->a.begin());
    pos += m->size();
  }
  if (pos != flat.size()) throw DataError("flattened parameter vector size mismatch");
}

void ModelParams::zero() {
  for (auto& [name, m] : tensors()) m->zero();
}

bool ModelParams::finite() const {
  for (auto& [name, m] : tensors())
    if (!all_finite(*m)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Input assembly
// ---------------------------------------------------------------------------

Mat node_features_raw(const EmbeddingTable& structural, const EmbeddingTable& concepts,
                      const Hypergraph& h, const ModelConfig& cfg) {
  const int n = h.n_nodes();
  Mat x(n, cfg.d1 + cfg.d2);
  for (int v = 0; v < n; ++v) {
    const auto& s = structural.row(h.node_ids[v]);  // throws on missing key
    if (static_cast<int>(s.size()) != cfg.d1)
      throw DataError("structural table dim " + std::to_string(s.size()) + " != configured d1");
    for (int j = 0; j < cfg.d1; ++j) x(v, j) = s[j];
    if (cfg.use_concept_semantics) {
      const auto& c = concepts.row(h.node_ids[v]);
      if (static_cast<int>(c.size()) != cfg.d2)
        throw DataError("concept table dim " + std::to_string(c.size()) + " != configured d2");
      for (int j = 0; j < cfg.d2; ++j) x(v, cfg.d1 + j) = c[j];
    }
  }
  return x;
}

Mat init_node_features(const EmbeddingTable& structural, const EmbeddingTable& concepts,
                       const Hypergraph& h, const ModelParams& params) {
  Mat raw = node_features_raw(structural, concepts, h, params.cfg);
  Mat pre = matmul(raw, params.w_in);
  add_bias(pre, params.b_in);
  relu_inplace(pre);
  return pre;
}

Mat edge_semantic_rows(const EmbeddingTable& notes, const EmbeddingTable& concepts, const Hypergraph& h,
                       const ModelConfig& cfg) {
  Mat z(h.n_edges(), cfg.d2);
  for (int e = 0; e < h.n_edges(); ++e) {
    const Hyperedge& edge = h.edges[e];
    if (edge.kind == EdgeKind::visit) {
      const auto& row = notes.row(edge.visit_id);
      if (static_cast<int>(row.size()) != cfg.d2) throw DataError("note table dim != configured d2");
      for (int j = 0; j < cfg.d2; ++j) z(e, j) = row[j];
    } else if (cfg.use_concept_semantics) {
      const auto& row = concepts.row(h.node_ids[edge.members.at(0)]);
      if (static_cast<int>(row.size()) != cfg.d2) throw DataError("concept table dim != configured d2");
      for (int j = 0; j < cfg.d2; ++j) z(e, j) = row[j];
    }
  }
  return z;
}

Mat build_hyperedge_semantics(const EmbeddingTable& notes, const EmbeddingTable& concepts,
                              const Hypergraph& h, const ModelParams& params) {
  if (!params.cfg.use_note_semantics) return Mat(h.n_edges(), params.cfg.d);
  Mat z = edge_semantic_rows(notes, concepts, h, params.cfg);
  Mat h1 = matmul(z, params.mlp1_w1);
  add_bias(h1, params.mlp1_b1);
  relu_inplace(h1);
  Mat out = matmul(h1, params.mlp1_w2);
  add_bias(out, params.mlp1_b2);
  return out;
}

// ---------------------------------------------------------------------------
// Attention
// ---------------------------------------------------------------------------

namespace {

struct AttnTrace {
  Mat Q;  // targets x d (projected)
  Mat K, V;  // sources x d (projected)
  std::vector<std::vector<double>> alphas;  // per target: heads*members
  Mat concat;  // targets x d
  Mat pre;     // targets x d
};

// Softmax attention for one target over `members` source rows; fills the
// output slice and the per-head weights.
void attend_target(const double* q, const Mat& K, const Mat& V, const std::vector<int>& members,
                   int heads, int dh, double* out, double* alphas) {
  const int m = static_cast<int>(members.size());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<double> scores(m);
  for (int hd = 0; hd < heads; ++hd) {
    const int c0 = hd * dh;
    double mx = -1e300;
    for (int j = 0; j < m; ++j) {
      scores[j] = dot(q + c0, K.row(members[j]) + c0, dh) * scale;
      mx = std::max(mx, scores[j]);
    }
    double z = 0.0;
    for (int j = 0; j < m; ++j) {
      scores[j] = std::exp(scores[j] - mx);
      z += scores[j];
    }
    double* alpha = alphas + static_cast<size_t>(hd) * m;
    for (int j = 0; j < m; ++j) alpha[j] = scores[j] / z;
    for (int j = 0; j < m; ++j) {
      const double* vrow = V.row(members[j]) + c0;
      double a = alpha[j];
      for (int k = 0; k < dh; ++k) out[c0 + k] += a * vrow[k];
    }
  }
}

// Batched attention over all targets. `members_of(t)` lists source indices.
template <typename MembersFn>
AttnTrace attention_forward(const Mat& queries_in, const Mat& sources_in, int n_targets,
                            MembersFn&& members_of, const AttentionParams& p, int heads, Mat& out,
                            std::vector<std::vector<double>>* record) {
  const int d = p.wq.cols;
  const int dh = d / heads;
  AttnTrace tr;
  tr.Q = matmul(queries_in, p.wq);
  tr.K = matmul(sources_in, p.wk);
  tr.V = matmul(sources_in, p.wv);
  tr.alphas.resize(n_targets);
  tr.concat = Mat(n_targets, d);
  if (record) record->assign(n_targets, {});
#pragma omp parallel for schedule(static)
  for (int t = 0; t < n_targets; ++t) {
    const std::vector<int>& members = members_of(t);
    if (members.empty()) continue;
    tr.alphas[t].assign(static_cast<size_t>(heads) * members.size(), 0.0);
    attend_target(tr.Q.row(t), tr.K, tr.V, members, heads, dh, tr.concat.row(t), tr.alphas[t].data());
    if (record) {
      auto& rec = (*record)[t];
      rec.assign(members.size(), 0.0);
      for (int hd = 0; hd < heads; ++hd)
        for (size_t j = 0; j < members.size(); ++j) rec[j] += tr.alphas[t][hd * members.size() + j];
      for (double& r : rec) r /= heads;
    }
  }
  tr.pre = matmul(tr.concat, p.wo);
  add_bias(tr.pre, p.bo);
  out = tr.pre;
  relu_inplace(out);
  return tr;
}

struct AttnGrads {
  Mat d_sources;     // grad wrt source input rows
  Mat d_queries_in;  // grad wrt query input rows
};

// Backward through one attention application. d_out is the gradient at the
// post-relu output. Accumulates parameter grads into `gp`.
template <typename MembersFn>
AttnGrads attention_backward(const AttnTrace& tr, const Mat& queries_in, const Mat& sources_in,
                             int n_targets, MembersFn&& members_of, const AttentionParams& p,
                             AttentionParams& gp, int heads, const Mat& d_out) {
  const int d = p.wq.cols;
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Mat dpre = relu_backward(d_out, tr.pre);
  accumulate_tn(gp.wo, tr.concat, dpre);
  accumulate_colsum(gp.bo, dpre);
  Mat dconcat = matmul_nt(dpre, p.wo);  // dpre * wo^T

  Mat dQp(n_targets, d);
  const int nt = thread_count();
  std::vector<Mat> dK_tl(nt), dV_tl(nt);
  for (int b = 0; b < nt; ++b) {
    dK_tl[b] = Mat(sources_in.rows, d);
    dV_tl[b] = Mat(sources_in.rows, d);
  }

#pragma omp parallel for schedule(static)
  for (int t = 0; t < n_targets; ++t) {
    const std::vector<int>& members = members_of(t);
    if (members.empty()) continue;
    const int m = static_cast<int>(members.size());
    Mat& dK = dK_tl[thread_id()];
    Mat& dV = dV_tl[thread_id()];
    std::vector<double> dalpha(m), ds(m);
    for (int hd = 0; hd < heads; ++hd) {
      const int c0 = hd * dh;
      const double* do_h = dconcat.row(t) + c0;
      const double* alpha = tr.alphas[t].data() + static_cast<size_t>(hd) * m;
      double sdot = 0.0;
      for (int j = 0; j < m; ++j) {
        const double* vrow = tr.V.row(members[j]) + c0;
        dalpha[j] = dot(do_h, vrow, dh);
        sdot += alpha[j] * dalpha[j];
        double* dvrow = dV.row(members[j]) + c0;
        for (int k = 0; k < dh; ++k) dvrow[k] += alpha[j] * do_h[k];
      }
      const double* qrow = tr.Q.row(t) + c0;
      double* dqrow = dQp.row(t) + c0;
      for (int j = 0; j < m; ++j) {
        ds[j] = alpha[j] * (dalpha[j] - sdot) * scale;
        const double* krow = tr.K.row(members[j]) + c0;
        double* dkrow = dK.row(members[j]) + c0;
        for (int k = 0; k < dh; ++k) {
          dqrow[k] += ds[j] * krow[k];
          dkrow[k] += ds[j] * qrow[k];
        }
      }
    }
  }

  Mat dK(sources_in.rows, d), dV(sources_in.rows, d);
  for (int b = 0; b < nt; ++b) {
    axpy(dK, 1.0, dK_tl[b]);
    axpy(dV, 1.0, dV_tl[b]);
  }

  AttnGrads g;
  g.d_queries_in = matmul_nt(dQp, p.wq);
  accumulate_tn(gp.wq, queries_in, dQp);
  g.d_sources = matmul_nt(dK, p.wk);
  axpy(g.d_sources, 1.0, matmul_nt(dV, p.wv));
  accumulate_tn(gp.wk, sources_in, dK);
  accumulate_tn(gp.wv, sources_in, dV);
  return g;
}

struct Trace {
  Mat x0raw, x0pre;
  Mat zsem, h1pre, hsem;
  Mat e0mean;
  std::vector<AttnTrace> v2e, e2v;
  std::vector<Mat> mlp2_in, mlp2_h1pre;
  Mat cls_in, cls_h1pre, logits, probs;
  LayerState state;
};

Trace run_forward(const GraphBatch& batch, const ModelParams& params) {
  const Hypergraph& h = *batch.h;
  const ModelConfig& cfg = params.cfg;
  const int n = h.n_nodes();
  const int m = h.n_edges();
  const int d = cfg.d;
  const int L = cfg.layers;
  Trace tr;

  // Node initialization.
  tr.x0raw = Mat(n, cfg.d1 + cfg.d2);
  for (int v = 0; v < n; ++v) {
    for (int j = 0; j < cfg.d1; ++j) tr.x0raw(v, j) = batch.structural(v, j);
    if (cfg.use_concept_semantics)
      for (int j = 0; j < cfg.d2; ++j) tr.x0raw(v, cfg.d1 + j) = batch.concepts(v, j);
  }
  tr.x0pre = matmul(tr.x0raw, params.w_in);
  add_bias(tr.x0pre, params.b_in);
  Mat x0 = tr.x0pre;
  relu_inplace(x0);

  // Hyperedge semantics, shared across layers.
  if (cfg.use_note_semantics) {
    tr.zsem = Mat(m, cfg.d2);
    for (int e = 0; e < m; ++e) {
      const Hyperedge& edge = h.edges[e];
      if (edge.kind == EdgeKind::visit) {
        for (int j = 0; j < cfg.d2; ++j) tr.zsem(e, j) = batch.notes(e, j);
      } else if (cfg.use_concept_semantics) {
        int v = edge.members.at(0);
        for (int j = 0; j < cfg.d2; ++j) tr.zsem(e, j) = batch.concepts(v, j);
      }
    }
    tr.h1pre = matmul(tr.zsem, params.mlp1_w1);
    add_bias(tr.h1pre, params.mlp1_b1);
    Mat h1 = tr.h1pre;
    relu_inplace(h1);
    tr.hsem = matmul(h1, params.mlp1_w2);
    add_bias(tr.hsem, params.mlp1_b2);
  } else {
    tr.hsem = Mat(m, d);
  }

  // Edge state at layer 0: linear map of the mean member feature.
  tr.e0mean = Mat(m, d);
  for (int e = 0; e < m; ++e) {
    const auto& members = h.edges[e].members;
    if (members.empty()) throw DataError("hyperedge with no members: " + h.edges[e].edge_id);
    double inv = 1.0 / static_cast<double>(members.size());
    for (int v : members)
      for (int j = 0; j < d; ++j) tr.e0mean(e, j) += x0(v, j) * inv;
  }
  Mat e0 = matmul(tr.e0mean, params.w_e0);
  add_bias(e0, params.b_e0);

  tr.state.node_states.push_back(std::move(x0));
  tr.state.edge_states.push_back(std::move(e0));
  tr.state.attention.resize(L);
  tr.v2e.resize(L);
  tr.e2v.resize(L);
  tr.mlp2_in.resize(L);
  tr.mlp2_h1pre.resize(L);

  auto edge_members = [&](int e) -> const std::vector<int>& { return h.edges[e].members; };
  auto node_incident = [&](int v) -> const std::vector<int>& { return h.node_edges[v]; };

  for (int l = 0; l < L; ++l) {
    const Mat& x_prev = tr.state.node_states[l];
    const Mat& e_prev = tr.state.edge_states[l];

    Mat aggregated;
    tr.v2e[l] = attention_forward(e_prev, x_prev, m, edge_members, params.node_to_edge[l], cfg.heads,
                                  aggregated, &tr.state.attention[l]);

    Mat& m2in = tr.mlp2_in[l];
    m2in = Mat(m, 2 * d);
    for (int e = 0; e < m; ++e) {
      for (int j = 0; j < d; ++j) {
        m2in(e, j) = aggregated(e, j);
        m2in(e, d + j) = tr.hsem(e, j);
      }
    }
    tr.mlp2_h1pre[l] = matmul(m2in, params.mlp2_w1);
    add_bias(tr.mlp2_h1pre[l], params.mlp2_b1);
    Mat h1 = tr.mlp2_h1pre[l];
    relu_inplace(h1);
    Mat e_new = matmul(h1, params.mlp2_w2);
    add_bias(e_new, params.mlp2_b2);
    if (!all_finite(e_new)) throw NumericError("non-finite hyperedge state at layer " + std::to_string(l + 1));

    Mat x_new;
    tr.e2v[l] = attention_forward(x_prev, e_new, n, node_incident, params.edge_to_node[l], cfg.heads,
                                  x_new, nullptr);
    if (!all_finite(x_new)) throw NumericError("non-finite node state at layer " + std::to_string(l + 1));

    tr.state.edge_states.push_back(std::move(e_new));
    tr.state.node_states.push_back(std::move(x_new));
  }

  // Classifier over visit edges: concatenate edge states across layers.
  const int nv = h.n_visit_edges;
  const int n_out = cfg.n_outputs();
  tr.cls_in = Mat(nv, L * d);
  for (int e = 0; e < nv; ++e)
    for (int l = 0; l < L; ++l)
      for (int j = 0; j < d; ++j) tr.cls_in(e, l * d + j) = tr.state.edge_states[l + 1](e, j);
  tr.cls_h1pre = matmul(tr.cls_in, params.cls_w1);
  add_bias(tr.cls_h1pre, params.cls_b1);
  Mat ch = tr.cls_h1pre;
  relu_inplace(ch);
  tr.logits = matmul(ch, params.cls_w2);
  add_bias(tr.logits, params.cls_b2);
  tr.probs = Mat(nv, n_out);
  for (int e = 0; e < nv; ++e)
    for (int j = 0; j < n_out; ++j) tr.probs(e, j) = sigmoid(tr.logits(e, j));
  return tr;
}

}  // namespace

std::vector<double> attention_update(const Mat& members, const std::vector<double>& query,
                                     const AttentionParams& p, int heads,
                                     std::vector<double>* weights_out) {
  if (members.rows == 0) throw DataError("attention over an empty member set");
  const int d = p.wq.cols;
  if (members.cols != d || static_cast<int>(query.size()) != d)
    throw DataError("attention width mismatch");
  Mat q_in(1, d);
  for (int j = 0; j < d; ++j) q_in(0, j) = query[j];
  std::vector<int> idx(members.rows);
  for (int i = 0; i < members.rows; ++i) idx[i] = i;
  auto members_of = [&](int) -> const std::vector<int>& { return idx; };
  Mat out;
  std::vector<std::vector<double>> record;
  attention_forward(q_in, members, 1, members_of, p, heads, out, weights_out ? &record : nullptr);
  if (weights_out) *weights_out = record[0];
  return std::vector<double>(out.row(0), out.row(0) + d);
}

std::vector<double> fused_edge_update(const std::vector<double>& aggregated,
                                      const std::vector<double>& he_row, const ModelParams& params) {
  const int d = params.cfg.d;
  if (static_cast<int>(aggregated.size()) != d || static_cast<int>(he_row.size()) != d)
    throw DataError("fused_edge_update width mismatch: want " + std::to_string(d));
  Mat in(1, 2 * d);
  for (int j = 0; j < d; ++j) {
    in(0, j) = aggregated[j];
    in(0, d + j) = he_row[j];
  }
  Mat h1 = matmul(in, params.mlp2_w1);
  add_bias(h1, params.mlp2_b1);
  relu_inplace(h1);
  Mat out = matmul(h1, params.mlp2_w2);
  add_bias(out, params.mlp2_b2);
  return std::vector<double>(out.row(0), out.row(0) + d);
}

LayerState forward(const Hypergraph& h, const Mat& x0, const Mat& hsem, const ModelParams& params) {
  const ModelConfig& cfg = params.cfg;
  const int n = h.n_nodes();
  const int m = h.n_edges();
  const int d = cfg.d;
  if (x0.rows != n || x0.cols != d) throw DataError("x0 must be n_nodes x d");
  if (hsem.rows != m || hsem.cols != d) throw DataError("hsem must be n_edges x d");

  LayerState state;
  Mat e0mean(m, d);
  for (int e = 0; e < m; ++e) {
    const auto& members = h.edges[e].members;
    if (members.empty()) throw DataError("hyperedge with no members: " + h.edges[e].edge_id);
    double inv = 1.0 / static_cast<double>(members.size());
    for (int v : members)
      for (int j = 0; j < d; ++j) e0mean(e, j) += x0(v, j) * inv;
  }
  Mat e0 = matmul(e0mean, params.w_e0);
  add_bias(e0, params.b_e0);
  state.node_states.push_back(x0);
  state.edge_states.push_back(std::move(e0));
  state.attention.resize(cfg.layers);

  auto edge_members = [&](int e) -> const std::vector<int>& { return h.edges[e].members; };
  auto node_incident = [&](int v) -> const std::vector<int>& { return h.node_edges[v]; };

  for (int l = 0; l < cfg.layers; ++l) {
    const Mat& x_prev = state.node_states[l];
    const Mat& e_prev = state.edge_states[l];
    Mat aggregated;
    attention_forward(e_prev, x_prev, m, edge_members, params.node_to_edge[l], cfg.heads, aggregated,
                      &state.attention[l]);
    Mat m2in(m, 2 * d);
    for (int e = 0; e < m; ++e)
      for (int j = 0; j < d; ++j) {
        m2in(e, j) = aggregated(e, j);
        m2in(e, d + j) = hsem(e, j);
      }
    Mat h1 = matmul(m2in, params.mlp2_w1);
    add_bias(h1, params.mlp2_b1);
    relu_inplace(h1);
    Mat e_new = matmul(h1, params.mlp2_w2);
    add_bias(e_new, params.mlp2_b2);
    if (!all_finite(e_new)) throw NumericError("non-finite hyperedge state at layer " + std::to_string(l + 1));
    Mat x_new;
    attention_forward(x_prev, e_new, n, node_incident, params.edge_to_node[l], cfg.heads, x_new, nullptr);
    if (!all_finite(x_new)) throw NumericError("non-finite node state at layer " + std::to_string(l + 1));
    state.edge_states.push_back(std::move(e_new));
    state.node_states.push_back(std::move(x_new));
  }
  return state;
}

Mat classify(const Hypergraph& h, const LayerState& state, const ModelParams& params) {
  const ModelConfig& cfg = params.cfg;
  const int L = cfg.layers;
  const int d = cfg.d;
  const int nv = h.n_visit_edges;
  const int n_out = cfg.n_outputs();
  if (static_cast<int>(state.edge_states.size()) != L + 1) throw DataError("layer state depth mismatch");
  Mat cls_in(nv, L * d);
  for (int e = 0; e < nv; ++e)
    for (int l = 0; l < L; ++l)
      for (int j = 0; j < d; ++j) cls_in(e, l * d + j) = state.edge_states[l + 1](e, j);
  Mat h1 = matmul(cls_in, params.cls_w1);
  add_bias(h1, params.cls_b1);
  relu_inplace(h1);
  Mat logits = matmul(h1, params.cls_w2);
  add_bias(logits, params.cls_b2);
  Mat probs(nv, n_out);
  for (int e = 0; e < nv; ++e)
    for (int j = 0; j < n_out; ++j) probs(e, j) = sigmoid(logits(e, j));
  return probs;
}

double bce_loss(const Mat& probs, const Mat& labels, const std::vector<uint8_t>& mask) {
  if (!probs.same_shape(labels)) throw DataError("probs/labels shape mismatch");
  if (!mask.empty() && static_cast<int>(mask.size()) != probs.rows)
    throw DataError("loss mask length mismatch");
  double total = 0.0;
  long long n_rows = 0;
  for (int i = 0; i < probs.rows; ++i) {
    if (!mask.empty() && !mask[i]) continue;
    ++n_rows;
    for (int j = 0; j < probs.cols; ++j) {
      double p = std::clamp(probs(i, j), kProbEps, 1.0 - kProbEps);
      double y = labels(i, j);
      total += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    }
  }
  if (n_rows == 0) throw DataError("loss over an empty row set");
  return total / (static_cast<double>(n_rows) * probs.cols);
}

GraphBatch GraphBatch::assemble(const Hypergraph& h, const EmbeddingTable& structural,
                                const EmbeddingTable& concepts, const EmbeddingTable& notes,
                                const Dataset& ds, const ModelConfig& cfg) {
  GraphBatch b;
  b.h = &h;
  const int n = h.n_nodes();
  b.structural = Mat(n, cfg.d1);
  b.concepts = Mat(n, cfg.d2);
  for (int v = 0; v < n; ++v) {
    const auto& s = structural.row(h.node_ids[v]);
    const auto& c = concepts.row(h.node_ids[v]);
    if (static_cast<int>(s.size()) != cfg.d1) throw DataError("structural table dim != d1");
    if (static_cast<int>(c.size()) != cfg.d2) throw DataError("concept table dim != d2");
    for (int j = 0; j < cfg.d1; ++j) b.structural(v, j) = s[j];
    for (int j = 0; j < cfg.d2; ++j) b.concepts(v, j) = c[j];
  }
  const int nv = h.n_visit_edges;
  b.notes = Mat(nv, cfg.d2);
  b.labels = Mat(nv, cfg.n_outputs());
  for (int e = 0; e < nv; ++e) {
    const std::string& vid = h.edges[e].visit_id;
    const auto& note_row = notes.row(vid);
    if (static_cast<int>(note_row.size()) != cfg.d2) throw DataError("note table dim != d2");
    for (int j = 0; j < cfg.d2; ++j) b.notes(e, j) = note_row[j];
    auto it = ds.visit_index.find(vid);
    if (it == ds.visit_index.end()) throw DataError("hypergraph visit missing from dataset: " + vid);
    const auto& label = ds.visits[it->second].label;
    if (static_cast<int>(label.size()) != cfg.n_outputs())
      throw DataError("label arity does not match task for visit " + vid);
    for (int j = 0; j < cfg.n_outputs(); ++j) b.labels(e, j) = label[j];
  }
  return b;
}

double forward_backward(const GraphBatch& batch, const ModelParams& params, ModelParams& grads,
                        Mat* probs_out, LayerState* state_out) {
  const Hypergraph& h = *batch.h;
  const ModelConfig& cfg = params.cfg;
  const int n = h.n_nodes();
  const int m = h.n_edges();
  const int d = cfg.d;
  const int L = cfg.layers;
  const int nv = h.n_visit_edges;
  const int n_out = cfg.n_outputs();

  Trace tr = run_forward(batch, params);
  double loss = bce_loss(tr.probs, batch.labels, batch.loss_mask);

  grads.zero();

  // Classifier backward. Clamped probabilities contribute zero gradient.
  long long n_rows = 0;
  if (batch.loss_mask.empty()) {
    n_rows = nv;
  } else {
    for (uint8_t b : batch.loss_mask) n_rows += b ? 1 : 0;
  }
  const double inv_norm = 1.0 / (static_cast<double>(n_rows) * n_out);
  Mat dlogits(nv, n_out);
  for (int e = 0; e < nv; ++e) {
    if (!batch.loss_mask.empty() && !batch.loss_mask[e]) continue;
    for (int j = 0; j < n_out; ++j) {
      double p = tr.probs(e, j);
      if (p <= kProbEps || p >= 1.0 - kProbEps) continue;
      dlogits(e, j) = (p - batch.labels(e, j)) * inv_norm;
    }
  }

  Mat cls_h1 = tr.cls_h1pre;
  relu_inplace(cls_h1);
  accumulate_tn(grads.cls_w2, cls_h1, dlogits);
  accumulate_colsum(grads.cls_b2, dlogits);
  Mat dch = matmul_nt(dlogits, params.cls_w2);
  Mat dch_pre = relu_backward(dch, tr.cls_h1pre);
  accumulate_tn(grads.cls_w1, tr.cls_in, dch_pre);
  accumulate_colsum(grads.cls_b1, dch_pre);
  Mat dcls_in = matmul_nt(dch_pre, params.cls_w1);

  // Per-layer edge-state gradients from the classifier concat.
  std::vector<Mat> dE_cls(L + 1);
  for (int l = 1; l <= L; ++l) {
    dE_cls[l] = Mat(m, d);
    for (int e = 0; e < nv; ++e)
      for (int j = 0; j < d; ++j) dE_cls[l](e, j) = dcls_in(e, (l - 1) * d + j);
  }

  auto edge_members = [&](int e) -> const std::vector<int>& { return h.edges[e].members; };
  auto node_incident = [&](int v) -> const std::vector<int>& { return h.node_edges[v]; };

  Mat dX_cur(n, d);      // grad wrt X_l entering iteration l (zero at l = L)
  Mat dE_carry(m, d);    // grad wrt E_l from layer l+1's queries
  Mat dH(m, d);          // accumulated grad wrt the shared semantics H

  for (int l = L - 1; l >= 0; --l) {
    const Mat& x_prev = tr.state.node_states[l];
    const Mat& e_prev = tr.state.edge_states[l];
    const Mat& e_cur = tr.state.edge_states[l + 1];

    // edge->node attention of this layer (targets: nodes).
    AttnGrads ge2v = attention_backward(tr.e2v[l], x_prev, e_cur, n, node_incident,
                                        params.edge_to_node[l], grads.edge_to_node[l], cfg.heads,
                                        dX_cur);

    Mat dE_total = std::move(ge2v.d_sources);
    axpy(dE_total, 1.0, dE_cls[l + 1]);
    axpy(dE_total, 1.0, dE_carry);

    // MLP2 backward: E_l = relu(m2in * w1 + b1) * w2 + b2.
    Mat h1 = tr.mlp2_h1pre[l];
    relu_inplace(h1);
    accumulate_tn(grads.mlp2_w2, h1, dE_total);
    accumulate_colsum(grads.mlp2_b2, dE_total);
    Mat dh1 = matmul_nt(dE_total, params.mlp2_w2);
    Mat dh1pre = relu_backward(dh1, tr.mlp2_h1pre[l]);
    accumulate_tn(grads.mlp2_w1, tr.mlp2_in[l], dh1pre);
    accumulate_colsum(grads.mlp2_b1, dh1pre);
    Mat dm2in = matmul_nt(dh1pre, params.mlp2_w1);

    Mat dA(m, d);
    for (int e = 0; e < m; ++e)
      for (int j = 0; j < d; ++j) {
        dA(e, j) = dm2in(e, j);
        dH(e, j) += dm2in(e, d + j);
      }

    // node->edge attention of this layer (targets: edges).
    AttnGrads gv2e = attention_backward(tr.v2e[l], e_prev, x_prev, m, edge_members,
                                        params.node_to_edge[l], grads.node_to_edge[l], cfg.heads, dA);

    dX_cur = std::move(gv2e.d_sources);
    axpy(dX_cur, 1.0, ge2v.d_queries_in);
    dE_carry = std::move(gv2e.d_queries_in);
  }

  // E0 linear head: E0 = e0mean * w_e0 + b_e0.
  accumulate_tn(grads.w_e0, tr.e0mean, dE_carry);
  accumulate_colsum(grads.b_e0, dE_carry);
  Mat de0mean = matmul_nt(dE_carry, params.w_e0);
  Mat dX0 = std::move(dX_cur);
  for (int e = 0; e < m; ++e) {
    const auto& members = h.edges[e].members;
    double inv = 1.0 / static_cast<double>(members.size());
    const double* src = de0mean.row(e);
    for (int v : members) {
      double* dst = dX0.row(v);
      for (int j = 0; j < d; ++j) dst[j] += src[j] * inv;
    }
  }

  // Input projection backward.
  Mat dx0pre = relu_backward(dX0, tr.x0pre);
  accumulate_tn(grads.w_in, tr.x0raw, dx0pre);
  accumulate_colsum(grads.b_in, dx0pre);

  // Semantics MLP backward (H is an all-zeros constant under the ablation).
  if (cfg.use_note_semantics) {
    Mat h1 = tr.h1pre;
    relu_inplace(h1);
    accumulate_tn(grads.mlp1_w2, h1, dH);
    accumulate_colsum(grads.mlp1_b2, dH);
    Mat dh1 = matmul_nt(dH, params.mlp1_w2);
    Mat dh1pre = relu_backward(dh1, tr.h1pre);
    accumulate_tn(grads.mlp1_w1, tr.zsem, dh1pre);
    accumulate_colsum(grads.mlp1_b1, dh1pre);
  }

  if (!grads.finite()) throw NumericError("non-finite gradient");

  if (probs_out) *probs_out = std::move(tr.probs);
  if (state_out) *state_out = std::move(tr.state);
  return loss;
}

double loss_only(const GraphBatch& batch, const ModelParams& params, Mat* probs_out,
                 LayerState* state_out) {
  Trace tr = run_forward(batch, params);
  double loss = bce_loss(tr.probs, batch.labels, batch.loss_mask);
  if (probs_out) *probs_out = std::move(tr.probs);
  if (state_out) *state_out = std::move(tr.state);
  return loss;
}

double gradient_check(const GraphBatch& batch, const ModelParams& params, double eps,
                      int max_entries_per_tensor, uint64_t sample_seed) {
  ModelParams grads = ModelParams::zeros_like(params);
  forward_backward(batch, params, grads);

  ModelParams work = params;
  auto work_tensors = work.tensors();
  auto grad_tensors = grads.tensors();

  double max_rel = 0.0;
  for (size_t t = 0; t < work_tensors.size(); ++t) {
    Mat* wm = work_tensors[t].second;
    const Mat* gm = grad_tensors[t].second;
    std::vector<size_t> idx;
    if (static_cast<int>(wm->size()) <= max_entries_per_tensor) {
      idx.resize(wm->size());
      for (size_t i = 0; i < wm->size(); ++i) idx[i] = i;
    } else {
      std::mt19937_64 g(mix64(sample_seed, 0xF00D + t));
      for (int i = 0; i < max_entries_per_tensor; ++i) idx.push_back(g() % wm->size());
    }
    for (size_t i : idx) {
      double orig = wm->a[i];
      wm->a[i] = orig + eps;
      double lp = loss_only(batch, work);
      wm->a[i] = orig - eps;
      double lm = loss_only(batch, work);
      wm->a[i] = orig;
      double fd = (lp - lm) / (2.0 * eps);
      double an = gm->a[i];
      if (!std::isfinite(fd) || !std::isfinite(an)) throw NumericError("non-finite gradient check value");
      double rel = std::abs(fd - an) / std::max(std::abs(fd) + std::abs(an), 1e-6);
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

// ---------------------------------------------------------------------------
// Checkpoint IO
// ---------------------------------------------------------------------------

void ModelParams::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out << "mingle-checkpoint v1\n";
  out << "d " << cfg.d << "\nlayers " << cfg.layers << "\nheads " << cfg.heads << "\nd1 " << cfg.d1
      << "\nd2 " << cfg.d2 << "\ntask " << (cfg.task == TaskKind::binary ? "binary" : "multilabel-25")
      << "\nuse_concept_semantics " << (cfg.use_concept_semantics ? 1 : 0) << "\nuse_note_semantics "
      << (cfg.use_note_semantics ? 1 : 0) << "\nseed " << cfg.seed << "\n";
  char buf[32];
  for (const auto& [name, mat] : tensors()) {
    out << "tensor " << name << ' ' << mat->rows << ' ' << mat->cols << '\n';
    for (int i = 0; i < mat->rows; ++i) {
      for (int j = 0; j < mat->cols; ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g", (*mat)(i, j));
        out << (j ? " " : "") << buf;
      }
      out << '\n';
    }
  }
  out << "end\n";
}

ModelParams ModelParams::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "mingle-checkpoint v1")
    throw DataError("bad checkpoint header in " + path);

  ModelConfig cfg;
  auto read_kv = [&](const std::string& key) -> std::string {
    if (!std::getline(in, line)) throw DataError("truncated checkpoint: " + path);
    if (line.rfind(key + " ", 0) != 0) throw DataError("expected '" + key + "' in checkpoint " + path);
    return line.substr(key.size() + 1);
  };
  cfg.d = std::stoi(read_kv("d"));
  cfg.layers = std::stoi(read_kv("layers"));
  cfg.heads = std::stoi(read_kv("heads"));
  cfg.d1 = std::stoi(read_kv("d1"));
  cfg.d2 = std::stoi(read_kv("d2"));
  cfg.task = read_kv("task") == "binary" ? TaskKind::binary : TaskKind::multilabel25;
  cfg.use_concept_semantics = read_kv("use_concept_semantics") == "1";
  cfg.use_note_semantics = read_kv("use_note_semantics") == "1";
  cfg.seed = std::stoull(read_kv("seed"));

  ModelParams p = ModelParams::init(cfg);
  for (auto& [name, mat] : p.tensors()) {
    if (!std::getline(in, line)) throw DataError("truncated checkpoint: " + path);
    std::istringstream hdr(line);
    std::string tag, got_name;
    int rows = 0, cols = 0;
    hdr >> tag >> got_name >> rows >> cols;
    if (tag != "tensor" || got_name != name || rows != mat->rows || cols != mat->cols)
      throw DataError("checkpoint tensor mismatch at " + name + " in " + path);
    for (int i = 0; i < rows; ++i) {
      if (!std::getline(in, line)) throw DataError("truncated checkpoint: " + path);
      std::istringstream row(line);
      for (int j = 0; j < cols; ++j)
        if (!(row >> (*mat)(i, j))) throw DataError("bad tensor row in checkpoint " + path);
    }
  }
  if (!std::getline(in, line) || line != "end") throw DataError("missing checkpoint trailer in " + path);
  return p;
}

}  // namespace mingle::model

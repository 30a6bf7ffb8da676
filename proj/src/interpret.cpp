#include "mingle/interpret.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "mingle/common.hpp"

namespace mingle::interpret {

NodeImportanceReport node_importance(const model::LayerState& state, const Hypergraph& h,
                                     const Dataset& ds, const std::string& visit_id, int layer,
                                     const std::string& variant) {
  const int L = static_cast<int>(state.attention.size());
  if (L == 0) throw DataError("layer state has no attention records");
  if (layer < 0 || layer > L) throw DataError("layer out of range: " + std::to_string(layer));
  int e = h.visit_edge_of(visit_id);  // throws on unknown visit
  const auto& members = h.edges[e].members;

  std::vector<double> scores(members.size(), 0.0);
  if (layer == 0) {
    for (int l = 0; l < L; ++l) {
      const auto& row = state.attention[l][e];
      for (size_t j = 0; j < members.size(); ++j) scores[j] += row[j] / L;
    }
  } else {
    scores = state.attention[layer - 1][e];
  }

  NodeImportanceReport report;
  report.visit_id = visit_id;
  report.layer = layer;
  report.variant = variant;
  for (size_t j = 0; j < members.size(); ++j) {
    const std::string& cid = h.node_ids[members[j]];
    auto it = ds.code_index.find(cid);
    report.ranked.push_back({cid, it == ds.code_index.end() ? "" : ds.codes[it->second].concept_name,
                             scores[j]});
  }
  std::sort(report.ranked.begin(), report.ranked.end(), [](const RankedCode& a, const RankedCode& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.code_id < b.code_id;
  });
  return report;
}

VariantOverlap compare_variants(const NodeImportanceReport& a, const NodeImportanceReport& b, int k) {
  VariantOverlap out;
  out.k = std::max(0, std::min({k, static_cast<int>(a.ranked.size()), static_cast<int>(b.ranked.size())}));
  std::set<std::string> top_a, top_b;
  for (int i = 0; i < out.k; ++i) {
    top_a.insert(a.ranked[i].code_id);
    top_b.insert(b.ranked[i].code_id);
  }
  for (const auto& cid : top_a)
    (top_b.count(cid) ? out.shared : out.only_first).push_back(cid);
  for (const auto& cid : top_b)
    if (!top_a.count(cid)) out.only_second.push_back(cid);
  return out;
}

std::string format_report(const NodeImportanceReport& report, const std::string& note_text) {
  std::ostringstream out;
  out << "visit " << report.visit_id;
  if (!report.variant.empty()) out << " [" << report.variant << "]";
  if (report.layer == 0)
    out << " (attention: mean over layers)";
  else
    out << " (attention: layer " << report.layer << ")";
  out << "\n";
  char buf[64];
  for (size_t i = 0; i < report.ranked.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "  %2zu. %-12s %.6f  ", i + 1, report.ranked[i].code_id.c_str(),
                  report.ranked[i].score);
    out << buf << report.ranked[i].concept_name << "\n";
  }
  if (!note_text.empty()) {
    out << "  note:\n";
    std::istringstream lines(note_text);
    std::string line;
    while (std::getline(lines, line)) out << "    " << line << "\n";
  }
  return out.str();
}

}  // namespace mingle::interpret

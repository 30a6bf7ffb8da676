#include "mingle/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mingle/common.hpp"

namespace mingle::metrics {

namespace {

void check_aligned(const Mat& probs, const Mat& labels) {
  if (probs.empty() || labels.empty()) throw DataError("metrics over empty inputs");
  if (!probs.same_shape(labels)) throw DataError("probs/labels shape mismatch");
}

// Midrank AUROC for one label column; returns false when single-class.
bool auroc_column(const Mat& probs, const Mat& labels, int col, double* out) {
  const int n = probs.rows;
  long long n_pos = 0;
  for (int i = 0; i < n; ++i) n_pos += labels(i, col) > 0.5 ? 1 : 0;
  long long n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return false;

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return probs(a, col) < probs(b, col); });

  double pos_rank_sum = 0.0;
  int i = 0;
  while (i < n) {
    int j = i;
    while (j < n && probs(order[j], col) == probs(order[i], col)) ++j;
    double midrank = 0.5 * (i + 1 + j);  // ranks are 1-based
    for (int k = i; k < j; ++k)
      if (labels(order[k], col) > 0.5) pos_rank_sum += midrank;
    i = j;
  }
  double u = pos_rank_sum - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
  *out = u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
  return true;
}

// Average precision for one label column; returns false with no positives.
// Ties are broken by original index so the value is deterministic.
bool aupr_column(const Mat& probs, const Mat& labels, int col, double* out) {
  const int n = probs.rows;
  long long n_pos = 0;
  for (int i = 0; i < n; ++i) n_pos += labels(i, col) > 0.5 ? 1 : 0;
  if (n_pos == 0) return false;

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return probs(a, col) > probs(b, col); });

  double ap = 0.0;
  long long tp = 0;
  for (int i = 0; i < n; ++i) {
    if (labels(order[i], col) > 0.5) {
      ++tp;
      ap += static_cast<double>(tp) / (i + 1);
    }
  }
  *out = ap / static_cast<double>(n_pos);
  return true;
}

double f1_from_counts(long long tp, long long fp, long long fn) {
  long long denom = 2 * tp + fp + fn;
  if (denom == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

// Regularized incomplete beta I_x(a,b) via the standard continued fraction.
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 200;
  constexpr double kEps = 3e-14;
  constexpr double kFpMin = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                 b * std::log(1.0 - x);
  double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

std::string fmt(double v, const char* spec = "%.6f") {
  char buf[48];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace

double accuracy(const Mat& probs, const Mat& labels, double threshold) {
  check_aligned(probs, labels);
  long long correct = 0;
  for (int i = 0; i < probs.rows; ++i)
    for (int j = 0; j < probs.cols; ++j) {
      bool pred = probs(i, j) >= threshold;  // ties count as positive
      bool truth = labels(i, j) > 0.5;
      correct += pred == truth ? 1 : 0;
    }
  return static_cast<double>(correct) / (static_cast<double>(probs.rows) * probs.cols);
}

double auroc(const Mat& probs, const Mat& labels, int* skipped_labels) {
  check_aligned(probs, labels);
  double sum = 0.0;
  int valid = 0, skipped = 0;
  for (int col = 0; col < probs.cols; ++col) {
    double v;
    if (auroc_column(probs, labels, col, &v)) {
      sum += v;
      ++valid;
    } else {
      ++skipped;
    }
  }
  if (skipped_labels) *skipped_labels = skipped;
  if (valid == 0) throw DataError("AUROC undefined: every label is single-class");
  return sum / valid;
}

double aupr(const Mat& probs, const Mat& labels, int* skipped_labels) {
  check_aligned(probs, labels);
  double sum = 0.0;
  int valid = 0, skipped = 0;
  for (int col = 0; col < probs.cols; ++col) {
    double v;
    if (aupr_column(probs, labels, col, &v)) {
      sum += v;
      ++valid;
    } else {
      ++skipped;
    }
  }
  if (skipped_labels) *skipped_labels = skipped;
  if (valid == 0) throw DataError("AUPR undefined: no label has a positive");
  return sum / valid;
}

double macro_f1(const Mat& probs, const Mat& labels, double threshold) {
  check_aligned(probs, labels);
  if (probs.cols == 1) {
    long long tp = 0, fp = 0, fn = 0, tn = 0;
    for (int i = 0; i < probs.rows; ++i) {
      bool pred = probs(i, 0) >= threshold;
      bool truth = labels(i, 0) > 0.5;
      if (pred && truth) ++tp;
      else if (pred && !truth) ++fp;
      else if (!pred && truth) ++fn;
      else ++tn;
    }
    double f1_pos = f1_from_counts(tp, fp, fn);
    double f1_neg = f1_from_counts(tn, fn, fp);
    return 0.5 * (f1_pos + f1_neg);
  }
  double sum = 0.0;
  for (int col = 0; col < probs.cols; ++col) {
    long long tp = 0, fp = 0, fn = 0;
    for (int i = 0; i < probs.rows; ++i) {
      bool pred = probs(i, col) >= threshold;
      bool truth = labels(i, col) > 0.5;
      if (pred && truth) ++tp;
      else if (pred && !truth) ++fp;
      else if (!pred && truth) ++fn;
    }
    sum += f1_from_counts(tp, fp, fn);
  }
  return sum / probs.cols;
}

MetricSet compute_all(const Mat& probs, const Mat& labels) {
  MetricSet m;
  m.acc = accuracy(probs, labels);
  m.auroc = auroc(probs, labels);
  m.aupr = aupr(probs, labels);
  m.macro_f1 = macro_f1(probs, labels);
  return m;
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {"acc", "auroc", "aupr", "macro_f1"};
  return names;
}

double metric_value(const MetricSet& m, const std::string& name) {
  if (name == "acc") return m.acc;
  if (name == "auroc") return m.auroc;
  if (name == "aupr") return m.aupr;
  if (name == "macro_f1") return m.macro_f1;
  throw DataError("unknown metric: " + name);
}

double welch_p_value(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw DataError("Welch test needs >= 2 samples per side");
  auto mean_var = [](const std::vector<double>& x) {
    double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x.size() - 1);
    return std::make_pair(mean, var);
  };
  auto [ma, va] = mean_var(a);
  auto [mb, vb] = mean_var(b);
  double sa = va / a.size(), sb = vb / b.size();
  if (sa + sb <= 0.0) return ma == mb ? 1.0 : 0.0;
  double t = (ma - mb) / std::sqrt(sa + sb);
  double df = (sa + sb) * (sa + sb) /
              (sa * sa / (a.size() - 1) + sb * sb / (b.size() - 1));
  double x = df / (df + t * t);
  return incomplete_beta(df / 2.0, 0.5, x);
}

MetricsReport aggregate(const std::map<std::string, std::vector<MetricSet>>& runs_by_variant,
                        const std::string& reference_variant) {
  MetricsReport report;
  auto ref_it = runs_by_variant.find(reference_variant);
  const std::vector<MetricSet>* ref_runs = ref_it == runs_by_variant.end() ? nullptr : &ref_it->second;

  // Reference variant first, then the rest in map (sorted) order.
  std::vector<std::string> order;
  if (ref_runs) order.push_back(reference_variant);
  for (const auto& [variant, runs] : runs_by_variant)
    if (variant != reference_variant) order.push_back(variant);

  for (const std::string& variant : order) {
    const auto& runs = runs_by_variant.at(variant);
    if (runs.empty()) continue;
    VariantStats stats;
    stats.variant = variant;
    stats.n_runs = static_cast<int>(runs.size());
    for (const std::string& name : metric_names()) {
      std::vector<double> values;
      values.reserve(runs.size());
      for (const auto& r : runs) values.push_back(metric_value(r, name));
      bool all_equal = std::all_of(values.begin(), values.end(),
                                   [&](double v) { return v == values.front(); });
      double mean = all_equal ? values.front()
                              : std::accumulate(values.begin(), values.end(), 0.0) / values.size();
      double sd = 0.0;
      if (values.size() >= 2 && !all_equal) {
        for (double v : values) sd += (v - mean) * (v - mean);
        sd = std::sqrt(sd / (values.size() - 1));
      }
      stats.mean[name] = mean;
      stats.stddev[name] = sd;

      if (variant != reference_variant && ref_runs) {
        if (runs.size() == ref_runs->size() && runs.size() >= 2) {
          std::vector<double> ref_values;
          for (const auto& r : *ref_runs) ref_values.push_back(metric_value(r, name));
          stats.significant_vs_full[name] = welch_p_value(values, ref_values) < 0.05;
        }
      }
    }
    if (variant != reference_variant && ref_runs && runs.size() != ref_runs->size())
      report.warnings.push_back("run count mismatch for variant '" + variant +
                                "'; significance flags omitted");
    if (runs.size() < 2)
      report.warnings.push_back("variant '" + variant + "' has a single run; std and flags omitted");
    report.rows.push_back(std::move(stats));
  }
  return report;
}

std::string MetricsReport::to_table() const {
  auto pad = [](const std::string& s, size_t w) {
    std::string p = s;
    if (p.size() < w)
      p.append(w - p.size(), ' ');
    else
      p.push_back(' ');
    return p;
  };
  std::ostringstream out;
  out << "# macro-F1 convention: binary = mean of the two class F1 scores; multilabel = mean of\n"
         "# per-label positive-class F1. Threshold 0.5; a probability of exactly 0.5 counts as a\n"
         "# positive prediction. Zero-denominator F1 is 0. '*' marks p < 0.05 (Welch) vs full.\n";
  out << pad("variant", 22) << pad("n", 3) << pad("ACC", 19) << pad("AUROC", 19) << pad("AUPR", 19)
      << "Macro-F1\n";
  for (const auto& row : rows) {
    out << pad(row.variant, 22) << pad(std::to_string(row.n_runs), 3);
    for (const std::string& name : metric_names()) {
      std::string cell = fmt(row.mean.at(name), "%.4f") + " +- " + fmt(row.stddev.at(name), "%.4f");
      auto it = row.significant_vs_full.find(name);
      if (it != row.significant_vs_full.end() && it->second) cell += "*";
      out << (name == "macro_f1" ? cell : pad(cell, 19));
    }
    out << "\n";
  }
  for (const auto& w : warnings) out << "# warning: " << w << "\n";
  return out.str();
}

void MetricsReport::save_tsv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << "variant\tmetric\tmean\tstd\tsignificant\n";
  for (const auto& row : rows) {
    for (const std::string& name : metric_names()) {
      auto it = row.significant_vs_full.find(name);
      int flag = it != row.significant_vs_full.end() && it->second ? 1 : 0;
      out << row.variant << '\t' << name << '\t' << fmt(row.mean.at(name)) << '\t'
          << fmt(row.stddev.at(name)) << '\t' << flag << '\n';
    }
  }
}

}  // namespace mingle::metrics

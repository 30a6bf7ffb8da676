#pragma once

#include <map>
#include <string>
#include <vector>

#include "mingle/mat.hpp"

namespace mingle::metrics {

// All four metrics operate on aligned (n x k) probability and 0/1 label
// matrices; k = 1 for the binary task, 25 for multilabel. Threshold 0.5 with
// ties predicted positive. Multilabel AUROC/AUPR average over labels that have
// both classes / at least one positive; skipped labels are counted.

double accuracy(const Mat& probs, const Mat& labels, double threshold = 0.5);

// Rank-based (midrank) AUROC. Throws when no label has both classes.
double auroc(const Mat& probs, const Mat& labels, int* skipped_labels = nullptr);

// Average-precision AUPR. Throws when no label has a positive.
double aupr(const Mat& probs, const Mat& labels, int* skipped_labels = nullptr);

// Binary: unweighted mean of the two per-class F1 scores. Multilabel: mean of
// the 25 positive-class F1 scores. Zero denominators give F1 = 0.
double macro_f1(const Mat& probs, const Mat& labels, double threshold = 0.5);

struct MetricSet {
  double acc = 0.0;
  double auroc = 0.0;
  double aupr = 0.0;
  double macro_f1 = 0.0;
};

MetricSet compute_all(const Mat& probs, const Mat& labels);

const std::vector<std::string>& metric_names();
double metric_value(const MetricSet& m, const std::string& name);

// Two-sided Welch t-test p-value for unequal-variance samples.
double welch_p_value(const std::vector<double>& a, const std::vector<double>& b);

struct VariantStats {
  std::string variant;
  int n_runs = 0;
  std::map<std::string, double> mean;
  std::map<std::string, double> stddev;            // sample std (n-1)
  std::map<std::string, bool> significant_vs_full; // p < 0.05, comparators only
};

struct MetricsReport {
  std::vector<VariantStats> rows;
  std::vector<std::string> warnings;

  std::string to_table() const;  // aligned human-readable table
  void save_tsv(const std::string& path) const;  // variant metric mean std flag
};

// Aggregates per-run metric sets by variant: mean +- sample std, and a
// significance flag per metric from a two-sided Welch test against the
// "full" variant (only for comparators with matching run counts).
MetricsReport aggregate(const std::map<std::string, std::vector<MetricSet>>& runs_by_variant,
                        const std::string& reference_variant = "full");

}  // namespace mingle::metrics

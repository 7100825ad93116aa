#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace milpath {

struct ScoredCase {
    std::string id;
    double score = 0.0;
    int label = 0;
};

/// Mann-Whitney AUC with midranks: P(s+ > s-) + P(s+ = s-)/2.
/// Throws DataError("AUC undefined ...") unless both classes are present.
double roc_auc(std::span<const ScoredCase> cases);

/// Area under the empirical ROC curve by the trapezoid rule, sweeping the
/// threshold over the distinct scores. Equals roc_auc(); kept as a second
/// route for cross-checks.
double roc_auc_trapezoid(std::span<const ScoredCase> cases);

struct ConfusionMetrics {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double specificity = 0.0;
    double recall = 0.0;
    double precision = 0.0;
    double f_score = 0.0;  // F1
    double accuracy = 0.0;
    /// Set when any ratio was 0/0 and therefore reported as 0.
    bool degenerate = false;
};

/// Predicts positive iff score >= threshold. Label 1 is the positive class.
ConfusionMetrics confusion_metrics(std::span<const ScoredCase> cases, double threshold = 0.5);

struct MetricStats {
    double mean = 0.0;
    double std = 0.0;  // population (divide by n)
};

/// Throws DataError on empty input.
MetricStats aggregate(std::span<const double> values);

inline constexpr std::array<const char*, 6> kMetricNames = {"roc_auc",   "f_score",   "specificity",
                                                            "recall",    "precision", "accuracy"};

struct FoldRow {
    int fold = 0;
    std::size_t cases = 0;
    std::vector<double> values;  // parallel to MetricsReport::metric_names
    bool degenerate = false;
};

struct MetricsReport {
    std::vector<std::string> metric_names;
    std::vector<FoldRow> folds;
    std::vector<MetricStats> summary;  // parallel to metric_names
    std::vector<std::pair<std::string, std::string>> provenance;

    /// Throws ConfigError for an unknown metric.
    const MetricStats& stats(const std::string& metric) const;
};

/// One fold row from scored cases (AUC, then confusion metrics at threshold).
FoldRow score_fold(int fold, std::span<const ScoredCase> cases, double threshold = 0.5);

/// Standard metric set, summary recomputed from the rows.
MetricsReport make_report(std::vector<FoldRow> rows, std::vector<std::pair<std::string, std::string>> provenance);

std::string to_json(const MetricsReport& report);
/// One line per fold plus "mean" and "std" rows.
std::string to_csv(const MetricsReport& report);
MetricsReport report_from_json(const std::string& text);

/// Comparison table: one row per (label, report), mean and std per metric.
/// Throws ConfigError on an empty list or reports with different metric sets.
std::string comparison_csv(const std::vector<std::pair<std::string, MetricsReport>>& reports);

}  // namespace milpath

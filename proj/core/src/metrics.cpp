#include "milpath/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "milpath/error.hpp"

namespace milpath {
namespace {

std::pair<std::size_t, std::size_t> class_counts(std::span<const ScoredCase> cases) {
    std::size_t pos = 0, neg = 0;
    for (const auto& c : cases) {
        if (c.label == 1) {
            ++pos;
        } else if (c.label == 0) {
            ++neg;
        } else {
            throw DataError("case '" + c.id + "' has label " + std::to_string(c.label) + ", expected 0 or 1");
        }
        if (!std::isfinite(c.score)) {
            throw DataError("case '" + c.id + "' has a non-finite score");
        }
    }
    return {pos, neg};
}

double ratio(std::size_t num, std::size_t den, bool& degenerate) {
    if (den == 0) {
        degenerate = true;
        return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

double roc_auc(std::span<const ScoredCase> cases) {
    const auto [pos, neg] = class_counts(cases);
    if (pos == 0 || neg == 0) {
        throw DataError("AUC undefined: both classes must be present");
    }
    std::vector<std::size_t> order(cases.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return cases[a].score < cases[b].score; });

    // Sum of (1-based) midranks of the positives.
    double positive_rank_sum = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && cases[order[j]].score == cases[order[i]].score) {
            ++j;
        }
        const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t t = i; t < j; ++t) {
            if (cases[order[t]].label == 1) {
                positive_rank_sum += midrank;
            }
        }
        i = j;
    }
    const double p = static_cast<double>(pos);
    const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
    return u / (p * static_cast<double>(neg));
}

double roc_auc_trapezoid(std::span<const ScoredCase> cases) {
    const auto [pos, neg] = class_counts(cases);
    if (pos == 0 || neg == 0) {
        throw DataError("AUC undefined: both classes must be present");
    }
    std::vector<std::size_t> order(cases.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return cases[a].score > cases[b].score; });

    // Integrate in counts (tp, fp) so every partial area is a half-integer.
    double area = 0.0;
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t dtp = 0, dfp = 0;
        std::size_t j = i;
        while (j < order.size() && cases[order[j]].score == cases[order[i]].score) {
            (cases[order[j]].label == 1 ? dtp : dfp) += 1;
            ++j;
        }
        area += static_cast<double>(dfp) * (2.0 * static_cast<double>(tp) + static_cast<double>(dtp)) / 2.0;
        tp += dtp;
        fp += dfp;
        i = j;
    }
    return area / (static_cast<double>(pos) * static_cast<double>(neg));
}

ConfusionMetrics confusion_metrics(std::span<const ScoredCase> cases, double threshold) {
    if (cases.empty()) {
        throw DataError("confusion metrics need at least one case");
    }
    class_counts(cases);
    ConfusionMetrics m;
    for (const auto& c : cases) {
        const bool predicted = c.score >= threshold;
        if (c.label == 1) {
            (predicted ? m.tp : m.fn) += 1;
        } else {
            (predicted ? m.fp : m.tn) += 1;
        }
    }
    m.specificity = ratio(m.tn, m.tn + m.fp, m.degenerate);
    m.recall = ratio(m.tp, m.tp + m.fn, m.degenerate);
    m.precision = ratio(m.tp, m.tp + m.fp, m.degenerate);
    if (m.precision + m.recall > 0.0) {
        m.f_score = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    } else {
        m.f_score = 0.0;
        m.degenerate = true;
    }
    m.accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(cases.size());
    return m;
}

MetricStats aggregate(std::span<const double> values) {
    if (values.empty()) {
        throw DataError("cannot aggregate an empty metric list");
    }
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) {
        ss += (v - mean) * (v - mean);
    }
    return {mean, std::sqrt(ss / n)};
}

const MetricStats& MetricsReport::stats(const std::string& metric) const {
    const auto it = std::find(metric_names.begin(), metric_names.end(), metric);
    if (it == metric_names.end()) {
        throw ConfigError("report has no metric '" + metric + "'");
    }
    return summary.at(static_cast<std::size_t>(it - metric_names.begin()));
}

FoldRow score_fold(int fold, std::span<const ScoredCase> cases, double threshold) {
    const auto cm = confusion_metrics(cases, threshold);
    return {fold, cases.size(), {roc_auc(cases), cm.f_score, cm.specificity, cm.recall, cm.precision, cm.accuracy},
            cm.degenerate};
}

MetricsReport make_report(std::vector<FoldRow> rows, std::vector<std::pair<std::string, std::string>> provenance) {
    MetricsReport report;
    report.metric_names.assign(kMetricNames.begin(), kMetricNames.end());
    report.folds = std::move(rows);
    report.provenance = std::move(provenance);
    for (std::size_t m = 0; m < report.metric_names.size(); ++m) {
        std::vector<double> column;
        for (const auto& row : report.folds) {
            column.push_back(row.values.at(m));
        }
        report.summary.push_back(aggregate(column));
    }
    return report;
}

std::string to_json(const MetricsReport& report) {
    using nlohmann::ordered_json;
    ordered_json folds = ordered_json::array();
    for (const auto& row : report.folds) {
        ordered_json r = {{"fold", row.fold}, {"cases", row.cases}, {"degenerate", row.degenerate}};
        for (std::size_t m = 0; m < report.metric_names.size(); ++m) {
            r[report.metric_names[m]] = row.values[m];
        }
        folds.push_back(std::move(r));
    }
    ordered_json summary = ordered_json::object();
    for (std::size_t m = 0; m < report.metric_names.size(); ++m) {
        summary[report.metric_names[m]] = {{"mean", report.summary[m].mean}, {"std", report.summary[m].std}};
    }
    ordered_json provenance = ordered_json::object();
    for (const auto& [k, v] : report.provenance) {
        provenance[k] = v;
    }
    const ordered_json doc = {{"metrics", report.metric_names},
                              {"folds", folds},
                              {"summary", summary},
                              {"provenance", provenance}};
    return doc.dump(2) + "\n";
}

std::string to_csv(const MetricsReport& report) {
    std::ostringstream os;
    os << "fold,cases";
    for (const auto& name : report.metric_names) {
        os << ',' << name;
    }
    os << '\n';
    for (const auto& row : report.folds) {
        os << row.fold << ',' << row.cases;
        for (double v : row.values) {
            os << ',' << fmt(v);
        }
        os << '\n';
    }
    std::size_t total = 0;
    for (const auto& row : report.folds) {
        total += row.cases;
    }
    os << "mean," << total;
    for (const auto& s : report.summary) {
        os << ',' << fmt(s.mean);
    }
    os << "\nstd," << total;
    for (const auto& s : report.summary) {
        os << ',' << fmt(s.std);
    }
    os << '\n';
    return os.str();
}

MetricsReport report_from_json(const std::string& text) {
    using nlohmann::ordered_json;
    try {
        const auto doc = ordered_json::parse(text);
        MetricsReport report;
        report.metric_names = doc.at("metrics").get<std::vector<std::string>>();
        for (const auto& r : doc.at("folds")) {
            FoldRow row{r.at("fold").get<int>(), r.at("cases").get<std::size_t>(), {}, r.value("degenerate", false)};
            for (const auto& name : report.metric_names) {
                row.values.push_back(r.at(name).get<double>());
            }
            report.folds.push_back(std::move(row));
        }
        for (const auto& name : report.metric_names) {
            const auto& s = doc.at("summary").at(name);
            report.summary.push_back({s.at("mean").get<double>(), s.at("std").get<double>()});
        }
        if (doc.contains("provenance")) {
            for (const auto& [k, v] : doc.at("provenance").items()) {
                report.provenance.emplace_back(k, v.get<std::string>());
            }
        }
        return report;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("invalid metrics report: ") + e.what());
    }
}

std::string comparison_csv(const std::vector<std::pair<std::string, MetricsReport>>& reports) {
    if (reports.empty()) {
        throw ConfigError("no reports to compare");
    }
    const auto& names = reports.front().second.metric_names;
    for (const auto& [label, r] : reports) {
        if (r.metric_names != names) {
            throw ConfigError("report '" + label + "' has a different metric set");
        }
    }
    std::ostringstream os;
    os << "configuration";
    for (const auto& n : names) {
        os << ',' << n << "_mean," << n << "_std";
    }
    os << '\n';
    for (const auto& [label, r] : reports) {
        os << label;
        for (const auto& s : r.summary) {
            os << ',' << fmt(s.mean) << ',' << fmt(s.std);
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace milpath

#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "adlsense/error.hpp"
#include "adlsense/eval/dataset.hpp"

namespace adlsense::eval {

struct ClassMetrics {
    std::string label;
    std::size_t support = 0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    friend bool operator==(const ClassMetrics&, const ClassMetrics&) = default;
};

struct MetricReport {
    std::string method;
    std::vector<std::string> labels;                    // confusion-matrix order
    std::vector<std::vector<std::size_t>> confusion;    // rows truth, columns predicted
    std::vector<ClassMetrics> per_class;                // known classes only
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    double micro_precision = 0.0;
    double micro_recall = 0.0;
    double micro_f1 = 0.0;
    std::size_t correct = 0;
    std::size_t total = 0;
    double accuracy = 0.0;  // success rate over all samples
    std::size_t nuadl_correct = 0;
    std::size_t nuadl_total = 0;
    std::optional<double> nuadl_accuracy;
    std::vector<std::string> warnings;

    friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

inline double safe_ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

inline double f1_score(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

// Per-class P/R/F1 over known classes; "unseen" takes part in the confusion
// matrix and in NUADL accuracy but not in the class averages. Macro averages
// cover classes with nonzero support.
inline MetricReport compute_metrics(const std::vector<LabeledSample>& truth, const PredictionSet& preds) {
    std::vector<std::string> missing;
    for (const auto& s : truth) {
        if (!preds.predictions.count(s.sample_id)) missing.push_back(s.sample_id);
    }
    if (!missing.empty()) throw CoverageError(preds.method, std::move(missing));

    MetricReport rep;
    rep.method = preds.method;
    std::set<std::string> label_set;
    for (const auto& s : truth) {
        label_set.insert(s.true_class);
        label_set.insert(preds.predictions.at(s.sample_id));
    }
    rep.labels.assign(label_set.begin(), label_set.end());
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < rep.labels.size(); ++i) index[rep.labels[i]] = i;
    rep.confusion.assign(rep.labels.size(), std::vector<std::size_t>(rep.labels.size(), 0));

    for (const auto& s : truth) {
        const auto& predicted = preds.predictions.at(s.sample_id);
        ++rep.confusion[index[s.true_class]][index[predicted]];
        ++rep.total;
        if (predicted == s.true_class) ++rep.correct;
        if (s.true_class == kUnseenLabel) {
            ++rep.nuadl_total;
            if (predicted == kUnseenLabel) ++rep.nuadl_correct;
        }
    }
    rep.accuracy = safe_ratio(rep.correct, rep.total);
    if (rep.nuadl_total > 0) rep.nuadl_accuracy = safe_ratio(rep.nuadl_correct, rep.nuadl_total);

    std::size_t sum_tp = 0, sum_fp = 0, sum_fn = 0, with_support = 0;
    for (std::size_t i = 0; i < rep.labels.size(); ++i) {
        if (rep.labels[i] == kUnseenLabel) continue;
        ClassMetrics m;
        m.label = rep.labels[i];
        m.tp = rep.confusion[i][i];
        for (std::size_t j = 0; j < rep.labels.size(); ++j) {
            m.support += rep.confusion[i][j];
            if (j != i) {
                m.fn += rep.confusion[i][j];
                m.fp += rep.confusion[j][i];
            }
        }
        m.precision = safe_ratio(m.tp, m.tp + m.fp);
        m.recall = safe_ratio(m.tp, m.support);
        m.f1 = f1_score(m.precision, m.recall);
        if (m.support == 0) {
            rep.warnings.push_back("class \"" + m.label + "\" has no support; excluded from macro averages");
        } else {
            rep.macro_precision += m.precision;
            rep.macro_recall += m.recall;
            rep.macro_f1 += m.f1;
            ++with_support;
        }
        sum_tp += m.tp;
        sum_fp += m.fp;
        sum_fn += m.fn;
        rep.per_class.push_back(std::move(m));
    }
    if (with_support > 0) {
        rep.macro_precision /= static_cast<double>(with_support);
        rep.macro_recall /= static_cast<double>(with_support);
        rep.macro_f1 /= static_cast<double>(with_support);
    }
    rep.micro_precision = safe_ratio(sum_tp, sum_tp + sum_fp);
    rep.micro_recall = safe_ratio(sum_tp, sum_tp + sum_fn);
    rep.micro_f1 = f1_score(rep.micro_precision, rep.micro_recall);
    return rep;
}

struct RateRow {
    std::string group;     // e.g. seen / unseen / atypical
    std::string category;  // e.g. Hygiene
    std::string task;
    std::size_t attempts = 0;
    std::size_t successes = 0;

    friend bool operator==(const RateRow&, const RateRow&) = default;
};

// Sum of successes over sum of attempts.
inline double aggregate_rates(const std::vector<RateRow>& rows) {
    if (rows.empty()) throw ValidationError("no rate rows to aggregate");
    std::size_t succ = 0, att = 0;
    for (const auto& r : rows) {
        if (r.attempts == 0) {
            throw ValidationError("rate row " + r.group + "/" + r.category + " has zero attempts");
        }
        if (r.successes > r.attempts) {
            throw ValidationError("rate row " + r.group + "/" + r.category +
                                  " has more successes than attempts");
        }
        succ += r.successes;
        att += r.attempts;
    }
    return static_cast<double>(succ) / static_cast<double>(att);
}

// Line-delimited {"group","category","task","attempts","successes"}.
inline std::vector<RateRow> load_rates(const std::string& path) {
    std::vector<RateRow> rows;
    detail::for_each_record(path, [&](const nlohmann::json& r, std::size_t) {
        rows.push_back({r.at("group").get<std::string>(), r.value("category", std::string{}),
                        r.value("task", std::string{}), r.at("attempts").get<std::size_t>(),
                        r.at("successes").get<std::size_t>()});
    });
    return rows;
}

}  // namespace adlsense::eval

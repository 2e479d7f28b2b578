#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "adlsense/error.hpp"
#include "adlsense/eval/dataset.hpp"
#include "adlsense/eval/metrics.hpp"
#include "adlsense/eval/stats.hpp"

namespace adlsense::eval {

struct PairwiseTest {
    std::string method_a;
    std::string method_b;
    McNemarResult result;

    friend bool operator==(const PairwiseTest&, const PairwiseTest&) = default;
};

struct EvalReport {
    std::vector<MetricReport> metrics;
    std::optional<FriedmanResult> friedman;
    std::vector<std::string> friedman_methods;
    std::vector<PairwiseTest> mcnemar;
    std::vector<RateRow> rates;
    bool micro = false;  // headline averaging
    std::vector<std::string> warnings;

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// Binary correctness per sample (rows) and method (columns), sample order of `truth`.
inline std::vector<std::vector<double>> correctness_matrix(const std::vector<LabeledSample>& truth,
                                                           const std::vector<PredictionSet>& sets) {
    std::vector<std::vector<double>> m;
    m.reserve(truth.size());
    for (const auto& s : truth) {
        std::vector<double> row;
        for (const auto& set : sets) {
            const auto it = set.predictions.find(s.sample_id);
            if (it == set.predictions.end()) throw CoverageError(set.method, {s.sample_id});
            row.push_back(it->second == s.true_class ? 1.0 : 0.0);
        }
        m.push_back(std::move(row));
    }
    return m;
}

inline PairwiseTest mcnemar_between(const std::vector<LabeledSample>& truth, const PredictionSet& a,
                                    const PredictionSet& b) {
    std::size_t only_a = 0, only_b = 0;
    for (const auto& s : truth) {
        const bool ca = a.predictions.at(s.sample_id) == s.true_class;
        const bool cb = b.predictions.at(s.sample_id) == s.true_class;
        if (ca && !cb) ++only_a;
        if (cb && !ca) ++only_b;
    }
    return {a.method, b.method, mcnemar_test(only_a, only_b)};
}

// Metrics per method, Friedman across all methods and McNemar for each pair.
inline EvalReport evaluate(const std::vector<LabeledSample>& truth, const std::vector<PredictionSet>& sets,
                           const std::vector<RateRow>& rates = {}, bool micro = false) {
    EvalReport rep;
    rep.micro = micro;
    rep.rates = rates;
    if (sets.empty()) {
        rep.warnings.push_back("no prediction sets given; metrics section omitted");
        return rep;
    }
    for (const auto& set : sets) rep.metrics.push_back(compute_metrics(truth, set));
    if (sets.size() >= 2 && truth.size() >= 2) {
        rep.friedman = friedman_test(correctness_matrix(truth, sets));
        for (const auto& s : sets) rep.friedman_methods.push_back(s.method);
        for (std::size_t i = 0; i < sets.size(); ++i) {
            for (std::size_t j = i + 1; j < sets.size(); ++j) {
                rep.mcnemar.push_back(mcnemar_between(truth, sets[i], sets[j]));
            }
        }
    }
    return rep;
}

inline nlohmann::json to_json(const MetricReport& m) {
    nlohmann::json per_class = nlohmann::json::array();
    for (const auto& c : m.per_class) {
        per_class.push_back({{"label", c.label}, {"support", c.support}, {"tp", c.tp}, {"fp", c.fp},
                             {"fn", c.fn}, {"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}});
    }
    nlohmann::json j = {{"method", m.method},
                        {"labels", m.labels},
                        {"confusion", m.confusion},
                        {"per_class", per_class},
                        {"macro", {{"precision", m.macro_precision}, {"recall", m.macro_recall}, {"f1", m.macro_f1}}},
                        {"micro", {{"precision", m.micro_precision}, {"recall", m.micro_recall}, {"f1", m.micro_f1}}},
                        {"correct", m.correct},
                        {"total", m.total},
                        {"accuracy", m.accuracy},
                        {"nuadl", {{"correct", m.nuadl_correct}, {"total", m.nuadl_total}}},
                        {"warnings", m.warnings}};
    if (m.nuadl_accuracy) j["nuadl"]["accuracy"] = *m.nuadl_accuracy;
    return j;
}

inline MetricReport metric_report_from_json(const nlohmann::json& j) {
    MetricReport m;
    m.method = j.at("method").get<std::string>();
    m.labels = j.at("labels").get<std::vector<std::string>>();
    m.confusion = j.at("confusion").get<std::vector<std::vector<std::size_t>>>();
    for (const auto& c : j.at("per_class")) {
        m.per_class.push_back({c.at("label").get<std::string>(), c.at("support").get<std::size_t>(),
                               c.at("tp").get<std::size_t>(), c.at("fp").get<std::size_t>(),
                               c.at("fn").get<std::size_t>(), c.at("precision").get<double>(),
                               c.at("recall").get<double>(), c.at("f1").get<double>()});
    }
    m.macro_precision = j.at("macro").at("precision").get<double>();
    m.macro_recall = j.at("macro").at("recall").get<double>();
    m.macro_f1 = j.at("macro").at("f1").get<double>();
    m.micro_precision = j.at("micro").at("precision").get<double>();
    m.micro_recall = j.at("micro").at("recall").get<double>();
    m.micro_f1 = j.at("micro").at("f1").get<double>();
    m.correct = j.at("correct").get<std::size_t>();
    m.total = j.at("total").get<std::size_t>();
    m.accuracy = j.at("accuracy").get<double>();
    m.nuadl_correct = j.at("nuadl").at("correct").get<std::size_t>();
    m.nuadl_total = j.at("nuadl").at("total").get<std::size_t>();
    if (j.at("nuadl").contains("accuracy")) m.nuadl_accuracy = j["nuadl"]["accuracy"].get<double>();
    m.warnings = j.at("warnings").get<std::vector<std::string>>();
    return m;
}

namespace detail {

inline std::map<std::string, std::vector<RateRow>> rows_by_group(const std::vector<RateRow>& rows) {
    std::map<std::string, std::vector<RateRow>> groups;
    for (const auto& r : rows) groups[r.group].push_back(r);
    return groups;
}

}  // namespace detail

inline nlohmann::json to_json(const EvalReport& rep) {
    nlohmann::json j = {{"format", "adlsense-report"}, {"version", 1}, {"averaging", rep.micro ? "micro" : "macro"}};
    j["warnings"] = rep.warnings;
    if (!rep.metrics.empty()) {
        j["metrics"] = nlohmann::json::array();
        for (const auto& m : rep.metrics) j["metrics"].push_back(to_json(m));
    }
    if (rep.friedman) {
        j["friedman"] = {{"methods", rep.friedman_methods}, {"q", rep.friedman->q}, {"df", rep.friedman->df},
                         {"p", rep.friedman->p}, {"rank_sums", rep.friedman->rank_sums},
                         {"blocks", rep.friedman->blocks}};
    }
    if (!rep.mcnemar.empty()) {
        j["mcnemar"] = nlohmann::json::array();
        for (const auto& t : rep.mcnemar) {
            nlohmann::json r = {{"a", t.method_a}, {"b", t.method_b}, {"only_a", t.result.b},
                                {"only_b", t.result.c}, {"z", t.result.z}, {"p", t.result.p}};
            if (t.result.exact_p) r["exact_p"] = *t.result.exact_p;
            j["mcnemar"].push_back(std::move(r));
        }
    }
    if (!rep.rates.empty()) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& r : rep.rates) {
            rows.push_back({{"group", r.group}, {"category", r.category}, {"task", r.task},
                            {"attempts", r.attempts}, {"successes", r.successes}});
        }
        nlohmann::json groups = nlohmann::json::object();
        for (const auto& [g, rs] : detail::rows_by_group(rep.rates)) groups[g] = aggregate_rates(rs);
        j["rates"] = {{"rows", rows}, {"groups", groups}, {"overall", aggregate_rates(rep.rates)}};
    }
    return j;
}

inline EvalReport eval_report_from_json(const nlohmann::json& j) {
    EvalReport rep;
    rep.micro = j.value("averaging", "macro") == "micro";
    rep.warnings = j.at("warnings").get<std::vector<std::string>>();
    if (j.contains("metrics")) {
        for (const auto& m : j["metrics"]) rep.metrics.push_back(metric_report_from_json(m));
    }
    if (j.contains("friedman")) {
        const auto& f = j["friedman"];
        rep.friedman = FriedmanResult{f.at("q").get<double>(), f.at("df").get<std::size_t>(),
                                      f.at("p").get<double>(), f.at("rank_sums").get<std::vector<double>>(),
                                      f.at("blocks").get<std::size_t>()};
        rep.friedman_methods = f.at("methods").get<std::vector<std::string>>();
    }
    if (j.contains("mcnemar")) {
        for (const auto& t : j["mcnemar"]) {
            McNemarResult r;
            r.b = t.at("only_a").get<std::size_t>();
            r.c = t.at("only_b").get<std::size_t>();
            r.z = t.at("z").get<double>();
            r.p = t.at("p").get<double>();
            if (t.contains("exact_p")) r.exact_p = t["exact_p"].get<double>();
            rep.mcnemar.push_back({t.at("a").get<std::string>(), t.at("b").get<std::string>(), r});
        }
    }
    if (j.contains("rates")) {
        for (const auto& r : j["rates"].at("rows")) {
            rep.rates.push_back({r.at("group").get<std::string>(), r.at("category").get<std::string>(),
                                 r.at("task").get<std::string>(), r.at("attempts").get<std::size_t>(),
                                 r.at("successes").get<std::size_t>()});
        }
    }
    return rep;
}

namespace detail {

inline std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

inline std::string pad(std::string s, std::size_t width) {
    if (s.size() < width) s.append(width - s.size(), ' ');
    return s;
}

}  // namespace detail

// Aligned plain-text rendering: a P/R/F1 table per method, the omnibus and
// pairwise tests, then success-rate rows with group and overall aggregates.
inline std::string render_table(const EvalReport& rep) {
    using detail::fmt;
    using detail::pad;
    std::ostringstream out;
    for (const auto& w : rep.warnings) out << "warning: " << w << '\n';
    if (!rep.metrics.empty()) {
        std::size_t width = 6;
        for (const auto& m : rep.metrics) width = std::max(width, m.method.size());
        width += 2;
        out << pad("Method", width) << pad("P", 8) << pad("R", 8) << pad("F1", 8) << pad("Acc", 8)
            << "NUADLs Acc\n";
        for (const auto& m : rep.metrics) {
            const double p = rep.micro ? m.micro_precision : m.macro_precision;
            const double r = rep.micro ? m.micro_recall : m.macro_recall;
            const double f = rep.micro ? m.micro_f1 : m.macro_f1;
            out << pad(m.method, width) << pad(fmt("%.3f", p), 8) << pad(fmt("%.3f", r), 8)
                << pad(fmt("%.3f", f), 8) << pad(fmt("%.3f", m.accuracy), 8)
                << (m.nuadl_accuracy ? fmt("%.3f", *m.nuadl_accuracy) : std::string("-")) << '\n';
        }
        out << "(" << (rep.micro ? "micro" : "macro") << " averages)\n";
    }
    if (rep.friedman) {
        out << "\nFriedman: Q = " << fmt("%.3f", rep.friedman->q) << ", df = " << rep.friedman->df
            << ", p = " << fmt("%.4g", rep.friedman->p) << " over " << rep.friedman->blocks << " samples\n";
    }
    for (const auto& t : rep.mcnemar) {
        out << "McNemar " << t.method_a << " vs " << t.method_b << ": z = " << fmt("%.3f", t.result.z)
            << ", p = " << fmt("%.4g", t.result.p);
        if (t.result.exact_p) out << ", exact p = " << fmt("%.4g", *t.result.exact_p);
        out << " (b = " << t.result.b << ", c = " << t.result.c << ")\n";
    }
    if (!rep.rates.empty()) {
        out << '\n'
            << pad("Type", 10) << pad("Category", 18) << pad("Task", 26) << pad("Completed", 11)
            << pad("Successes", 11) << "Rate\n";
        for (const auto& r : rep.rates) {
            out << pad(r.group, 10) << pad(r.category, 18) << pad(r.task, 26)
                << pad(std::to_string(r.attempts), 11) << pad(std::to_string(r.successes), 11)
                << fmt("%.1f%%", 100.0 * static_cast<double>(r.successes) / static_cast<double>(r.attempts))
                << '\n';
        }
        for (const auto& [g, rs] : detail::rows_by_group(rep.rates)) {
            out << pad(g + " total", 54) << fmt("%.1f%%", 100.0 * aggregate_rates(rs)) << '\n';
        }
        out << pad("overall", 54) << fmt("%.1f%%", 100.0 * aggregate_rates(rep.rates)) << '\n';
    }
    return out.str();
}

inline void write_report(const EvalReport& rep, const std::string& json_path,
                         const std::optional<std::string>& table_path = std::nullopt) {
    {
        std::ofstream out(json_path, std::ios::trunc);
        if (!out) throw IoError("cannot write report " + json_path);
        out << to_json(rep).dump(2) << '\n';
        if (!out) throw IoError("write failed for " + json_path);
    }
    if (table_path) {
        std::ofstream out(*table_path, std::ios::trunc);
        if (!out) throw IoError("cannot write report table " + *table_path);
        out << render_table(rep);
    }
}

inline EvalReport read_report(const std::string& json_path) {
    std::ifstream in(json_path);
    if (!in) throw IoError("cannot open report " + json_path);
    try {
        return eval_report_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(1, std::string("report: ") + e.what());
    }
}

}  // namespace adlsense::eval

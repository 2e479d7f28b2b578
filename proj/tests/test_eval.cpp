#include <gtest/gtest.h>

#include <boost/math/special_functions/binomial.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "adlsense/eval/report.hpp"

using namespace adlsense::eval;
using adlsense::ValidationError;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("adlsense_eval_" + name)).string();
}

// truth/prediction pairs from a confusion matrix over labels
std::pair<std::vector<LabeledSample>, PredictionSet> from_confusion(
    const std::vector<std::string>& labels, const std::vector<std::vector<int>>& cm) {
    std::vector<LabeledSample> truth;
    PredictionSet p{"m", {}};
    int id = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        for (std::size_t j = 0; j < labels.size(); ++j)
            for (int n = 0; n < cm[i][j]; ++n) {
                const auto sid = "s" + std::to_string(id++);
                truth.push_back({sid, "subj" + std::to_string(id % 3), labels[i], ""});
                p.predictions[sid] = labels[j];
            }
    return {truth, p};
}

std::vector<RateRow> field_trial_rows() {
    return {{"seen", "Hygiene", "brush teeth", 40, 32}, {"seen", "Dressing", "put on jacket", 40, 31},
            {"seen", "Eating", "eat", 40, 33},          {"unseen", "Hygiene", "floss", 10, 9},
            {"unseen", "Dressing", "put on hat", 10, 7}, {"unseen", "Eating", "drink", 10, 8},
            {"atypical", "Hygiene", "brush teeth", 20, 16}, {"atypical", "Dressing", "put on jacket", 20, 17},
            {"atypical", "Eating", "eat", 20, 19}};
}

}  // namespace

TEST(Metrics, PerfectPredictions) {
    const auto [truth, p] = from_confusion({"a", "b", "c"}, {{3, 0, 0}, {0, 4, 0}, {0, 0, 2}});
    const auto m = compute_metrics(truth, p);
    EXPECT_EQ(m.macro_precision, 1.0);
    EXPECT_EQ(m.macro_recall, 1.0);
    EXPECT_EQ(m.macro_f1, 1.0);
    EXPECT_EQ(m.accuracy, 1.0);
    EXPECT_FALSE(m.nuadl_accuracy);
}

TEST(Metrics, TwoClassHandOracle) {
    const auto [truth, p] = from_confusion({"c0", "c1"}, {{8, 2}, {1, 9}});
    const auto m = compute_metrics(truth, p);
    ASSERT_EQ(m.per_class.size(), 2u);
    EXPECT_NEAR(m.per_class[0].precision, 8.0 / 9.0, 1e-15);
    EXPECT_NEAR(m.per_class[0].recall, 0.8, 1e-15);
    const double p1 = 9.0 / 11.0, r1 = 0.9;
    const double f0 = 2 * (8.0 / 9.0) * 0.8 / (8.0 / 9.0 + 0.8), f1 = 2 * p1 * r1 / (p1 + r1);
    EXPECT_NEAR(m.macro_f1, (f0 + f1) / 2.0, 1e-12);
    EXPECT_NEAR(m.macro_precision, (8.0 / 9.0 + p1) / 2.0, 1e-12);
    EXPECT_NEAR(m.accuracy, 17.0 / 20.0, 1e-15);
    EXPECT_EQ(m.confusion, (std::vector<std::vector<std::size_t>>{{8, 2}, {1, 9}}));
    EXPECT_NEAR(m.micro_precision, 17.0 / 20.0, 1e-15);
}

TEST(Metrics, NuadlAccuracyAndUnseenExcludedFromMacro) {
    const auto [truth, p] = from_confusion({"a", "unseen"}, {{5, 0}, {1, 9}});
    const auto m = compute_metrics(truth, p);
    ASSERT_TRUE(m.nuadl_accuracy);
    EXPECT_NEAR(*m.nuadl_accuracy, 0.9, 1e-15);
    ASSERT_EQ(m.per_class.size(), 1u);
    EXPECT_EQ(m.per_class[0].label, "a");
    EXPECT_NEAR(m.per_class[0].precision, 5.0 / 6.0, 1e-15);
}

TEST(Metrics, ZeroSupportWarns) {
    const auto [truth, p] = from_confusion({"a", "b"}, {{3, 1}, {0, 0}});
    const auto m = compute_metrics(truth, p);
    ASSERT_EQ(m.warnings.size(), 1u);
    EXPECT_NE(m.warnings[0].find("\"b\""), std::string::npos);
    EXPECT_NEAR(m.macro_recall, 0.75, 1e-15);
}

TEST(Metrics, MissingPredictionsListed) {
    auto [truth, p] = from_confusion({"a"}, {{3}});
    p.predictions.erase("s1");
    try {
        compute_metrics(truth, p);
        FAIL();
    } catch (const CoverageError& e) {
        EXPECT_EQ(e.missing(), std::vector<std::string>{"s1"});
    }
}

TEST(Metrics, RandomIdentities) {
    std::mt19937_64 rng(5);
    const std::vector<std::string> labels = {"a", "b", "c", "d", "unseen"};
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::vector<int>> cm(5, std::vector<int>(5));
        for (auto& row : cm)
            for (auto& v : row) v = static_cast<int>(rng() % 6);
        const auto [truth, p] = from_confusion(labels, cm);
        const auto m = compute_metrics(truth, p);
        double lo = 1.0, hi = 0.0;
        for (const auto& c : m.per_class) {
            const auto i = std::find(m.labels.begin(), m.labels.end(), c.label) - m.labels.begin();
            std::size_t row = 0;
            for (auto v : m.confusion[i]) row += v;
            EXPECT_EQ(row, c.support);
            EXPECT_NEAR(c.recall * c.support, static_cast<double>(m.confusion[i][i]), 1e-9);
            for (double r : {c.precision, c.recall, c.f1}) {
                EXPECT_GE(r, 0.0);
                EXPECT_LE(r, 1.0);
            }
            if (c.support > 0) {
                lo = std::min(lo, c.f1);
                hi = std::max(hi, c.f1);
            }
        }
        if (hi >= lo) {
            EXPECT_LE(m.macro_f1, hi + 1e-12);
            EXPECT_GE(m.macro_f1, lo - 1e-12);
        }
    }
}

TEST(Rates, FieldTrialRows) {
    const auto rows = field_trial_rows();
    const auto group = [&](const std::string& g) {
        std::vector<RateRow> out;
        for (const auto& r : rows)
            if (r.group == g) out.push_back(r);
        return out;
    };
    EXPECT_DOUBLE_EQ(aggregate_rates(group("seen")), 96.0 / 120.0);
    EXPECT_DOUBLE_EQ(aggregate_rates(group("unseen")), 24.0 / 30.0);
    EXPECT_DOUBLE_EQ(aggregate_rates(group("atypical")), 52.0 / 60.0);
    EXPECT_DOUBLE_EQ(aggregate_rates(rows), 172.0 / 210.0);
    EXPECT_DOUBLE_EQ(aggregate_rates({{"", "", "", 40, 32}}), 0.8);
    EXPECT_DOUBLE_EQ(aggregate_rates({{"", "", "", 40, 31}}), 0.775);
    EXPECT_THROW(aggregate_rates({{"", "", "", 0, 0}}), ValidationError);
    EXPECT_THROW(aggregate_rates({}), ValidationError);
}

TEST(Gamma, MatchesBoost) {
    for (double a : {0.5, 1.0, 1.5, 2.0, 3.5, 10.0, 50.0}) {
        for (double x : {1e-4, 0.1, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0, 30.0, 80.0}) {
            const double ref = boost::math::gamma_q(a, x);
            EXPECT_NEAR(regularized_gamma_q(a, x), ref, 1e-12 + 1e-10 * ref) << a << " " << x;
        }
    }
    EXPECT_EQ(regularized_gamma_q(2.0, 0.0), 1.0);
}

TEST(Friedman, HandCase) {
    const auto r = friedman_test({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}});
    EXPECT_EQ(r.rank_sums, (std::vector<double>{3, 6, 9}));
    EXPECT_NEAR(r.q, 6.0, 1e-12);
    EXPECT_EQ(r.df, 2u);
    EXPECT_NEAR(r.p, std::exp(-3.0), 1e-12);
    EXPECT_NEAR(r.p, 0.0498, 1e-3);
}

TEST(Friedman, IdenticalMethodsGiveZero) {
    const auto r = friedman_test({{1, 1, 1}, {0, 0, 0}, {1, 1, 1}, {0, 0, 0}});
    EXPECT_EQ(r.q, 0.0);
    EXPECT_EQ(r.p, 1.0);
}

TEST(Friedman, BinaryOneMethodAlwaysRight) {
    // n blocks of (1,0,0): midranks (3, 1.5, 1.5); rank sums 3n, 1.5n, 1.5n
    const std::size_t n = 7;
    const auto r = friedman_test(std::vector<std::vector<double>>(n, {1, 0, 0}));
    const double R1 = 3.0 * n, R2 = 1.5 * n;
    const double q = 12.0 / (n * 3 * 4) * (R1 * R1 + 2 * R2 * R2) - 3.0 * n * 4;
    EXPECT_NEAR(r.q, q, 1e-12);
    EXPECT_NEAR(r.q, 10.5, 1e-12);
}

TEST(Friedman, RelabelingInvariant) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::vector<double>> m(3 + rng() % 20, std::vector<double>(2 + rng() % 5));
        for (auto& row : m)
            for (auto& v : row) v = static_cast<double>(rng() % 3);
        std::vector<std::size_t> perm(m[0].size());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        auto permuted = m;
        for (std::size_t i = 0; i < m.size(); ++i)
            for (std::size_t j = 0; j < perm.size(); ++j) permuted[i][j] = m[i][perm[j]];
        EXPECT_EQ(friedman_test(m).q, friedman_test(permuted).q);
    }
}

TEST(Friedman, Errors) {
    EXPECT_THROW(friedman_test({{1, 2}}), ValidationError);
    EXPECT_THROW(friedman_test({{1}, {2}}), ValidationError);
    EXPECT_THROW(friedman_test({{1, 2}, {1}}), ValidationError);
}

TEST(McNemar, HandCases) {
    EXPECT_EQ(mcnemar_test(4, 4).z, 0.0);
    EXPECT_EQ(mcnemar_test(0, 0).z, 0.0);
    EXPECT_NEAR(mcnemar_test(10, 2).z, 7.0 / std::sqrt(12.0), 1e-12);
    EXPECT_NEAR(mcnemar_test(10, 2).z, 2.0207, 1e-4);
    EXPECT_EQ(*mcnemar_test(3, 0).exact_p, 0.25);
    EXPECT_FALSE(mcnemar_test(20, 6).exact_p);
}

TEST(McNemar, AntisymmetricZSymmetricP) {
    for (std::size_t b = 0; b < 40; ++b)
        for (std::size_t c = 0; c < 40; ++c) {
            const auto x = mcnemar_test(b, c), y = mcnemar_test(c, b);
            EXPECT_EQ(x.z, -y.z);
            EXPECT_EQ(x.p, y.p);
            EXPECT_EQ(x.exact_p, y.exact_p);
        }
}

TEST(McNemar, ExactBinomialOracle) {
    for (std::size_t n = 1; n <= 25; ++n)
        for (std::size_t b = 0; b <= n; ++b) {
            const std::size_t k = std::min(b, n - b);
            double tail = 0.0;
            for (std::size_t i = 0; i <= k; ++i) tail += boost::math::binomial_coefficient<double>(n, i);
            const double ref = std::min(1.0, 2.0 * tail / std::pow(2.0, n));
            EXPECT_NEAR(*mcnemar_test(b, n - b).exact_p, ref, 1e-15);
        }
}

TEST(Split, ThreeSubjects) {
    std::vector<LabeledSample> s;
    for (int i = 0; i < 30; ++i) s.push_back({"s" + std::to_string(i), "subj" + std::to_string(i % 3), "a", ""});
    const auto split = cross_subject_split(s, 2.0 / 3.0, 1);
    EXPECT_EQ(split.train_subjects.size(), 2u);
    EXPECT_EQ(split.test_subjects.size(), 1u);
    EXPECT_EQ(split.train.size() + split.test.size(), 30u);
    const auto again = cross_subject_split(s, 2.0 / 3.0, 1);
    EXPECT_EQ(again.train, split.train);
    EXPECT_EQ(again.test_subjects, split.test_subjects);
}

TEST(Split, HundredSubjectsSeventyThirty) {
    std::vector<LabeledSample> s;
    for (int i = 0; i < 100; ++i) s.push_back({"s" + std::to_string(i), "p" + std::to_string(i), "a", ""});
    const auto split = cross_subject_split(s, 0.7, 9);
    EXPECT_EQ(split.train_subjects.size(), 70u);
    EXPECT_EQ(split.test_subjects.size(), 30u);
}

TEST(Split, DisjointForManySeeds) {
    std::vector<LabeledSample> s;
    for (int i = 0; i < 60; ++i) s.push_back({"s" + std::to_string(i), "p" + std::to_string(i % 11), "a", ""});
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const auto split = cross_subject_split(s, 0.6, seed);
        std::set<std::string> train(split.train_subjects.begin(), split.train_subjects.end());
        for (const auto& t : split.test) ASSERT_FALSE(train.count(t.subject_id));
        for (const auto& t : split.train) ASSERT_TRUE(train.count(t.subject_id));
    }
}

TEST(Split, SingleSubjectRejected) {
    EXPECT_THROW(cross_subject_split({{"a", "x", "c", ""}, {"b", "x", "c", ""}}, 0.5, 1), ValidationError);
}

TEST(Files, LabelsAndPredictions) {
    const auto lp = temp_path("labels.jsonl"), pp = temp_path("pred.jsonl");
    std::ofstream(lp) << "{\"sample_id\":\"a\",\"subject_id\":\"u1\",\"class\":\"eat\",\"path\":\"a.jsonl\"}\n\n"
                         "{\"sample_id\":\"b\",\"subject_id\":\"u2\",\"class\":\"unseen\"}\n";
    std::ofstream(pp) << "{\"method\":\"ours\"}\n{\"sample_id\":\"a\",\"class\":\"eat\"}\n{\"sample_id\":\"b\",\"class\":\"eat\"}\n";
    const auto labels = load_labels(lp);
    ASSERT_EQ(labels.size(), 2u);
    EXPECT_EQ(labels[1].true_class, kUnseenLabel);
    const auto preds = load_predictions(pp);
    EXPECT_EQ(preds.method, "ours");
    EXPECT_EQ(preds.predictions.at("b"), "eat");
    std::ofstream(pp) << "{\"sample_id\":\"a\",\"class\":\"eat\"}\n";
    EXPECT_THROW(load_predictions(pp), adlsense::ParseError);
    std::ofstream(lp) << "{\"sample_id\":\"a\",\"subject_id\":\"\",\"class\":\"eat\"}\n";
    EXPECT_THROW(load_labels(lp), adlsense::ParseError);
    std::filesystem::remove(lp);
    std::filesystem::remove(pp);
}

TEST(Report, EmptySetsWarn) {
    const auto rep = evaluate({}, {});
    EXPECT_TRUE(rep.metrics.empty());
    ASSERT_EQ(rep.warnings.size(), 1u);
    EXPECT_EQ(to_json(rep).count("metrics"), 0u);
}

TEST(Report, DeterministicAndRoundTrips) {
    auto [truth, a] = from_confusion({"x", "y", "unseen"}, {{5, 1, 0}, {2, 6, 1}, {1, 0, 4}});
    a.method = "ours";
    PredictionSet b{"baseline", {}};
    int i = 0;
    for (const auto& s : truth) b.predictions[s.sample_id] = (i++ % 3 == 0) ? "x" : s.true_class;
    const auto rep = evaluate(truth, {a, b}, field_trial_rows());
    ASSERT_TRUE(rep.friedman);
    ASSERT_EQ(rep.mcnemar.size(), 1u);
    const auto j1 = temp_path("r1.json"), t1 = temp_path("r1.txt"), j2 = temp_path("r2.json"), t2 = temp_path("r2.txt");
    write_report(rep, j1, t1);
    write_report(evaluate(truth, {a, b}, field_trial_rows()), j2, t2);
    std::ifstream f1(j1), f2(j2), g1(t1), g2(t2);
    const std::string s1{std::istreambuf_iterator<char>(f1), {}}, s2{std::istreambuf_iterator<char>(f2), {}};
    const std::string u1{std::istreambuf_iterator<char>(g1), {}}, u2{std::istreambuf_iterator<char>(g2), {}};
    EXPECT_EQ(s1, s2);
    EXPECT_EQ(u1, u2);
    EXPECT_NE(u1.find("81.9"), std::string::npos) << u1;
    const auto back = read_report(j1);
    ASSERT_EQ(back.metrics.size(), 2u);
    EXPECT_EQ(back.metrics[0], rep.metrics[0]);
    EXPECT_EQ(back.metrics[1], rep.metrics[1]);
    EXPECT_EQ(back, rep);
    for (const auto& p : {j1, t1, j2, t2}) std::filesystem::remove(p);
}

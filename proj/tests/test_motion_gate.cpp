#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "adlsense/motion_gate.hpp"
#include "oracles/random_fixtures.hpp"

using namespace adlsense;

namespace {

SampleWindow still_window(std::size_t n) {
    SampleWindow w;
    for (std::size_t t = 0; t < n; ++t) {
        SkeletonFrame f;
        f.timestamp = static_cast<double>(t);
        for (std::size_t j = 0; j < kJointCount; ++j) f.joints[j] = {0.1 * j, 1.0, 2.0};
        w.frames.push_back(f);
    }
    return w;
}

MotionEmbedding with_average(double avg) {
    MotionEmbedding m;
    m.per_joint.fill(avg);
    return m;
}

}  // namespace

TEST(MotionEmbedding, StationaryWindowIsZero) {
    const auto m = compute_motion_embedding(still_window(16));
    for (double v : m.per_joint) EXPECT_EQ(v, 0.0);
}

TEST(MotionEmbedding, ToyPathSumsSegments) {
    auto w = still_window(3);
    w.frames[0].joints[0] = {0, 0, 0};
    w.frames[1].joints[0] = {1, 0, 0};
    w.frames[2].joints[0] = {1, 1, 0};
    const auto m = compute_motion_embedding(w);
    EXPECT_DOUBLE_EQ(m.per_joint[0], 2.0);
    for (std::size_t j = 1; j < kJointCount; ++j) EXPECT_EQ(m.per_joint[j], 0.0);
}

TEST(MotionEmbedding, ThreeFourFive) {
    auto w = still_window(2);
    w.frames[0].joints[5] = {0, 0, 0};
    w.frames[1].joints[5] = {3, 4, 0};
    EXPECT_DOUBLE_EQ(compute_motion_embedding(w).per_joint[5], 5.0);
}

TEST(MotionEmbedding, EntryZeroIffJointStationary) {
    std::mt19937_64 rng(11);
    auto w = fixtures::random_window(rng);
    for (auto& f : w.frames) f.joints[9] = w.frames[0].joints[9];
    const auto m = compute_motion_embedding(w);
    for (std::size_t j = 0; j < kJointCount; ++j) {
        if (j == 9) {
            EXPECT_EQ(m.per_joint[j], 0.0);
        } else {
            EXPECT_GT(m.per_joint[j], 0.0);
        }
    }
}

TEST(MotionEmbedding, InvalidWindowRejected) {
    EXPECT_THROW(compute_motion_embedding(still_window(1)), ValidationError);
    auto w = still_window(4);
    w.frames[2].timestamp = w.frames[1].timestamp;
    EXPECT_THROW(compute_motion_embedding(w), ValidationError);
}

TEST(MotionEmbedding, RandomInvariants) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const auto w = fixtures::random_window(rng);
        const auto base = compute_motion_embedding(w);
        const Vec3 shift{fixtures::uniform(rng, -5, 5), fixtures::uniform(rng, -5, 5), fixtures::uniform(rng, -5, 5)};
        const auto rot = fixtures::random_rotation(rng);
        const double lambda = fixtures::uniform(rng, 0.1, 10.0);
        auto translated = w, rotated = w, scaled = w, reversed = w;
        for (std::size_t t = 0; t < w.frames.size(); ++t) {
            for (std::size_t j = 0; j < kJointCount; ++j) {
                translated.frames[t].joints[j] = w.frames[t].joints[j] + shift;
                rotated.frames[t].joints[j] = rot.apply(w.frames[t].joints[j]);
                scaled.frames[t].joints[j] = lambda * w.frames[t].joints[j];
                reversed.frames[t].joints[j] = w.frames[w.frames.size() - 1 - t].joints[j];
            }
        }
        const auto mt = compute_motion_embedding(translated);
        const auto mr = compute_motion_embedding(rotated);
        const auto ms = compute_motion_embedding(scaled);
        const auto mv = compute_motion_embedding(reversed);
        for (std::size_t j = 0; j < kJointCount; ++j) {
            EXPECT_NEAR(mt.per_joint[j], base.per_joint[j], 1e-9);
            EXPECT_NEAR(mr.per_joint[j], base.per_joint[j], 1e-9);
            EXPECT_NEAR(mv.per_joint[j], base.per_joint[j], 1e-9);
            EXPECT_NEAR(ms.per_joint[j], lambda * base.per_joint[j], 1e-9 * lambda * base.per_joint[j]);
        }
        EXPECT_NEAR(average_motion(ms), lambda * average_motion(base), 1e-9 * lambda * average_motion(base));
    }
}

TEST(AverageMotion, Examples) {
    EXPECT_EQ(average_motion(MotionEmbedding{}), 0.0);
    MotionEmbedding one;
    one.per_joint[3] = 19.0;
    EXPECT_DOUBLE_EQ(average_motion(one), 1.0);
    EXPECT_DOUBLE_EQ(average_motion(with_average(2.0)), 2.0);
}

TEST(Percentile, LinearInterpolation) {
    EXPECT_DOUBLE_EQ(percentile({1, 2, 3, 4, 5}, 0), 1.0);
    EXPECT_DOUBLE_EQ(percentile({1, 2, 3, 4, 5}, 100), 5.0);
    EXPECT_DOUBLE_EQ(percentile({5, 1, 3, 2, 4}, 50), 3.0);
    EXPECT_DOUBLE_EQ(percentile({0, 10}, 25), 2.5);
    EXPECT_THROW(percentile({}, 50), ValidationError);
    EXPECT_THROW(percentile({1.0}, 101), ValidationError);
}

TEST(Calibration, MinMaxOracle) {
    std::vector<double> v;
    for (int i = 0; i < 100; ++i) v.push_back(0.5 + 1.5 * i / 99.0);
    std::shuffle(v.begin(), v.end(), std::mt19937_64(3));
    const auto th = calibrate_thresholds(v, {0.0, 100.0, 1.0, 1.0});
    EXPECT_DOUBLE_EQ(th.m_min, *std::min_element(v.begin(), v.end()));
    EXPECT_DOUBLE_EQ(th.m_max, *std::max_element(v.begin(), v.end()));
    EXPECT_DOUBLE_EQ(th.m_min, 0.5);
    EXPECT_DOUBLE_EQ(th.m_max, 2.0);
    EXPECT_EQ(th.calibration.sample_count, 100u);
    EXPECT_FALSE(th.calibration.degenerate());
}

TEST(Calibration, SingleValueIsDegenerate) {
    const auto th = calibrate_thresholds({0.7}, {1.0, 99.0, 1.0, 1.0});
    EXPECT_EQ(th.m_min, 0.7);
    EXPECT_EQ(th.m_max, 0.7);
    EXPECT_EQ(th.calibration.sample_count, 1u);
    EXPECT_TRUE(th.calibration.degenerate());
}

TEST(Calibration, HandArithmetic) {
    const auto th = calibrate_thresholds({1, 2, 3, 4, 5}, {0.0, 100.0, 0.9, 1.1});
    EXPECT_NEAR(th.m_min, 0.9, 1e-12);
    EXPECT_NEAR(th.m_max, 5.5, 1e-12);
}

TEST(Calibration, DefaultsUsePercentilesAndMargins) {
    std::vector<double> v;
    for (int i = 0; i <= 100; ++i) v.push_back(i);
    const auto th = calibrate_thresholds(v);
    EXPECT_NEAR(th.m_min, 0.9 * 1.0, 1e-12);
    EXPECT_NEAR(th.m_max, 1.1 * 99.0, 1e-12);
}

TEST(Calibration, Errors) {
    EXPECT_THROW(calibrate_thresholds({}), ValidationError);
    EXPECT_THROW(calibrate_thresholds({1.0, -0.1}), ValidationError);
}

TEST(Gate, StrictInterval) {
    const GateThresholds th{0.0625, 3.0, {}};  // dyadic bounds so the averages land exactly
    EXPECT_FALSE(classify_motion(MotionEmbedding{}, th));
    EXPECT_TRUE(classify_motion(with_average(1.2), th));
    EXPECT_FALSE(classify_motion(with_average(5.0), th));
    EXPECT_FALSE(classify_motion(with_average(3.0), th));
    EXPECT_FALSE(classify_motion(with_average(0.0625), th));
    EXPECT_TRUE(classify_motion(with_average(0.0625 + 1e-12), th));
}

TEST(Gate, ScalingAboveMaxNeverFlips) {
    std::mt19937_64 rng(5);
    const GateThresholds th{0.05, 3.0, {}};
    for (int i = 0; i < 500; ++i) {
        MotionEmbedding m;
        for (auto& v : m.per_joint) v = fixtures::uniform(rng, 0.0, 8.0);
        if (!(average_motion(m) >= th.m_max)) continue;
        MotionEmbedding scaled = m;
        const double lambda = fixtures::uniform(rng, 1.0, 5.0);
        for (auto& v : scaled.per_joint) v *= lambda;
        EXPECT_FALSE(classify_motion(scaled, th));
    }
}

TEST(Thresholds, FileRoundTrip) {
    const auto th = calibrate_thresholds({0.2, 0.4, 0.9, 1.3});
    const auto path = (std::filesystem::temp_directory_path() / "adlsense_th.json").string();
    save_thresholds(th, path);
    EXPECT_EQ(load_thresholds(path), th);
    std::filesystem::remove(path);
    EXPECT_THROW(gate_from_json({{"m_min", 2.0}, {"m_max", 1.0}}), ValidationError);
}

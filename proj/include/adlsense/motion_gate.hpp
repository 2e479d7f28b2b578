#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "adlsense/error.hpp"
#include "adlsense/skeleton.hpp"

namespace adlsense {

// Cumulative Euclidean path length of each joint across a window, meters.
struct MotionEmbedding {
    std::array<double, kJointCount> per_joint{};

    friend bool operator==(const MotionEmbedding&, const MotionEmbedding&) = default;
};

inline MotionEmbedding compute_motion_embedding(std::span<const SkeletonFrame> frames) {
    MotionEmbedding m;
    for (std::size_t t = 1; t < frames.size(); ++t) {
        for (std::size_t j = 0; j < kJointCount; ++j) {
            m.per_joint[j] += (frames[t].joints[j] - frames[t - 1].joints[j]).norm();
        }
    }
    return m;
}

inline MotionEmbedding compute_motion_embedding(const SampleWindow& window) {
    validate_window(window);
    return compute_motion_embedding(std::span<const SkeletonFrame>(window.frames));
}

// Scalar mean of the per-joint displacements.
inline double average_motion(const MotionEmbedding& m) {
    double total = 0.0;
    for (double v : m.per_joint) total += v;
    return total / static_cast<double>(kJointCount);
}

struct CalibrationConfig {
    double percentile_lo = 1.0;
    double percentile_hi = 99.0;
    double margin_lo = 0.9;
    double margin_hi = 1.1;
};

struct CalibrationInfo {
    std::size_t sample_count = 0;
    double percentile_lo = 1.0;
    double percentile_hi = 99.0;
    double margin_lo = 0.9;
    double margin_hi = 1.1;

    bool degenerate() const noexcept { return sample_count < 2; }

    friend bool operator==(const CalibrationInfo&, const CalibrationInfo&) = default;
};

struct GateThresholds {
    double m_min = 0.0;
    double m_max = 0.0;
    CalibrationInfo calibration;

    friend bool operator==(const GateThresholds&, const GateThresholds&) = default;
};

// Linear interpolation between order statistics at rank p/100 * (n-1).
inline double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw ValidationError("percentile of an empty sample");
    if (!(p >= 0.0 && p <= 100.0)) throw ValidationError("percentile must lie in [0,100]");
    std::sort(values.begin(), values.end());
    const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

inline GateThresholds calibrate_thresholds(const std::vector<double>& averages,
                                           const CalibrationConfig& config = {}) {
    if (averages.empty()) throw ValidationError("cannot calibrate thresholds from no samples");
    for (double a : averages) {
        if (!(a >= 0.0) || !std::isfinite(a)) {
            throw ValidationError("motion averages must be finite and non-negative");
        }
    }
    if (!(config.margin_lo > 0.0) || !(config.margin_hi > 0.0) ||
        config.percentile_lo > config.percentile_hi) {
        throw ValidationError("invalid calibration config");
    }
    GateThresholds th;
    th.m_min = config.margin_lo * percentile(averages, config.percentile_lo);
    th.m_max = config.margin_hi * percentile(averages, config.percentile_hi);
    if (th.m_min > th.m_max) th.m_min = th.m_max;
    th.calibration = {averages.size(), config.percentile_lo, config.percentile_hi,
                      config.margin_lo, config.margin_hi};
    return th;
}

// True for ADL motion: strictly inside (m_min, m_max).
inline bool classify_motion(const MotionEmbedding& m, const GateThresholds& th) {
    const double avg = average_motion(m);
    return th.m_min < avg && avg < th.m_max;
}

inline nlohmann::json to_json(const GateThresholds& th) {
    return {{"m_min", th.m_min},
            {"m_max", th.m_max},
            {"calibration",
             {{"sample_count", th.calibration.sample_count},
              {"percentile_lo", th.calibration.percentile_lo},
              {"percentile_hi", th.calibration.percentile_hi},
              {"margin_lo", th.calibration.margin_lo},
              {"margin_hi", th.calibration.margin_hi}}}};
}

inline GateThresholds gate_from_json(const nlohmann::json& j) {
    GateThresholds th;
    th.m_min = j.at("m_min").get<double>();
    th.m_max = j.at("m_max").get<double>();
    if (j.contains("calibration")) {
        const auto& c = j["calibration"];
        th.calibration.sample_count = c.value("sample_count", std::size_t{0});
        th.calibration.percentile_lo = c.value("percentile_lo", 1.0);
        th.calibration.percentile_hi = c.value("percentile_hi", 99.0);
        th.calibration.margin_lo = c.value("margin_lo", 0.9);
        th.calibration.margin_hi = c.value("margin_hi", 1.1);
    }
    if (!(th.m_min >= 0.0) || !(th.m_min <= th.m_max)) {
        throw ValidationError("gate thresholds need 0 <= m_min <= m_max");
    }
    return th;
}

inline void save_thresholds(const GateThresholds& th, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write thresholds file " + path);
    out << to_json(th).dump(2) << '\n';
}

inline GateThresholds load_thresholds(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open thresholds file " + path);
    try {
        return gate_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(1, std::string("thresholds file: ") + e.what());
    }
}

}  // namespace adlsense

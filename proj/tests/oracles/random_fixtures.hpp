#pragma once

#include <cmath>
#include <random>

#include "adlsense/skeleton.hpp"
#include "adlsense/state_estimator.hpp"

namespace fixtures {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline adlsense::SampleWindow random_window(std::mt19937_64& rng, std::size_t frames = adlsense::kWindowLength,
                                            double spread = 1.0) {
    adlsense::SampleWindow w;
    for (std::size_t t = 0; t < frames; ++t) {
        adlsense::SkeletonFrame f;
        f.timestamp = 0.2 * static_cast<double>(t);
        for (auto& p : f.joints) p = {uniform(rng, -spread, spread), uniform(rng, -spread, spread), uniform(rng, 1.0, 3.0)};
        w.frames.push_back(f);
        w.input_indices.push_back(6 * t);
    }
    return w;
}

inline adlsense::AdlEmbedding random_embedding(std::mt19937_64& rng, double scale = 1.0) {
    adlsense::AdlEmbedding e{};
    std::normal_distribution<double> g(0.0, scale);
    for (auto& v : e) v = g(rng);
    return e;
}

// 3x3 rotation from Euler angles.
struct Rotation {
    double m[3][3];
    adlsense::Vec3 apply(const adlsense::Vec3& p) const {
        return {m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z, m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z,
                m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z};
    }
};

inline Rotation random_rotation(std::mt19937_64& rng) {
    const double a = uniform(rng, -M_PI, M_PI), b = uniform(rng, -M_PI, M_PI), c = uniform(rng, -M_PI, M_PI);
    const double ca = std::cos(a), sa = std::sin(a), cb = std::cos(b), sb = std::sin(b), cc = std::cos(c),
                 sc = std::sin(c);
    // Rz(a) * Ry(b) * Rx(c)
    return {{{ca * cb, ca * sb * sc - sa * cc, ca * sb * cc + sa * sc},
             {sa * cb, sa * sb * sc + ca * cc, sa * sb * cc - ca * sc},
             {-sb, cb * sc, cb * cc}}};
}

}  // namespace fixtures

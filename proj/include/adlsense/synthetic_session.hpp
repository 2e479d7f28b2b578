#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "adlsense/error.hpp"
#include "adlsense/session_io.hpp"
#include "adlsense/skeleton.hpp"

namespace adlsense {

// Standing pose in the camera frame (x right, y up, z away), meters.
inline std::array<Vec3, kJointCount> rest_pose() {
    std::array<Vec3, kJointCount> p{};
    const auto set = [&](Joint j, double x, double y) { p[index_of(j)] = {x, y, 2.5}; };
    set(Joint::head, 0.0, 1.65);
    set(Joint::neck, 0.0, 1.50);
    set(Joint::waist, 0.0, 1.00);
    set(Joint::left_collar, -0.08, 1.45);
    set(Joint::left_shoulder, -0.20, 1.42);
    set(Joint::left_elbow, -0.25, 1.15);
    set(Joint::left_wrist, -0.27, 0.92);
    set(Joint::left_hand, -0.28, 0.85);
    set(Joint::right_collar, 0.08, 1.45);
    set(Joint::right_shoulder, 0.20, 1.42);
    set(Joint::right_elbow, 0.25, 1.15);
    set(Joint::right_wrist, 0.27, 0.92);
    set(Joint::right_hand, 0.28, 0.85);
    set(Joint::left_hip, -0.12, 0.95);
    set(Joint::left_knee, -0.12, 0.52);
    set(Joint::left_ankle, -0.12, 0.10);
    set(Joint::right_hip, 0.12, 0.95);
    set(Joint::right_knee, 0.12, 0.52);
    set(Joint::right_ankle, 0.12, 0.10);
    return p;
}

// Sinusoidal displacement of one joint: offset + amplitude * sin(2 pi f t + phase).
struct JointMotion {
    Joint joint;
    Vec3 offset;
    Vec3 amplitude;
    double frequency = 1.0;  // Hz
    double phase = 0.0;      // radians, added to the session phase
};

struct ActivityPattern {
    std::string name;
    std::vector<JointMotion> motions;
    Vec3 drift;  // whole-body velocity, m/s
};

namespace detail {

// An arm motion drags the wrist and elbow along with reduced amplitude.
inline void add_arm(std::vector<JointMotion>& out, bool right, Vec3 offset, Vec3 amplitude, double freq,
                    double phase = 0.0) {
    const Joint hand = right ? Joint::right_hand : Joint::left_hand;
    const Joint wrist = right ? Joint::right_wrist : Joint::left_wrist;
    const Joint elbow = right ? Joint::right_elbow : Joint::left_elbow;
    out.push_back({hand, offset, amplitude, freq, phase});
    out.push_back({wrist, 0.85 * offset, 0.85 * amplitude, freq, phase});
    out.push_back({elbow, 0.4 * offset, 0.4 * amplitude, freq, phase});
}

}  // namespace detail

// Built-in patterns: stationary, brushing_teeth, washing_hands, eating,
// putting_on_jacket, putting_on_hat, flossing, walking, fidgeting.
inline ActivityPattern activity_pattern(const std::string& name) {
    ActivityPattern a;
    a.name = name;
    auto& m = a.motions;
    if (name == "stationary") {
    } else if (name == "brushing_teeth") {
        detail::add_arm(m, true, {-0.25, 0.70, -0.25}, {0.04, 0.01, 0.0}, 2.0);
    } else if (name == "flossing") {
        detail::add_arm(m, true, {-0.22, 0.72, -0.25}, {0.05, 0.0, 0.0}, 1.2);
        detail::add_arm(m, false, {0.22, 0.72, -0.25}, {-0.05, 0.0, 0.0}, 1.2);
    } else if (name == "washing_hands") {
        detail::add_arm(m, true, {-0.15, 0.15, -0.30}, {0.06, 0.0, 0.03}, 1.5);
        detail::add_arm(m, false, {0.15, 0.15, -0.30}, {-0.06, 0.0, 0.03}, 1.5, std::numbers::pi);
    } else if (name == "eating") {
        detail::add_arm(m, true, {-0.15, 0.40, -0.25}, {0.0, 0.30, 0.0}, 0.5);
    } else if (name == "putting_on_jacket") {
        detail::add_arm(m, true, {0.05, 0.35, 0.0}, {0.25, 0.30, 0.10}, 0.4);
        detail::add_arm(m, false, {-0.05, 0.35, 0.0}, {-0.25, 0.30, 0.10}, 0.4, std::numbers::pi / 2);
        m.push_back({Joint::right_shoulder, {}, {0.03, 0.02, 0.0}, 0.4});
        m.push_back({Joint::left_shoulder, {}, {-0.03, 0.02, 0.0}, 0.4});
    } else if (name == "putting_on_hat") {
        detail::add_arm(m, true, {-0.10, 0.85, 0.0}, {0.0, 0.12, 0.0}, 0.6);
        detail::add_arm(m, false, {0.10, 0.85, 0.0}, {0.0, 0.12, 0.0}, 0.6);
    } else if (name == "walking") {
        a.drift = {1.2, 0.0, 0.0};
        for (auto j : {Joint::left_knee, Joint::left_ankle}) m.push_back({j, {}, {0.0, 0.05, 0.35}, 1.0});
        for (auto j : {Joint::right_knee, Joint::right_ankle}) {
            m.push_back({j, {}, {0.0, 0.05, 0.35}, 1.0, std::numbers::pi});
        }
        detail::add_arm(m, true, {}, {0.0, 0.0, 0.25}, 1.0);
        detail::add_arm(m, false, {}, {0.0, 0.0, 0.25}, 1.0, std::numbers::pi);
    } else if (name == "fidgeting") {
        m.push_back({Joint::right_hand, {}, {0.004, 0.002, 0.0}, 0.3});
    } else {
        throw ValidationError("unknown activity pattern \"" + name + "\"");
    }
    return a;
}

struct SynthesisOptions {
    std::size_t frames = 300;
    double fps = 30.0;
    double jitter = 0.002;  // per-coordinate Gaussian noise, meters
    double start_time = 0.0;
    std::uint64_t seed = 1;
};

// Deterministic session: random phase and jitter drawn from mt19937_64 via
// Box-Muller so output does not depend on the standard library.
inline Session synthesize_session(const ActivityPattern& activity, const SynthesisOptions& opt) {
    if (!(opt.fps > 0.0)) throw ValidationError("fps must be positive");
    std::mt19937_64 rng(opt.seed);
    const auto unit = [&] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
    const auto gauss = [&] {
        return std::sqrt(-2.0 * std::log(unit())) * std::cos(2.0 * std::numbers::pi * unit());
    };
    const double session_phase = 2.0 * std::numbers::pi * unit();
    const double tempo = 0.9 + 0.2 * unit();  // +-10% speed between sessions
    const auto rest = rest_pose();

    Session s;
    s.fps = opt.fps;
    s.frames.reserve(opt.frames);
    for (std::size_t i = 0; i < opt.frames; ++i) {
        const double t = static_cast<double>(i) / opt.fps;
        SkeletonFrame f;
        f.timestamp = opt.start_time + t;
        f.joints = rest;
        for (const auto& jm : activity.motions) {
            const double w = std::sin(2.0 * std::numbers::pi * jm.frequency * tempo * t + jm.phase +
                                      session_phase);
            f.joints[index_of(jm.joint)] = f.joints[index_of(jm.joint)] + jm.offset + w * jm.amplitude;
        }
        for (auto& p : f.joints) {
            p = p + t * activity.drift;
            if (opt.jitter > 0.0) p = p + Vec3{opt.jitter * gauss(), opt.jitter * gauss(), opt.jitter * gauss()};
        }
        s.frames.push_back(f);
    }
    return s;
}

}  // namespace adlsense

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "adlsense/error.hpp"
#include "adlsense/skeleton.hpp"
#include "adlsense/tensor.hpp"
#include "adlsense/wire_format.hpp"

namespace adlsense {

inline constexpr std::size_t kGridSide = 6;
inline constexpr std::size_t kObjectClasses = 38;
inline constexpr std::size_t kFeatureChannels = 19;  // video and pose grids
inline constexpr const char* kFeatureFormat = "adlsense-features";

enum class Modality { video, pose };

enum class PositionEncoding { bilinear, one_hot };

// 6x6 absolute-position matrix, row = image y cell, column = image x cell.
struct SpatialMatrix {
    std::array<double, kGridSide * kGridSide> cells{};

    double& at(std::size_t row, std::size_t col) noexcept { return cells[row * kGridSide + col]; }
    double at(std::size_t row, std::size_t col) const noexcept {
        return cells[row * kGridSide + col];
    }
    double sum() const noexcept {
        double s = 0.0;
        for (double c : cells) s += c;
        return s;
    }
};

namespace detail {

// Continuous cell coordinate of u in [0,1] against centers (i+0.5)/6,
// clamped to the outer centers. Returns (lower cell, fraction toward upper).
inline std::pair<std::size_t, double> bilinear_axis(double u) {
    double c = u * static_cast<double>(kGridSide) - 0.5;
    c = std::clamp(c, 0.0, static_cast<double>(kGridSide - 1));
    auto lo = static_cast<std::size_t>(std::floor(c));
    lo = std::min(lo, kGridSide - 2);
    return {lo, c - static_cast<double>(lo)};
}

}  // namespace detail

inline SpatialMatrix spatial_position_matrix(double x, double y,
                                             PositionEncoding encoding = PositionEncoding::bilinear) {
    if (!std::isfinite(x) || !std::isfinite(y)) {
        throw ValidationError("spatial position must be finite");
    }
    x = std::clamp(x, 0.0, 1.0);
    y = std::clamp(y, 0.0, 1.0);
    SpatialMatrix m;
    if (encoding == PositionEncoding::one_hot) {
        const auto col = std::min(static_cast<std::size_t>(x * kGridSide), kGridSide - 1);
        const auto row = std::min(static_cast<std::size_t>(y * kGridSide), kGridSide - 1);
        m.at(row, col) = 1.0;
        return m;
    }
    const auto [c0, fx] = detail::bilinear_axis(x);
    const auto [r0, fy] = detail::bilinear_axis(y);
    m.at(r0, c0) += (1.0 - fx) * (1.0 - fy);
    m.at(r0, c0 + 1) += fx * (1.0 - fy);
    m.at(r0 + 1, c0) += (1.0 - fx) * fy;
    m.at(r0 + 1, c0 + 1) += fx * fy;
    return m;
}

struct ObjectDetection {
    int class_id = 0;
    double x = 0.0;  // normalized centroid in the still image
    double y = 0.0;
    double confidence = 1.0;

    friend bool operator==(const ObjectDetection&, const ObjectDetection&) = default;
};

inline void validate_detection(const ObjectDetection& d) {
    if (d.class_id < 0 || d.class_id >= static_cast<int>(kObjectClasses)) {
        throw ValidationError("object class_id " + std::to_string(d.class_id) + " outside [0, " +
                              std::to_string(kObjectClasses) + ")");
    }
    if (!std::isfinite(d.x) || !std::isfinite(d.y)) {
        throw ValidationError("object centroid must be finite");
    }
    if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) {
        throw ValidationError("object confidence outside [0,1]");
    }
}

// 1 x 38 x 6 x 6 grid: each class slice accumulates confidence-weighted
// position matrices of its instances.
inline Tensor<double> objects_to_grid(const std::vector<ObjectDetection>& detections,
                                      PositionEncoding encoding = PositionEncoding::bilinear) {
    Tensor<double> grid({1, kObjectClasses, kGridSide, kGridSide});
    for (const auto& d : detections) {
        validate_detection(d);
        const auto m = spatial_position_matrix(d.x, d.y, encoding);
        for (std::size_t r = 0; r < kGridSide; ++r) {
            for (std::size_t c = 0; c < kGridSide; ++c) {
                grid.at(0, d.class_id, r, c) += d.confidence * m.at(r, c);
            }
        }
    }
    return grid;
}

struct FeatureGrid {
    Modality modality = Modality::pose;
    Tensor<float> tensor;  // T x C x 6 x 6

    friend bool operator==(const FeatureGrid&, const FeatureGrid&) = default;
};

inline const Shape& feature_grid_shape() {
    static const Shape shape{kWindowLength, kFeatureChannels, kGridSide, kGridSide};
    return shape;
}

inline const Shape& joint_xy_shape() {
    static const Shape shape{kWindowLength, kJointCount, 2};
    return shape;
}

struct FeatureBundle {
    FeatureGrid video{Modality::video, Tensor<float>(feature_grid_shape())};
    FeatureGrid pose{Modality::pose, Tensor<float>(feature_grid_shape())};
    Tensor<float> pose_joint_xy{joint_xy_shape()};  // 16 x 19 x (x, y) in [0,1]
    std::vector<ObjectDetection> objects;
    std::size_t window_index = 0;

    friend bool operator==(const FeatureBundle&, const FeatureBundle&) = default;
};

inline void validate_bundle(const FeatureBundle& b) {
    b.video.tensor.require_shape(feature_grid_shape(), "video grid");
    b.pose.tensor.require_shape(feature_grid_shape(), "pose grid");
    b.pose_joint_xy.require_shape(joint_xy_shape(), "pose_joint_xy");
    for (const auto* t : {&b.video.tensor, &b.pose.tensor, &b.pose_joint_xy}) {
        for (float v : t->data()) {
            if (!std::isfinite(v)) throw ValidationError("feature bundle holds a non-finite value");
        }
    }
    for (const auto& d : b.objects) validate_detection(d);
}

// Orthographic camera used by the synthetic provider: camera-frame x maps
// to image columns, camera-frame y (up) maps to image rows (down).
struct CameraConfig {
    double x_min = -1.5;
    double x_max = 1.5;
    double y_min = -1.0;
    double y_max = 2.0;
    PositionEncoding encoding = PositionEncoding::bilinear;

    void validate() const {
        if (!std::isfinite(x_min) || !std::isfinite(x_max) || !std::isfinite(y_min) ||
            !std::isfinite(y_max) || !(x_max > x_min) || !(y_max > y_min)) {
            throw ValidationError("camera config has zero or negative extent");
        }
    }

    std::pair<double, double> project(const Vec3& p) const {
        const double u = (p.x - x_min) / (x_max - x_min);
        const double v = (y_max - p.y) / (y_max - y_min);
        return {std::clamp(u, 0.0, 1.0), std::clamp(v, 0.0, 1.0)};
    }
};

// Fixed blur applied to the pose grid to stand in for video features:
// [1 2 1; 2 4 2; 1 2 1] / 16, zero padded.
inline constexpr std::array<double, 9> kVideoBlurKernel = {
    1.0 / 16, 2.0 / 16, 1.0 / 16, 2.0 / 16, 4.0 / 16, 2.0 / 16, 1.0 / 16, 2.0 / 16, 1.0 / 16};

// Deterministic stand-in for the trained backbones. Pose channel j at step t
// is the joint's position matrix scaled by its displacement into that step
// (step 0 uses the displacement into step 1). All values are rounded to f32
// so a bundle survives the wire format unchanged.
inline FeatureBundle synthetic_features(const SampleWindow& window, const CameraConfig& camera = {}) {
    camera.validate();
    validate_window(window);
    if (window.frames.size() != kWindowLength) {
        throw ShapeError("synthetic features need a " + std::to_string(kWindowLength) +
                         "-frame window, got " + std::to_string(window.frames.size()));
    }
    FeatureBundle b;
    b.window_index = window.window_index;
    const auto& frames = window.frames;
    for (std::size_t t = 0; t < kWindowLength; ++t) {
        for (std::size_t j = 0; j < kJointCount; ++j) {
            const auto [u, v] = camera.project(frames[t].joints[j]);
            b.pose_joint_xy.at(t, j, 0) = static_cast<float>(u);
            b.pose_joint_xy.at(t, j, 1) = static_cast<float>(v);
            const std::size_t t0 = t == 0 ? 0 : t - 1;
            const std::size_t t1 = t == 0 ? 1 : t;
            const double disp = (frames[t1].joints[j] - frames[t0].joints[j]).norm();
            if (disp == 0.0) continue;
            const auto m = spatial_position_matrix(u, v, camera.encoding);
            for (std::size_t r = 0; r < kGridSide; ++r) {
                for (std::size_t c = 0; c < kGridSide; ++c) {
                    b.pose.tensor.at(t, j, r, c) = static_cast<float>(disp * m.at(r, c));
                }
            }
        }
    }
    for (std::size_t t = 0; t < kWindowLength; ++t) {
        for (std::size_t ch = 0; ch < kFeatureChannels; ++ch) {
            for (std::size_t r = 0; r < kGridSide; ++r) {
                for (std::size_t c = 0; c < kGridSide; ++c) {
                    double acc = 0.0;
                    for (int dr = -1; dr <= 1; ++dr) {
                        for (int dc = -1; dc <= 1; ++dc) {
                            const auto rr = static_cast<long>(r) + dr;
                            const auto cc = static_cast<long>(c) + dc;
                            if (rr < 0 || cc < 0 || rr >= static_cast<long>(kGridSide) ||
                                cc >= static_cast<long>(kGridSide)) {
                                continue;
                            }
                            acc += kVideoBlurKernel[(dr + 1) * 3 + (dc + 1)] *
                                   b.pose.tensor.at(t, ch, rr, cc);
                        }
                    }
                    b.video.tensor.at(t, ch, r, c) = static_cast<float>(acc);
                }
            }
        }
    }
    return b;
}

inline std::string encode_feature_bundle(const FeatureBundle& bundle) {
    validate_bundle(bundle);
    nlohmann::json objects = nlohmann::json::array();
    for (const auto& d : bundle.objects) {
        objects.push_back(
            {{"class_id", d.class_id}, {"x", d.x}, {"y", d.y}, {"confidence", d.confidence}});
    }
    return wire::encode(kFeatureFormat, {{"window_index", bundle.window_index}},
                        {{"video", bundle.video.tensor},
                         {"pose", bundle.pose.tensor},
                         {"pose_joint_xy", bundle.pose_joint_xy}},
                        nlohmann::json{{"objects", std::move(objects)}});
}

inline FeatureBundle decode_feature_bundle(const std::string& bytes) {
    wire::require_declared_shapes(bytes, {{"video", feature_grid_shape()},
                                          {"pose", feature_grid_shape()},
                                          {"pose_joint_xy", joint_xy_shape()}});
    const auto file = wire::decode(bytes, kFeatureFormat, true);
    FeatureBundle b;
    b.window_index = file.header.value("window_index", std::size_t{0});
    const auto expect = [&](const std::string& name, const Shape& shape) {
        const auto& t = file.get(name);
        if (t.shape() != shape) {
            throw ShapeError("shape mismatch for \"" + name + "\": expected " + shape_string(shape) +
                             ", found " + shape_string(t.shape()));
        }
        return t;
    };
    b.video.tensor = expect("video", feature_grid_shape());
    b.pose.tensor = expect("pose", feature_grid_shape());
    b.pose_joint_xy = expect("pose_joint_xy", joint_xy_shape());
    try {
        for (const auto& o : file.trailer->at("objects")) {
            b.objects.push_back({o.at("class_id").get<int>(), o.at("x").get<double>(),
                                 o.at("y").get<double>(), o.at("confidence").get<double>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw CorruptionError(std::string("object trailer malformed: ") + e.what());
    }
    validate_bundle(b);
    return b;
}

inline void store_feature_bundle(const FeatureBundle& bundle, const std::string& path) {
    wire::write_file(path, encode_feature_bundle(bundle));
}

inline FeatureBundle load_feature_bundle(const std::string& path) {
    return decode_feature_bundle(wire::read_file(path));
}

// Object vocabulary: one "<class_id> <name>" per line, '#' starts a comment.
inline std::vector<std::string> load_object_vocabulary(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open object vocabulary " + path);
    std::vector<std::string> names(kObjectClasses);
    std::vector<bool> seen(kObjectClasses, false);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream fields(line);
        int id = -1;
        if (!(fields >> id)) continue;
        std::string name;
        std::getline(fields >> std::ws, name);
        while (!name.empty() && std::isspace(static_cast<unsigned char>(name.back()))) name.pop_back();
        if (id < 0 || id >= static_cast<int>(kObjectClasses) || name.empty()) {
            throw ParseError(line_no, "expected \"<id in [0,38)> <name>\"");
        }
        if (seen[id]) throw ParseError(line_no, "duplicate object id " + std::to_string(id));
        seen[id] = true;
        names[id] = name;
    }
    for (std::size_t i = 0; i < kObjectClasses; ++i) {
        if (!seen[i]) throw ValidationError("object vocabulary lacks id " + std::to_string(i));
    }
    return names;
}

}  // namespace adlsense

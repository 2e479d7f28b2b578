#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "adlsense/error.hpp"

namespace adlsense {

inline constexpr std::size_t kJointCount = 19;
inline constexpr std::size_t kWindowLength = 16;

// NuiTrack joint subset. Torso is not tracked; collars are tracked per side.
enum class Joint : std::size_t {
    head,
    neck,
    waist,
    left_collar,
    left_shoulder,
    left_elbow,
    left_wrist,
    left_hand,
    right_collar,
    right_shoulder,
    right_elbow,
    right_wrist,
    right_hand,
    left_hip,
    left_knee,
    left_ankle,
    right_hip,
    right_knee,
    right_ankle,
};

inline constexpr std::array<std::string_view, kJointCount> kJointNames = {
    "head",         "neck",          "waist",       "left_collar", "left_shoulder",
    "left_elbow",   "left_wrist",    "left_hand",   "right_collar", "right_shoulder",
    "right_elbow",  "right_wrist",   "right_hand",  "left_hip",    "left_knee",
    "left_ankle",   "right_hip",     "right_knee",  "right_ankle",
};

constexpr std::size_t index_of(Joint j) noexcept { return static_cast<std::size_t>(j); }

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend Vec3 operator-(const Vec3& a, const Vec3& b) noexcept {
        return {a.x - b.x, a.y - b.y, a.z - b.z};
    }
    friend Vec3 operator+(const Vec3& a, const Vec3& b) noexcept {
        return {a.x + b.x, a.y + b.y, a.z + b.z};
    }
    friend Vec3 operator*(double s, const Vec3& a) noexcept { return {s * a.x, s * a.y, s * a.z}; }
    friend bool operator==(const Vec3&, const Vec3&) = default;

    double norm() const noexcept { return std::sqrt(x * x + y * y + z * z); }
    bool finite() const noexcept {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
};

struct SkeletonFrame {
    double timestamp = 0.0;  // seconds
    std::array<Vec3, kJointCount> joints{};
    std::optional<std::array<double, kJointCount>> confidence;
    std::optional<std::string> video_ref;
    std::optional<std::string> image_ref;

    friend bool operator==(const SkeletonFrame&, const SkeletonFrame&) = default;
};

inline void validate_frame(const SkeletonFrame& frame) {
    if (!std::isfinite(frame.timestamp)) {
        throw ValidationError("frame timestamp is not finite");
    }
    for (std::size_t j = 0; j < kJointCount; ++j) {
        if (!frame.joints[j].finite()) {
            throw ValidationError("joint " + std::string(kJointNames[j]) +
                                  " has a non-finite coordinate");
        }
    }
    if (frame.confidence) {
        for (std::size_t j = 0; j < kJointCount; ++j) {
            const double c = (*frame.confidence)[j];
            if (!(c >= 0.0 && c <= 1.0)) {
                throw ValidationError("joint " + std::string(kJointNames[j]) +
                                      " confidence outside [0,1]");
            }
        }
    }
}

struct SamplerConfig {
    double input_rate = 30.0;       // frames per second of the source stream
    std::size_t sample_stride = 6;  // input frames between retained samples
    std::size_t window_len = kWindowLength;
    std::size_t emit_every = 1;     // retained samples between emitted windows

    void validate() const {
        if (!(input_rate > 0.0) || sample_stride == 0 || window_len < 2 || emit_every == 0) {
            throw ValidationError("sampler config values must be positive (window_len >= 2)");
        }
    }
};

struct SampleWindow {
    std::vector<SkeletonFrame> frames;
    // Index of each frame among the accepted input frames of the session.
    std::vector<std::size_t> input_indices;
    std::optional<std::vector<std::string>> video_refs;
    std::optional<std::string> still_ref;
    std::size_t window_index = 0;

    double end_time() const { return frames.back().timestamp; }

    friend bool operator==(const SampleWindow&, const SampleWindow&) = default;
};

inline void validate_window(const SampleWindow& window) {
    if (window.frames.size() < 2) {
        throw ValidationError("window needs at least two frames, has " +
                              std::to_string(window.frames.size()));
    }
    for (std::size_t i = 0; i < window.frames.size(); ++i) {
        validate_frame(window.frames[i]);
        if (i > 0 && !(window.frames[i].timestamp > window.frames[i - 1].timestamp)) {
            throw ValidationError("window timestamps not strictly increasing at frame " +
                                  std::to_string(i));
        }
    }
}

// Multimodal rolling-window sampler. Keeps every sample_stride-th accepted
// frame and, once window_len samples are held, emits the most recent
// window_len of them every emit_every retained samples.
class RollingSampler {
public:
    explicit RollingSampler(SamplerConfig config = {}) : config_(config) { config_.validate(); }

    const SamplerConfig& config() const noexcept { return config_; }
    std::size_t accepted_frames() const noexcept { return accepted_; }
    std::size_t retained_samples() const noexcept { return retained_; }
    std::size_t windows_emitted() const noexcept { return emitted_; }

    // Throws OrderError or ValidationError and leaves the state untouched.
    std::optional<SampleWindow> push_frame(const SkeletonFrame& frame) {
        validate_frame(frame);
        if (last_timestamp_ && !(frame.timestamp > *last_timestamp_)) {
            throw OrderError(*last_timestamp_, frame.timestamp);
        }
        last_timestamp_ = frame.timestamp;
        const std::size_t input_index = accepted_++;
        if (input_index % config_.sample_stride != 0) return std::nullopt;

        buffer_.push_back({input_index, frame});
        if (buffer_.size() > config_.window_len) buffer_.pop_front();
        const std::size_t retained_index = retained_++;
        if (retained_index + 1 < config_.window_len) return std::nullopt;
        if ((retained_index + 1 - config_.window_len) % config_.emit_every != 0) return std::nullopt;
        return make_window();
    }

    void reset() {
        buffer_.clear();
        last_timestamp_.reset();
        accepted_ = retained_ = emitted_ = 0;
    }

private:
    struct Retained {
        std::size_t input_index;
        SkeletonFrame frame;
    };

    SampleWindow make_window() {
        SampleWindow w;
        w.window_index = emitted_++;
        w.frames.reserve(buffer_.size());
        w.input_indices.reserve(buffer_.size());
        bool all_video = true;
        for (const auto& r : buffer_) {
            w.frames.push_back(r.frame);
            w.input_indices.push_back(r.input_index);
            all_video = all_video && r.frame.video_ref.has_value();
        }
        if (all_video) {
            std::vector<std::string> refs;
            for (const auto& r : buffer_) refs.push_back(*r.frame.video_ref);
            w.video_refs = std::move(refs);
        }
        w.still_ref = buffer_.back().frame.image_ref;
        return w;
    }

    SamplerConfig config_;
    std::deque<Retained> buffer_;
    std::optional<double> last_timestamp_;
    std::size_t accepted_ = 0;
    std::size_t retained_ = 0;
    std::size_t emitted_ = 0;
};

// Replays frames through a fresh sampler and collects every window.
inline std::vector<SampleWindow> sample_windows(const std::vector<SkeletonFrame>& frames,
                                                const SamplerConfig& config = {}) {
    RollingSampler sampler(config);
    std::vector<SampleWindow> windows;
    for (const auto& f : frames) {
        if (auto w = sampler.push_frame(f)) windows.push_back(std::move(*w));
    }
    return windows;
}

}  // namespace adlsense

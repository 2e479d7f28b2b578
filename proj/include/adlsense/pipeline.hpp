#pragma once

#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "adlsense/assist_policy.hpp"
#include "adlsense/error.hpp"
#include "adlsense/features.hpp"
#include "adlsense/fusion.hpp"
#include "adlsense/motion_gate.hpp"
#include "adlsense/skeleton.hpp"
#include "adlsense/state_estimator.hpp"

namespace adlsense {

// Source of backbone features for a sampled window.
class FeatureProvider {
public:
    virtual ~FeatureProvider() = default;
    virtual FeatureBundle features(const SampleWindow& window) = 0;
};

class SyntheticProvider final : public FeatureProvider {
public:
    explicit SyntheticProvider(CameraConfig camera = {}) : camera_(camera) { camera_.validate(); }

    FeatureBundle features(const SampleWindow& window) override {
        return synthetic_features(window, camera_);
    }

private:
    CameraConfig camera_;
};

inline std::string feature_file_name(std::size_t window_index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "window_%06zu.adlf", window_index);
    return buf;
}

// Reads bundles exported per window as <dir>/window_NNNNNN.adlf.
class FileProvider final : public FeatureProvider {
public:
    explicit FileProvider(std::filesystem::path dir) : dir_(std::move(dir)) {
        if (!std::filesystem::is_directory(dir_)) {
            throw IoError("feature directory " + dir_.string() + " does not exist");
        }
    }

    FeatureBundle features(const SampleWindow& window) override {
        const auto path = dir_ / feature_file_name(window.window_index);
        auto bundle = load_feature_bundle(path.string());
        if (bundle.window_index != window.window_index) {
            throw ValidationError(path.string() + " holds window " + std::to_string(bundle.window_index) +
                                  ", expected " + std::to_string(window.window_index));
        }
        return bundle;
    }

private:
    std::filesystem::path dir_;
};

struct PipelineOptions {
    SamplerConfig sampler;
    PositionEncoding encoding = PositionEncoding::bilinear;
    double cooldown = 10.0;
    bool update_space = false;  // add seen embeddings to E as they are decided
};

struct StepResult {
    std::size_t window_index = 0;
    MotionEmbedding motion;
    double motion_avg = 0.0;
    AdlDecision decision;
    AssistEvent event;
    std::optional<AdlEmbedding> embedding;
};

inline nlohmann::json decision_record(const StepResult& r) {
    auto j = to_json(r.decision);
    j["window"] = r.window_index;
    j["motion_avg"] = r.motion_avg;
    j["motion"] = r.motion.per_joint;
    // kept for operator review of new activities
    if (r.decision.type == AdlType::unseen && r.embedding) {
        j["embedding"] = std::vector<double>(r.embedding->begin(), r.embedding->end());
    }
    return j;
}

// sampler -> motion gate -> features -> fusion -> state estimator -> assist policy
class Pipeline {
public:
    Pipeline(const FusionWeights& weights, EmbeddingSpace& space, AssistPolicy policy,
             FeatureProvider& provider, PipelineOptions options = {})
        : weights_(weights),
          space_(space),
          policy_(std::move(policy)),
          provider_(provider),
          options_(options),
          sampler_(options.sampler) {}

    std::optional<StepResult> push(const SkeletonFrame& frame) {
        std::optional<SampleWindow> window;
        try {
            window = sampler_.push_frame(frame);
        } catch (const Error& e) {
            throw StageError("sampler", e.what());
        }
        if (!window) return std::nullopt;
        return process(*window);
    }

    StepResult process(const SampleWindow& window) {
        StepResult r;
        r.window_index = window.window_index;
        bool m_adl = false;
        try {
            r.motion = compute_motion_embedding(window);
            r.motion_avg = average_motion(r.motion);
            m_adl = classify_motion(r.motion, space_.gate());
        } catch (const Error& e) {
            throw StageError("motion-gate", e.what());
        }
        std::optional<int> head_class;
        if (m_adl) {
            FeatureBundle bundle;
            try {
                bundle = provider_.features(window);
            } catch (const Error& e) {
                throw StageError("features", e.what());
            }
            try {
                const auto fr = forward_bundle(bundle, weights_, options_.encoding);
                r.embedding = fr.embedding;
                head_class = static_cast<int>(fr.task.argmax());
            } catch (const Error& e) {
                throw StageError("fusion", e.what());
            }
        }
        try {
            r.decision = space_.decide(m_adl, r.embedding, head_class, window.end_time());
            if (options_.update_space && r.decision.type == AdlType::seen) {
                space_.add_embedding(*r.decision.class_id, *r.embedding);
            }
        } catch (const Error& e) {
            throw StageError("state-estimator", e.what());
        }
        try {
            r.event = policy_.select(r.decision);
        } catch (const Error& e) {
            throw StageError("assist-policy", e.what());
        }
        return r;
    }

private:
    const FusionWeights& weights_;
    EmbeddingSpace& space_;
    AssistPolicy policy_;
    FeatureProvider& provider_;
    PipelineOptions options_;
    RollingSampler sampler_;
};

// Per-window embeddings of a whole session, ungated; used for calibration.
struct WindowEmbedding {
    std::size_t window_index = 0;
    double motion_avg = 0.0;
    AdlEmbedding embedding{};
};

inline std::vector<WindowEmbedding> embed_session(const std::vector<SkeletonFrame>& frames,
                                                  const FusionWeights& weights, FeatureProvider& provider,
                                                  const PipelineOptions& options = {}) {
    std::vector<WindowEmbedding> out;
    for (const auto& w : sample_windows(frames, options.sampler)) {
        WindowEmbedding we;
        we.window_index = w.window_index;
        we.motion_avg = average_motion(compute_motion_embedding(w));
        we.embedding = forward_bundle(provider.features(w), weights, options.encoding).embedding;
        out.push_back(we);
    }
    return out;
}

}  // namespace adlsense

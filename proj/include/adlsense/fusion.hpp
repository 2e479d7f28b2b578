#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "adlsense/error.hpp"
#include "adlsense/features.hpp"
#include "adlsense/tensor.hpp"
#include "adlsense/wire_format.hpp"

namespace adlsense {

inline constexpr std::size_t kEmbeddingDim = 128;
inline constexpr std::size_t kFusedSteps = kWindowLength + 1;   // 16 feature steps + objects
inline constexpr std::size_t kFusedChannels = 2 * kFeatureChannels;  // 38
inline constexpr std::size_t kDefaultTaskClasses = 11;
inline constexpr const char* kWeightsFormat = "adlsense-weights";

using AdlEmbedding = std::array<double, kEmbeddingDim>;

inline const Shape& fused_shape() {
    static const Shape shape{kFusedSteps, kFusedChannels, kGridSide, kGridSide};
    return shape;
}

enum class Activation { linear, relu };

inline double activate(double v, Activation a) noexcept {
    return a == Activation::relu ? std::max(v, 0.0) : v;
}

inline std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "linear"; }

inline Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "linear") return Activation::linear;
    throw ValidationError("unknown activation \"" + s + "\"");
}

struct Conv2dLayer {
    Tensor<float> weight;  // out x in x kh x kw
    Tensor<float> bias;    // out
    std::size_t stride = 1;
    std::size_t padding = 0;
    Activation activation = Activation::linear;
};

struct Conv1dLayer {
    Tensor<float> weight;  // out x in x k
    Tensor<float> bias;    // out
    std::size_t stride = 1;
    std::size_t padding = 0;
    Activation activation = Activation::linear;
};

struct DenseLayer {
    Tensor<float> weight;  // out x in
    Tensor<float> bias;    // out
    Activation activation = Activation::linear;
};

namespace detail {

inline std::size_t conv_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding, const char* what) {
    if (stride == 0) throw ShapeError(std::string(what) + ": stride must be positive");
    if (in + 2 * padding < kernel) {
        throw ShapeError(std::string(what) + ": kernel " + std::to_string(kernel) +
                         " larger than padded input " + std::to_string(in + 2 * padding));
    }
    return (in + 2 * padding - kernel) / stride + 1;
}

}  // namespace detail

// Cross-correlation over a C_in x H x W input; accumulation in double.
template <typename T>
Tensor<double> conv2d_forward(const Tensor<T>& input, const Conv2dLayer& layer) {
    if (input.rank() != 3 || layer.weight.rank() != 4) {
        throw ShapeError("conv2d: expected C x H x W input and 4-d kernel, got input " +
                         shape_string(input.shape()) + ", kernel " +
                         shape_string(layer.weight.shape()));
    }
    const std::size_t c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
    const std::size_t c_out = layer.weight.dim(0), kh = layer.weight.dim(2), kw = layer.weight.dim(3);
    if (layer.weight.dim(1) != c_in) {
        throw ShapeError("conv2d: kernel expects " + std::to_string(layer.weight.dim(1)) +
                         " input channels, input has " + std::to_string(c_in));
    }
    if (layer.bias.size() != c_out) {
        throw ShapeError("conv2d: bias has " + std::to_string(layer.bias.size()) +
                         " entries for " + std::to_string(c_out) + " output channels");
    }
    const auto s = layer.stride, p = layer.padding;
    const std::size_t oh = detail::conv_extent(h, kh, s, p, "conv2d"),
                      ow = detail::conv_extent(w, kw, s, p, "conv2d");
    Tensor<double> out({c_out, oh, ow});
    const float* wt = layer.weight.data().data();
    const T* in = input.data().data();
    for (std::size_t oy = 0; oy < oh; ++oy) {
        // kernel rows that land inside the unpadded input
        const std::size_t top = oy * s;
        const std::size_t ky_lo = top < p ? p - top : 0;
        const std::size_t ky_hi = std::min(kh, h + p - top);
        for (std::size_t ox = 0; ox < ow; ++ox) {
            const std::size_t left = ox * s;
            const std::size_t kx_lo = left < p ? p - left : 0;
            const std::size_t kx_hi = std::min(kw, w + p - left);
            for (std::size_t oc = 0; oc < c_out; ++oc) {
                double acc = layer.bias[oc];
                for (std::size_t ic = 0; ic < c_in; ++ic) {
                    const float* wk = wt + (oc * c_in + ic) * kh * kw;
                    const T* plane = in + ic * h * w;
                    for (std::size_t ky = ky_lo; ky < ky_hi; ++ky) {
                        const T* row = plane + (top + ky - p) * w;
                        for (std::size_t kx = kx_lo; kx < kx_hi; ++kx) {
                            acc += static_cast<double>(wk[ky * kw + kx]) * static_cast<double>(row[left + kx - p]);
                        }
                    }
                }
                out.at(oc, oy, ox) = activate(acc, layer.activation);
            }
        }
    }
    return out;
}

// Cross-correlation over a C_in x T sequence.
template <typename T>
Tensor<double> conv1d_forward(const Tensor<T>& input, const Conv1dLayer& layer) {
    if (input.rank() != 2 || layer.weight.rank() != 3) {
        throw ShapeError("conv1d: expected C x T input and 3-d kernel, got input " +
                         shape_string(input.shape()) + ", kernel " +
                         shape_string(layer.weight.shape()));
    }
    const std::size_t c_in = input.dim(0), len = input.dim(1);
    const std::size_t c_out = layer.weight.dim(0), k = layer.weight.dim(2);
    if (layer.weight.dim(1) != c_in) {
        throw ShapeError("conv1d: kernel expects " + std::to_string(layer.weight.dim(1)) +
                         " input channels, input has " + std::to_string(c_in));
    }
    if (layer.bias.size() != c_out) {
        throw ShapeError("conv1d: bias has " + std::to_string(layer.bias.size()) +
                         " entries for " + std::to_string(c_out) + " output channels");
    }
    const auto s = layer.stride, p = layer.padding;
    const std::size_t out_len = detail::conv_extent(len, k, s, p, "conv1d");
    Tensor<double> out({c_out, out_len});
    const float* wt = layer.weight.data().data();
    const T* in = input.data().data();
    for (std::size_t ot = 0; ot < out_len; ++ot) {
        const std::size_t start = ot * s;
        const std::size_t k_lo = start < p ? p - start : 0;
        const std::size_t k_hi = std::min(k, len + p - start);
        for (std::size_t oc = 0; oc < c_out; ++oc) {
            double acc = layer.bias[oc];
            for (std::size_t ic = 0; ic < c_in; ++ic) {
                const float* wk = wt + (oc * c_in + ic) * k;
                const T* seq = in + ic * len;
                for (std::size_t kk = k_lo; kk < k_hi; ++kk) {
                    acc += static_cast<double>(wk[kk]) * static_cast<double>(seq[start + kk - p]);
                }
            }
            out.at(oc, ot) = activate(acc, layer.activation);
        }
    }
    return out;
}

template <typename T>
std::vector<double> dense_forward(std::span<const T> input, const DenseLayer& layer) {
    if (layer.weight.rank() != 2 || layer.weight.dim(1) != input.size() ||
        layer.bias.size() != layer.weight.dim(0)) {
        throw ShapeError("dense: weight " + shape_string(layer.weight.shape()) + ", bias " +
                         shape_string(layer.bias.shape()) + " do not fit an input of " +
                         std::to_string(input.size()));
    }
    const std::size_t n_out = layer.weight.dim(0);
    std::vector<double> out(n_out);
    for (std::size_t o = 0; o < n_out; ++o) {
        double acc = layer.bias[o];
        const float* row = layer.weight.data().data() + o * input.size();
        for (std::size_t i = 0; i < input.size(); ++i) {
            acc += static_cast<double>(row[i]) * static_cast<double>(input[i]);
        }
        out[o] = activate(acc, layer.activation);
    }
    return out;
}

// out[t][j] = pose[t][j] * position(t, j), a 6x6 matrix product with the
// feature grid on the left.
template <typename T, typename PositionFn>
Tensor<double> apply_position_matrices(const Tensor<T>& pose, PositionFn&& position) {
    pose.require_shape(feature_grid_shape(), "pose grid");
    Tensor<double> out(pose.shape());
    for (std::size_t t = 0; t < kWindowLength; ++t) {
        for (std::size_t j = 0; j < kFeatureChannels; ++j) {
            const SpatialMatrix m = position(t, j);
            for (std::size_t r = 0; r < kGridSide; ++r) {
                for (std::size_t c = 0; c < kGridSide; ++c) {
                    double acc = 0.0;
                    for (std::size_t k = 0; k < kGridSide; ++k) {
                        acc += static_cast<double>(pose.at(t, j, r, k)) * m.at(k, c);
                    }
                    out.at(t, j, r, c) = acc;
                }
            }
        }
    }
    return out;
}

inline Tensor<double> apply_spatial_reference(const FeatureGrid& pose,
                                              const Tensor<float>& pose_joint_xy,
                                              PositionEncoding encoding = PositionEncoding::bilinear) {
    pose_joint_xy.require_shape(joint_xy_shape(), "pose_joint_xy");
    return apply_position_matrices(pose.tensor, [&](std::size_t t, std::size_t j) {
        return spatial_position_matrix(pose_joint_xy.at(t, j, 0), pose_joint_xy.at(t, j, 1),
                                       encoding);
    });
}

// Steps 0..15 carry video (channels 0..18) and spatially referenced pose
// (channels 19..37); step 16 carries the 38 object slices.
template <typename V, typename P>
Tensor<double> concat_modalities(const Tensor<V>& video, const Tensor<P>& pose_ref,
                                 const Tensor<double>& objects) {
    video.require_shape(feature_grid_shape(), "concat: video");
    pose_ref.require_shape(feature_grid_shape(), "concat: pose_ref");
    objects.require_shape({1, kObjectClasses, kGridSide, kGridSide}, "concat: objects");
    Tensor<double> fused(fused_shape());
    constexpr std::size_t cells = kGridSide * kGridSide;
    for (std::size_t t = 0; t < kWindowLength; ++t) {
        for (std::size_t ch = 0; ch < kFeatureChannels; ++ch) {
            for (std::size_t i = 0; i < cells; ++i) {
                fused[((t * kFusedChannels) + ch) * cells + i] =
                    video[(t * kFeatureChannels + ch) * cells + i];
                fused[((t * kFusedChannels) + kFeatureChannels + ch) * cells + i] =
                    pose_ref[(t * kFeatureChannels + ch) * cells + i];
            }
        }
    }
    for (std::size_t i = 0; i < kObjectClasses * cells; ++i) {
        fused[kWindowLength * kFusedChannels * cells + i] = objects[i];
    }
    return fused;
}

struct ConvSpec {
    std::size_t out_channels = 0;
    std::size_t kernel = 3;
    std::size_t stride = 1;
    std::size_t padding = 1;
    Activation activation = Activation::relu;

    friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

// Layer hyperparameters; serialized in the weights header.
struct PipelineConfig {
    ConvSpec conv2d{64, 3, 1, 1, Activation::relu};
    ConvSpec conv1d{128, 3, 1, 1, Activation::relu};
    Activation embed_activation = Activation::linear;
    std::size_t num_classes = kDefaultTaskClasses;

    std::size_t conv2d_out_side() const {
        return detail::conv_extent(kGridSide, conv2d.kernel, conv2d.stride, conv2d.padding,
                                   "conv2d");
    }
    std::size_t conv1d_in_channels() const {
        const auto side = conv2d_out_side();
        return conv2d.out_channels * side * side;
    }

    friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

struct FusionWeights {
    PipelineConfig config;
    Conv2dLayer conv2d;
    Conv1dLayer conv1d;
    DenseLayer embed;
    DenseLayer head;

    // Checks every tensor against the declared config; names the offending stage.
    void validate() const {
        const auto& c = config;
        if (c.conv2d.out_channels == 0 || c.conv1d.out_channels == 0 || c.num_classes < 2) {
            throw ShapeError("pipeline config: channel counts must be positive, classes >= 2");
        }
        const auto expect = [](const Tensor<float>& t, const Shape& s, const std::string& what) {
            t.require_shape(s, what);
            for (float v : t.data()) {
                if (!std::isfinite(v)) throw ValidationError(what + " holds a non-finite value");
            }
        };
        expect(conv2d.weight,
               {c.conv2d.out_channels, kFusedChannels, c.conv2d.kernel, c.conv2d.kernel},
               "conv2d.weight");
        expect(conv2d.bias, {c.conv2d.out_channels}, "conv2d.bias");
        expect(conv1d.weight, {c.conv1d.out_channels, c.conv1d_in_channels(), c.conv1d.kernel},
               "conv1d.weight");
        expect(conv1d.bias, {c.conv1d.out_channels}, "conv1d.bias");
        detail::conv_extent(kFusedSteps, c.conv1d.kernel, c.conv1d.stride, c.conv1d.padding,
                            "conv1d");
        expect(embed.weight, {kEmbeddingDim, c.conv1d.out_channels}, "embed.weight");
        expect(embed.bias, {kEmbeddingDim}, "embed.bias");
        expect(head.weight, {c.num_classes, kEmbeddingDim}, "head.weight");
        expect(head.bias, {c.num_classes}, "head.bias");
    }
};

// Builds layer structs (stride, padding, activation) from the config around
// the given tensors.
inline void apply_config(FusionWeights& w) {
    w.conv2d.stride = w.config.conv2d.stride;
    w.conv2d.padding = w.config.conv2d.padding;
    w.conv2d.activation = w.config.conv2d.activation;
    w.conv1d.stride = w.config.conv1d.stride;
    w.conv1d.padding = w.config.conv1d.padding;
    w.conv1d.activation = w.config.conv1d.activation;
    w.embed.activation = w.config.embed_activation;
    w.head.activation = Activation::linear;
}

// Spatial conv per step, flatten, temporal conv, mean over time, dense to 128.
inline AdlEmbedding fuse(const Tensor<double>& fused, const FusionWeights& w) {
    fused.require_shape(fused_shape(), "fuse: input");
    constexpr std::size_t slab = kFusedChannels * kGridSide * kGridSide;
    Tensor<double> sequence;
    for (std::size_t t = 0; t < kFusedSteps; ++t) {
        Tensor<double> step({kFusedChannels, kGridSide, kGridSide},
                            std::vector<double>(fused.data().begin() + t * slab,
                                                fused.data().begin() + (t + 1) * slab));
        Tensor<double> spatial;
        try {
            spatial = conv2d_forward(step, w.conv2d);
        } catch (const ShapeError& e) {
            throw StageError("fuse/conv2d", e.what());
        }
        if (t == 0) sequence = Tensor<double>({spatial.size(), kFusedSteps});
        for (std::size_t f = 0; f < spatial.size(); ++f) sequence.at(f, t) = spatial[f];
    }
    Tensor<double> temporal;
    try {
        temporal = conv1d_forward(sequence, w.conv1d);
    } catch (const ShapeError& e) {
        throw StageError("fuse/conv1d", e.what());
    }
    std::vector<double> pooled(temporal.dim(0), 0.0);
    for (std::size_t c = 0; c < temporal.dim(0); ++c) {
        for (std::size_t t = 0; t < temporal.dim(1); ++t) pooled[c] += temporal.at(c, t);
        pooled[c] /= static_cast<double>(temporal.dim(1));
    }
    std::vector<double> embedded;
    try {
        embedded = dense_forward<double>(pooled, w.embed);
    } catch (const ShapeError& e) {
        throw StageError("fuse/embed", e.what());
    }
    if (embedded.size() != kEmbeddingDim) {
        throw StageError("fuse/embed", "embedding has " + std::to_string(embedded.size()) +
                                           " entries, expected " + std::to_string(kEmbeddingDim));
    }
    AdlEmbedding e{};
    std::copy(embedded.begin(), embedded.end(), e.begin());
    return e;
}

struct TaskVector {
    std::vector<double> probs;

    std::size_t argmax() const {
        return static_cast<std::size_t>(
            std::distance(probs.begin(), std::max_element(probs.begin(), probs.end())));
    }
};

inline TaskVector softmax(const std::vector<double>& logits) {
    TaskVector out;
    if (logits.empty()) return out;
    const double top = *std::max_element(logits.begin(), logits.end());
    out.probs.resize(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out.probs[i] = std::exp(logits[i] - top);
        total += out.probs[i];
    }
    for (auto& p : out.probs) p /= total;
    return out;
}

inline TaskVector classify_head(const AdlEmbedding& e, const FusionWeights& w) {
    return softmax(dense_forward<double>(e, w.head));
}

struct ForwardResult {
    AdlEmbedding embedding{};
    TaskVector task;
};

// Full mid-fusion forward for one bundle.
inline ForwardResult forward_bundle(const FeatureBundle& bundle, const FusionWeights& w,
                                    PositionEncoding encoding = PositionEncoding::bilinear) {
    const auto objects = objects_to_grid(bundle.objects, encoding);
    const auto pose_ref = apply_spatial_reference(bundle.pose, bundle.pose_joint_xy, encoding);
    const auto fused = concat_modalities(bundle.video.tensor, pose_ref, objects);
    ForwardResult r;
    r.embedding = fuse(fused, w);
    r.task = classify_head(r.embedding, w);
    return r;
}

// Uniform draws from mt19937_64 mapped by hand so the stream is identical
// on every standard library.
class WeightInitializer {
public:
    explicit WeightInitializer(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) {
        const double unit = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
        return lo + (hi - lo) * unit;
    }

    Tensor<float> tensor(Shape shape, double bound) {
        Tensor<float> t(std::move(shape));
        for (auto& v : t.data()) v = static_cast<float>(uniform(-bound, bound));
        return t;
    }

private:
    std::mt19937_64 rng_;
};

// He-uniform kernels (bound sqrt(6 / fan_in)), small uniform biases.
inline FusionWeights random_weights(std::uint64_t seed, const PipelineConfig& config = {}) {
    WeightInitializer init(seed);
    FusionWeights w;
    w.config = config;
    const auto& c = config;
    const auto he = [](std::size_t fan_in) { return std::sqrt(6.0 / static_cast<double>(fan_in)); };
    const std::size_t f2 = kFusedChannels * c.conv2d.kernel * c.conv2d.kernel;
    w.conv2d.weight = init.tensor({c.conv2d.out_channels, kFusedChannels, c.conv2d.kernel,
                                   c.conv2d.kernel},
                                  he(f2));
    w.conv2d.bias = init.tensor({c.conv2d.out_channels}, 0.01);
    const std::size_t f1 = c.conv1d_in_channels() * c.conv1d.kernel;
    w.conv1d.weight =
        init.tensor({c.conv1d.out_channels, c.conv1d_in_channels(), c.conv1d.kernel}, he(f1));
    w.conv1d.bias = init.tensor({c.conv1d.out_channels}, 0.01);
    w.embed.weight = init.tensor({kEmbeddingDim, c.conv1d.out_channels}, he(c.conv1d.out_channels));
    w.embed.bias = init.tensor({kEmbeddingDim}, 0.01);
    w.head.weight = init.tensor({c.num_classes, kEmbeddingDim}, he(kEmbeddingDim));
    w.head.bias = init.tensor({c.num_classes}, 0.01);
    apply_config(w);
    w.validate();
    return w;
}

inline nlohmann::json to_json(const ConvSpec& s) {
    return {{"out_channels", s.out_channels},
            {"kernel", s.kernel},
            {"stride", s.stride},
            {"padding", s.padding},
            {"activation", to_string(s.activation)}};
}

inline ConvSpec conv_spec_from_json(const nlohmann::json& j) {
    ConvSpec s;
    s.out_channels = j.at("out_channels").get<std::size_t>();
    s.kernel = j.at("kernel").get<std::size_t>();
    s.stride = j.at("stride").get<std::size_t>();
    s.padding = j.at("padding").get<std::size_t>();
    s.activation = activation_from_string(j.at("activation").get<std::string>());
    return s;
}

inline nlohmann::json to_json(const PipelineConfig& c) {
    return {{"input", {kFusedSteps, kFusedChannels, kGridSide, kGridSide}},
            {"conv2d", to_json(c.conv2d)},
            {"conv1d", to_json(c.conv1d)},
            {"temporal_pool", "mean"},
            {"embed", {{"out", kEmbeddingDim}, {"activation", to_string(c.embed_activation)}}},
            {"head", {{"classes", c.num_classes}, {"activation", "softmax"}}}};
}

inline PipelineConfig pipeline_from_json(const nlohmann::json& j) {
    PipelineConfig c;
    c.conv2d = conv_spec_from_json(j.at("conv2d"));
    c.conv1d = conv_spec_from_json(j.at("conv1d"));
    c.embed_activation = activation_from_string(j.at("embed").at("activation").get<std::string>());
    if (j.at("embed").at("out").get<std::size_t>() != kEmbeddingDim) {
        throw ShapeError("pipeline embed.out must be " + std::to_string(kEmbeddingDim));
    }
    c.num_classes = j.at("head").at("classes").get<std::size_t>();
    return c;
}

inline std::string encode_weights(const FusionWeights& w) {
    w.validate();
    return wire::encode(kWeightsFormat, {{"pipeline", to_json(w.config)}},
                        {{"conv2d.weight", w.conv2d.weight},
                         {"conv2d.bias", w.conv2d.bias},
                         {"conv1d.weight", w.conv1d.weight},
                         {"conv1d.bias", w.conv1d.bias},
                         {"embed.weight", w.embed.weight},
                         {"embed.bias", w.embed.bias},
                         {"head.weight", w.head.weight},
                         {"head.bias", w.head.bias}});
}

inline FusionWeights decode_weights(const std::string& bytes) {
    const auto file = wire::decode(bytes, kWeightsFormat, false);
    FusionWeights w;
    try {
        w.config = pipeline_from_json(file.header.at("pipeline"));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(1, std::string("pipeline block: ") + e.what());
    }
    w.conv2d.weight = file.get("conv2d.weight");
    w.conv2d.bias = file.get("conv2d.bias");
    w.conv1d.weight = file.get("conv1d.weight");
    w.conv1d.bias = file.get("conv1d.bias");
    w.embed.weight = file.get("embed.weight");
    w.embed.bias = file.get("embed.bias");
    w.head.weight = file.get("head.weight");
    w.head.bias = file.get("head.bias");
    apply_config(w);
    w.validate();
    return w;
}

inline void store_weights(const FusionWeights& w, const std::string& path) {
    wire::write_file(path, encode_weights(w));
}

inline FusionWeights load_weights(const std::string& path) {
    return decode_weights(wire::read_file(path));
}

}  // namespace adlsense

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "s2fr/tensor.hpp"

namespace s2fr {

struct ConvShape {
    int in;
    int out;
};

// conv 3x3 (10->48) + ReLU, conv 3x3 (48->24) + ReLU, conv 3x3 (24->6), plus a
// residual skip from the six upsampled 20-m input channels to the output.
inline constexpr std::array<ConvShape, 3> kFusionLayers{{{10, 48}, {48, 24}, {24, 6}}};
inline constexpr int kNetInputChannels = 10;
inline constexpr int kNetOutputChannels = 6;
inline constexpr int kSkipChannelOffset = 4;
inline constexpr int kKernelTaps = 9;
/// Rows of context a strip needs on each side for an exact tiled forward pass.
inline constexpr int kReceptiveRadius = 3;

struct AdamSettings {
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <class T>
struct ForwardCache;

/// Compact residual CNN. All parameters live in one flat vector laid out as
/// [W1, b1, W2, b2, W3, b3]; W is [out][in][3][3].
template <class T>
class BasicFusionNet {
public:
    /// He-uniform weights drawn from a seeded generator, zero biases.
    static BasicFusionNet init(std::uint64_t seed);
    /// All parameters zero: forward is the identity on the skip channels.
    static BasicFusionNet zeros();

    static std::size_t parameter_count();
    static std::size_t weight_offset(int layer);
    static std::size_t bias_offset(int layer);

    std::span<T> params() { return params_; }
    std::span<const T> params() const { return params_; }
    std::span<T> weights(int layer);
    std::span<T> bias(int layer);
    std::span<const T> weights(int layer) const;
    std::span<const T> bias(int layer) const;

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t trained_steps() const noexcept { return trained_steps_; }
    std::uint64_t adam_step_count() const noexcept { return adam_t_; }
    std::uint64_t version() const noexcept { return version_; }

    /// Call after editing params() directly; invalidates outstanding caches.
    void touch();
    void reset_optimizer();

    Tensor<T> forward(const Tensor<T>& input, ForwardCache<T>* cache = nullptr) const;
    /// forward() evaluated in horizontal strips to bound memory. Matches it up to
    /// float rounding (GEMM blocking depends on the strip height).
    Tensor<T> forward_strips(const Tensor<T>& input, int strip_rows) const;

    /// Parameter gradients for the cached forward pass given dL/d(output).
    /// Optionally also returns dL/d(input).
    std::vector<T> backward(const ForwardCache<T>& cache, const Tensor<T>& upstream,
                            Tensor<T>* input_grad = nullptr) const;

    void adam_step(std::span<const T> grads, const AdamSettings& settings);

    /// Bitwise equality of parameters, seed and step count.
    bool identical(const BasicFusionNet& other) const;

    void save(const std::filesystem::path& path) const;
    static BasicFusionNet load(const std::filesystem::path& path);

private:
    BasicFusionNet();

    std::vector<T> params_;
    std::vector<T> adam_m_;
    std::vector<T> adam_v_;
    std::uint64_t adam_t_ = 0;
    std::uint64_t seed_ = 0;
    std::uint64_t trained_steps_ = 0;
    std::uint64_t version_ = 0;
};

template <class T>
struct ForwardCache {
    struct Sample {
        // Input of each layer on the zero-padded grid, ((h+2)(w+2) x channels)
        // column-major: the network input, then the post-ReLU activations.
        std::array<std::vector<T>, 3> inputs;
    };
    std::vector<Sample> samples;
    int n = 0, h = 0, w = 0;
    std::uint64_t version = 0;
};

using FusionNet = BasicFusionNet<float>;

}  // namespace s2fr

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "s2fr/mtf.hpp"
#include "s2fr/raster.hpp"

namespace s2fr {

/// A vector of `depth` values per pixel, stored as `depth` planes of width x height.
struct PixelField {
    int width = 0;
    int height = 0;
    int depth = 0;
    std::vector<float> data;

    PixelField() = default;
    PixelField(int w, int h, int d)
        : width(w), height(h), depth(d), data(static_cast<std::size_t>(w) * h * d, 0.0f) {}

    std::size_t pixels() const noexcept { return static_cast<std::size_t>(width) * height; }
    std::span<float> plane(int k) { return std::span<float>(data).subspan(k * pixels(), pixels()); }
    std::span<const float> plane(int k) const { return std::span<const float>(data).subspan(k * pixels(), pixels()); }
    float at(int x, int y, int k) const { return data[k * pixels() + static_cast<std::size_t>(y) * width + x]; }
};

/// Local Pearson correlation of one 20-m band against each 10-m band.
struct CorrelationField {
    PixelField x;  // depth = number of 10-m bands
    int window_radius = 0;
};

/// Softmax weights over the 10-m bands at every pixel.
struct WeightField {
    PixelField w;
    double gamma = 0.0;
};

struct DetailEntry {
    BandId band = BandId::B5;
    std::vector<float> detail;  // 10-m grid, normalized sample units
    std::optional<CorrelationField> correlation;
    std::optional<WeightField> weights;
};

struct DetailBundle {
    int width = 0;
    int height = 0;
    double gsd = 10.0;
    std::vector<DetailEntry> entries;

    /// The detail maps as one stack on the 10-m grid (bands = the 20-m band ids).
    BandStack as_stack() const;
};

struct DetailSettings {
    double gamma = 5.0;
    int radius = 3;
    bool keep_diagnostics = false;
};

inline constexpr double kCorrelationEpsilon = 1e-9;

/// Pearson correlation over the (2r+1)^2 mirror-padded window around every
/// pixel. Windows where either variance is below 1e-9 yield 0.
std::vector<float> local_correlation(std::span<const float> a, std::span<const float> b, int width, int height,
                                     int radius);

CorrelationField correlation_field(std::span<const float> band20_up_lp, const BandStack& bands10_lp, int radius);

WeightField softmax_weights(const CorrelationField& field, double gamma);

/// D = sum_k w_k * highpass(10-m band k). The correlation step compares the
/// low-passed upsampled 20-m band with the low-passed 10-m bands.
DetailEntry build_detail_reference(const BandStack& bands10, std::span<const float> band20_up,
                                   std::span<const MtfKernel> kernels10, const MtfKernel& kernel20,
                                   const DetailSettings& settings, BandId band = BandId::B5);

/// One detail map per band of `stack20`, after upsampling it to the grid of `stack10`.
DetailBundle build_all_references(const BandStack& stack10, const BandStack& stack20,
                                  std::span<const MtfKernel> kernels10, std::span<const MtfKernel> kernels20,
                                  const DetailSettings& settings);

}  // namespace s2fr

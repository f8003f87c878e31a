#include "s2fr/detail_ref.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "s2fr/error.hpp"
#include "s2fr/plane.hpp"

namespace s2fr {

namespace {

// Separable (2r+1)^2 box sum with mirror extension.
std::vector<double> box_sum(const std::vector<double>& in, int width, int height, int r) {
    std::vector<double> vert(in.size(), 0.0);
    for (int y = 0; y < height; ++y) {
        double* dst = vert.data() + static_cast<std::size_t>(y) * width;
        for (int t = -r; t <= r; ++t) {
            const double* src = in.data() + static_cast<std::size_t>(reflect_index(y + t, height)) * width;
            for (int x = 0; x < width; ++x) dst[x] += src[x];
        }
    }
    std::vector<double> out(in.size());
    std::vector<double> padded(static_cast<std::size_t>(width) + 2 * r);
    for (int y = 0; y < height; ++y) {
        const double* row = vert.data() + static_cast<std::size_t>(y) * width;
        for (int j = 0; j < width + 2 * r; ++j) padded[j] = row[reflect_index(j - r, width)];
        double* dst = out.data() + static_cast<std::size_t>(y) * width;
        for (int x = 0; x < width; ++x) {
            double acc = 0.0;
            for (int t = 0; t <= 2 * r; ++t) acc += padded[x + t];
            dst[x] = acc;
        }
    }
    return out;
}

struct LowHigh {
    BandStack low;
    BandStack high;
};

LowHigh split_bands(const BandStack& bands10, std::span<const MtfKernel> kernels10) {
    BandStack low = lowpass(bands10, kernels10);
    BandStack high(bands10.width(), bands10.height(), bands10.bands(), bands10.gsd());
    auto in = bands10.samples();
    auto lo = low.samples();
    auto hi = high.samples();
    for (std::size_t i = 0; i < hi.size(); ++i) hi[i] = in[i] - lo[i];
    return {std::move(low), std::move(high)};
}

DetailEntry detail_from_parts(const LowHigh& parts, std::span<const float> band20_up, const MtfKernel& kernel20,
                              const DetailSettings& settings, BandId band) {
    const int width = parts.low.width(), height = parts.low.height();
    require(band20_up.size() == parts.low.pixels(), ErrorKind::Shape,
            "upsampled 20-m band does not match the 10-m grid");
    std::vector<float> band20_lp(band20_up.size());
    lowpass_plane<float>(band20_up, width, height, kernel20, band20_lp);

    CorrelationField corr = correlation_field(band20_lp, parts.low, settings.radius);
    WeightField weights = softmax_weights(corr, settings.gamma);

    DetailEntry entry;
    entry.band = band;
    entry.detail.assign(parts.low.pixels(), 0.0f);
    const int depth = parts.high.band_count();
    std::vector<std::span<const float>> hp;
    for (int k = 0; k < depth; ++k) hp.push_back(parts.high.plane(k));
    for (std::size_t i = 0; i < entry.detail.size(); ++i) {
        double acc = 0.0;
        for (int k = 0; k < depth; ++k) acc += static_cast<double>(weights.w.plane(k)[i]) * hp[k][i];
        entry.detail[i] = static_cast<float>(acc);
    }
    if (settings.keep_diagnostics) {
        entry.correlation = std::move(corr);
        entry.weights = std::move(weights);
    }
    return entry;
}

}  // namespace

BandStack DetailBundle::as_stack() const {
    std::vector<BandId> bands;
    for (const auto& e : entries) bands.push_back(e.band);
    BandStack out(width, height, bands, gsd);
    for (std::size_t b = 0; b < entries.size(); ++b)
        std::copy(entries[b].detail.begin(), entries[b].detail.end(), out.plane(static_cast<int>(b)).begin());
    return out;
}

std::vector<float> local_correlation(std::span<const float> a, std::span<const float> b, int width, int height,
                                     int radius) {
    const std::size_t n = static_cast<std::size_t>(width) * height;
    require(a.size() == n && b.size() == n, ErrorKind::Shape, "correlation inputs differ in size");
    require(radius >= 1, ErrorKind::Config, "correlation radius must be >= 1");

    std::vector<double> va(n), vb(n), vaa(n), vbb(n), vab(n);
    for (std::size_t i = 0; i < n; ++i) {
        va[i] = a[i];
        vb[i] = b[i];
        vaa[i] = va[i] * va[i];
        vbb[i] = vb[i] * vb[i];
        vab[i] = va[i] * vb[i];
    }
    const auto sa = box_sum(va, width, height, radius);
    const auto sb = box_sum(vb, width, height, radius);
    const auto saa = box_sum(vaa, width, height, radius);
    const auto sbb = box_sum(vbb, width, height, radius);
    const auto sab = box_sum(vab, width, height, radius);

    const double count = static_cast<double>(2 * radius + 1) * (2 * radius + 1);
    std::vector<float> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double ma = sa[i] / count, mb = sb[i] / count;
        const double var_a = saa[i] / count - ma * ma;
        const double var_b = sbb[i] / count - mb * mb;
        if (var_a < kCorrelationEpsilon || var_b < kCorrelationEpsilon) {
            out[i] = 0.0f;
            continue;
        }
        const double cov = sab[i] / count - ma * mb;
        const double r = cov / std::max(std::sqrt(var_a * var_b), kCorrelationEpsilon);
        out[i] = static_cast<float>(std::clamp(r, -1.0, 1.0));
    }
    return out;
}

CorrelationField correlation_field(std::span<const float> band20_up_lp, const BandStack& bands10_lp, int radius) {
    require(band20_up_lp.size() == bands10_lp.pixels(), ErrorKind::Shape,
            "20-m band is not on the grid of the 10-m bands");
    CorrelationField field;
    field.window_radius = radius;
    field.x = PixelField(bands10_lp.width(), bands10_lp.height(), bands10_lp.band_count());
    std::vector<std::span<const float>> planes;
    for (int k = 0; k < bands10_lp.band_count(); ++k) planes.push_back(bands10_lp.plane(k));
#pragma omp parallel for schedule(static)
    for (int k = 0; k < bands10_lp.band_count(); ++k) {
        auto corr = local_correlation(band20_up_lp, planes[k], bands10_lp.width(), bands10_lp.height(), radius);
        std::copy(corr.begin(), corr.end(), field.x.plane(k).begin());
    }
    return field;
}

WeightField softmax_weights(const CorrelationField& field, double gamma) {
    require(gamma >= 0.0 && std::isfinite(gamma), ErrorKind::Config, "gamma must be non-negative");
    const PixelField& x = field.x;
    WeightField out;
    out.gamma = gamma;
    out.w = PixelField(x.width, x.height, x.depth);
    const std::size_t n = x.pixels();
    std::vector<double> e(x.depth);
    for (std::size_t i = 0; i < n; ++i) {
        double top = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < x.depth; ++k) top = std::max(top, gamma * x.data[k * n + i]);
        double sum = 0.0;
        for (int k = 0; k < x.depth; ++k) {
            e[k] = std::exp(gamma * x.data[k * n + i] - top);
            sum += e[k];
        }
        for (int k = 0; k < x.depth; ++k)
            out.w.data[k * n + i] = std::max(static_cast<float>(e[k] / sum), std::numeric_limits<float>::min());
    }
    return out;
}

DetailEntry build_detail_reference(const BandStack& bands10, std::span<const float> band20_up,
                                   std::span<const MtfKernel> kernels10, const MtfKernel& kernel20,
                                   const DetailSettings& settings, BandId band) {
    return detail_from_parts(split_bands(bands10, kernels10), band20_up, kernel20, settings, band);
}

DetailBundle build_all_references(const BandStack& stack10, const BandStack& stack20,
                                  std::span<const MtfKernel> kernels10, std::span<const MtfKernel> kernels20,
                                  const DetailSettings& settings) {
    require(stack20.width() > 0 && stack10.width() % stack20.width() == 0 &&
                stack10.height() % stack20.height() == 0 &&
                stack10.width() / stack20.width() == stack10.height() / stack20.height(),
            ErrorKind::Shape, "20-m stack is not an integer subsampling of the 10-m grid");
    require(kernels20.size() == static_cast<std::size_t>(stack20.band_count()), ErrorKind::Shape,
            "expected one kernel per 20-m band");
    const int ratio = stack10.width() / stack20.width();
    const BandStack up = upsample(stack20, ratio);
    const LowHigh parts = split_bands(stack10, kernels10);

    DetailBundle bundle;
    bundle.width = stack10.width();
    bundle.height = stack10.height();
    bundle.gsd = stack10.gsd();
    for (int b = 0; b < up.band_count(); ++b)
        bundle.entries.push_back(detail_from_parts(parts, up.plane(b), kernels20[b], settings, up.band(b)));
    return bundle;
}

}  // namespace s2fr

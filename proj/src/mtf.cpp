#include "s2fr/mtf.hpp"

#include <array>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "s2fr/error.hpp"
#include "s2fr/plane.hpp"

namespace s2fr {

double mtf_sigma(double nyquist_gain, int ratio) {
    require(nyquist_gain > 0.0 && nyquist_gain < 1.0, ErrorKind::Config,
            "MTF gain must lie in (0,1), got " + std::to_string(nyquist_gain));
    require(ratio >= 1, ErrorKind::Config, "ratio must be a positive integer");
    return ratio / std::numbers::pi * std::sqrt(2.0 * std::log(1.0 / nyquist_gain));
}

MtfKernel design_mtf_kernel(double nyquist_gain, int ratio, int size, BandId band) {
    const double sigma = mtf_sigma(nyquist_gain, ratio);
    require(size >= 1 && size % 2 == 1, ErrorKind::Config,
            "kernel size must be a positive odd integer, got " + std::to_string(size));

    MtfKernel k;
    k.band = band;
    k.size = size;
    k.ratio = ratio;
    k.nyquist_gain = nyquist_gain;
    k.sigma = sigma;

    const int r = size / 2;
    k.taps1d.resize(size);
    double sum = 0.0;
    for (int t = -r; t <= r; ++t) {
        const double v = std::exp(-0.5 * t * t / (sigma * sigma));
        k.taps1d[t + r] = v;
        sum += v;
    }
    for (double& v : k.taps1d) v /= sum;

    k.taps.resize(static_cast<std::size_t>(size) * size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) k.taps[y * size + x] = k.taps1d[y] * k.taps1d[x];

    const double peak = k.taps1d[r];
    k.support = 0;
    for (int t = 1; t <= r; ++t)
        if (k.taps1d[r + t] >= 1e-16 * peak) k.support = t;
    return k;
}

double kernel_response(const MtfKernel& kernel, double fx, double fy) {
    const int r = kernel.radius();
    double re = 0.0, im = 0.0;
    for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
            const double phase = -2.0 * std::numbers::pi * (fx * dx + fy * dy);
            const double c = kernel.tap(dx, dy);
            re += c * std::cos(phase);
            im += c * std::sin(phase);
        }
    }
    return std::hypot(re, im);
}

std::string format_kernel(const MtfKernel& kernel) {
    std::ostringstream os;
    os << std::setprecision(9);
    for (int y = 0; y < kernel.size; ++y) {
        for (int x = 0; x < kernel.size; ++x) {
            if (x) os << ' ';
            os << kernel.taps[y * kernel.size + x];
        }
        os << '\n';
    }
    return os.str();
}

double MtfSettings::gain(BandId band) const {
    auto it = gains.find(band);
    return it == gains.end() ? default_gain : it->second;
}

std::vector<MtfKernel> make_kernels(std::span<const BandId> bands, const MtfSettings& settings) {
    std::vector<MtfKernel> out;
    out.reserve(bands.size());
    for (BandId b : bands) out.push_back(design_mtf_kernel(settings.gain(b), settings.ratio, settings.kernel_size, b));
    return out;
}

template <class T>
void lowpass_plane(std::span<const T> in, int width, int height, const MtfKernel& kernel, std::span<T> out,
                   int stride) {
    const int s = kernel.support;
    const double* k = kernel.taps1d.data() + kernel.radius();
    const int out_w = (width + stride - 1) / stride;
    const int out_h = (height + stride - 1) / stride;

    // Vertical pass on the retained rows.
    std::vector<double> tmp(static_cast<std::size_t>(out_h) * width, 0.0);
    for (int oy = 0; oy < out_h; ++oy) {
        double* dst = tmp.data() + static_cast<std::size_t>(oy) * width;
        const int y = oy * stride;
        for (int t = -s; t <= s; ++t) {
            const T* src = in.data() + static_cast<std::size_t>(reflect_index(y + t, height)) * width;
            const double c = k[t];
            for (int x = 0; x < width; ++x) dst[x] += c * src[x];
        }
    }

    // Horizontal pass on the retained columns.
    std::vector<double> padded(static_cast<std::size_t>(width) + 2 * s);
    for (int oy = 0; oy < out_h; ++oy) {
        const double* row = tmp.data() + static_cast<std::size_t>(oy) * width;
        for (int j = 0; j < width + 2 * s; ++j) padded[j] = row[reflect_index(j - s, width)];
        T* dst = out.data() + static_cast<std::size_t>(oy) * out_w;
        for (int ox = 0; ox < out_w; ++ox) {
            const double* p = padded.data() + ox * stride + s;
            double acc = 0.0;
            for (int t = -s; t <= s; ++t) acc += k[t] * p[t];
            dst[ox] = static_cast<T>(acc);
        }
    }
}

template <class T>
void lowpass_adjoint_plane(std::span<const T> in, int width, int height, const MtfKernel& kernel, std::span<T> out,
                           int stride) {
    const int s = kernel.support;
    const double* k = kernel.taps1d.data() + kernel.radius();
    const int in_w = (width + stride - 1) / stride;
    const int in_h = (height + stride - 1) / stride;

    // Adjoint of the horizontal pass: scatter into a padded row, then fold the
    // mirrored margins back.
    std::vector<double> tmp(static_cast<std::size_t>(in_h) * width, 0.0);
    std::vector<double> padded(static_cast<std::size_t>(width) + 2 * s);
    for (int iy = 0; iy < in_h; ++iy) {
        std::fill(padded.begin(), padded.end(), 0.0);
        const T* src = in.data() + static_cast<std::size_t>(iy) * in_w;
        for (int ix = 0; ix < in_w; ++ix) {
            double* p = padded.data() + ix * stride + s;
            const double g = src[ix];
            for (int t = -s; t <= s; ++t) p[t] += k[t] * g;
        }
        double* dst = tmp.data() + static_cast<std::size_t>(iy) * width;
        for (int j = 0; j < width + 2 * s; ++j) dst[reflect_index(j - s, width)] += padded[j];
    }

    // Adjoint of the vertical pass.
    std::vector<double> acc(static_cast<std::size_t>(height) * width, 0.0);
    for (int iy = 0; iy < in_h; ++iy) {
        const double* src = tmp.data() + static_cast<std::size_t>(iy) * width;
        const int y = iy * stride;
        for (int t = -s; t <= s; ++t) {
            double* dst = acc.data() + static_cast<std::size_t>(reflect_index(y + t, height)) * width;
            const double c = k[t];
            for (int x = 0; x < width; ++x) dst[x] += c * src[x];
        }
    }
    for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<T>(acc[i]);
}

double cubic_weight(double distance) {
    constexpr double a = -0.5;
    const double d = std::abs(distance);
    if (d <= 1.0) return ((a + 2.0) * d - (a + 3.0)) * d * d + 1.0;
    if (d < 2.0) return ((a * d - 5.0 * a) * d + 8.0 * a) * d - 4.0 * a;
    return 0.0;
}

template <class T>
void upsample_plane(std::span<const T> in, int width, int height, int ratio, std::span<T> out) {
    const int out_w = width * ratio;
    const int out_h = height * ratio;
    // Per-phase tap weights for offsets -1..2 around the base sample.
    std::vector<std::array<double, 4>> weights(ratio);
    for (int p = 0; p < ratio; ++p) {
        const double f = static_cast<double>(p) / ratio;
        weights[p] = {cubic_weight(f + 1.0), cubic_weight(f), cubic_weight(1.0 - f), cubic_weight(2.0 - f)};
    }

    std::vector<double> rows(static_cast<std::size_t>(height) * out_w);
    for (int y = 0; y < height; ++y) {
        const T* src = in.data() + static_cast<std::size_t>(y) * width;
        double* dst = rows.data() + static_cast<std::size_t>(y) * out_w;
        for (int ox = 0; ox < out_w; ++ox) {
            const int base = ox / ratio;
            const auto& w = weights[ox % ratio];
            double acc = 0.0;
            for (int t = 0; t < 4; ++t) acc += w[t] * src[reflect_index(base + t - 1, width)];
            dst[ox] = acc;
        }
    }
    for (int oy = 0; oy < out_h; ++oy) {
        const int base = oy / ratio;
        const auto& w = weights[oy % ratio];
        T* dst = out.data() + static_cast<std::size_t>(oy) * out_w;
        const double* r[4];
        for (int t = 0; t < 4; ++t) r[t] = rows.data() + static_cast<std::size_t>(reflect_index(base + t - 1, height)) * out_w;
        for (int ox = 0; ox < out_w; ++ox)
            dst[ox] = static_cast<T>(w[0] * r[0][ox] + w[1] * r[1][ox] + w[2] * r[2][ox] + w[3] * r[3][ox]);
    }
}

template void lowpass_plane<float>(std::span<const float>, int, int, const MtfKernel&, std::span<float>, int);
template void lowpass_plane<double>(std::span<const double>, int, int, const MtfKernel&, std::span<double>, int);
template void lowpass_adjoint_plane<float>(std::span<const float>, int, int, const MtfKernel&, std::span<float>,
                                           int);
template void lowpass_adjoint_plane<double>(std::span<const double>, int, int, const MtfKernel&,
                                            std::span<double>, int);
template void upsample_plane<float>(std::span<const float>, int, int, int, std::span<float>);
template void upsample_plane<double>(std::span<const double>, int, int, int, std::span<double>);

namespace {

void check_kernels(const BandStack& stack, std::span<const MtfKernel> kernels) {
    require(kernels.size() == static_cast<std::size_t>(stack.band_count()), ErrorKind::Shape,
            "expected one kernel per band: " + std::to_string(kernels.size()) + " kernels for " +
                std::to_string(stack.band_count()) + " bands");
}

}  // namespace

BandStack lowpass(const BandStack& stack, std::span<const MtfKernel> kernels) {
    check_kernels(stack, kernels);
    BandStack out(stack.width(), stack.height(), stack.bands(), stack.gsd());
    std::vector<std::span<const float>> in_planes;
    std::vector<std::span<float>> out_planes;
    for (int b = 0; b < stack.band_count(); ++b) {
        in_planes.push_back(stack.plane(b));
        out_planes.push_back(out.plane(b));
    }
#pragma omp parallel for schedule(static)
    for (int b = 0; b < stack.band_count(); ++b)
        lowpass_plane<float>(in_planes[b], stack.width(), stack.height(), kernels[b], out_planes[b]);
    return out;
}

BandStack highpass(const BandStack& stack, std::span<const MtfKernel> kernels) {
    BandStack low = lowpass(stack, kernels);
    auto in = stack.samples();
    auto lo = low.samples();
    BandStack out(stack.width(), stack.height(), stack.bands(), stack.gsd());
    auto o = out.samples();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = in[i] - lo[i];
    return out;
}

BandStack decimate(const BandStack& stack, int ratio) {
    require(ratio >= 1, ErrorKind::Config, "ratio must be a positive integer");
    require(stack.width() % ratio == 0 && stack.height() % ratio == 0, ErrorKind::Shape,
            std::to_string(stack.width()) + "x" + std::to_string(stack.height()) + " is not divisible by " +
                std::to_string(ratio));
    const int w = stack.width() / ratio, h = stack.height() / ratio;
    BandStack out(w, h, stack.bands(), stack.gsd() * ratio);
    for (int b = 0; b < stack.band_count(); ++b) {
        auto in = stack.plane(b);
        auto o = out.plane(b);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                o[static_cast<std::size_t>(y) * w + x] =
                    in[static_cast<std::size_t>(y * ratio) * stack.width() + x * ratio];
    }
    return out;
}

BandStack upsample(const BandStack& stack, int ratio) {
    require(ratio >= 1, ErrorKind::Config, "ratio must be a positive integer");
    BandStack out(stack.width() * ratio, stack.height() * ratio, stack.bands(), stack.gsd() / ratio);
    std::vector<std::span<const float>> in_planes;
    std::vector<std::span<float>> out_planes;
    for (int b = 0; b < stack.band_count(); ++b) {
        in_planes.push_back(stack.plane(b));
        out_planes.push_back(out.plane(b));
    }
#pragma omp parallel for schedule(static)
    for (int b = 0; b < stack.band_count(); ++b)
        upsample_plane<float>(in_planes[b], stack.width(), stack.height(), ratio, out_planes[b]);
    return out;
}

DowngradedPair wald_downgrade(const BandStack& stack10, const BandStack& stack20,
                              std::span<const MtfKernel> kernels10, std::span<const MtfKernel> kernels20,
                              int ratio) {
    AccessScope scope("wald_downgrade");
    require(ratio >= 1, ErrorKind::Config, "ratio must be a positive integer");
    require(stack10.width() == ratio * stack20.width() && stack10.height() == ratio * stack20.height(),
            ErrorKind::Shape,
            "10-m stack " + std::to_string(stack10.width()) + "x" + std::to_string(stack10.height()) +
                " is not " + std::to_string(ratio) + "x the 20-m stack " + std::to_string(stack20.width()) + "x" +
                std::to_string(stack20.height()));
    require(stack20.width() % ratio == 0 && stack20.height() % ratio == 0, ErrorKind::Shape,
            "stack dimensions must be divisible by " + std::to_string(2 * ratio) + " on the fine grid");
    return {decimate(lowpass(stack10, kernels10), ratio), decimate(lowpass(stack20, kernels20), ratio)};
}

}  // namespace s2fr

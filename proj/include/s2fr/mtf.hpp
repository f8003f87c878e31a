#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "s2fr/raster.hpp"

namespace s2fr {

/// Gaussian approximation of a band's modulation transfer function, sampled on
/// a square odd-sized grid and normalized to unit DC gain.
struct MtfKernel {
    BandId band = BandId::B2;
    int size = 0;
    int ratio = 2;
    double nyquist_gain = 0.0;
    double sigma = 0.0;
    std::vector<double> taps;    // size x size, row-major
    std::vector<double> taps1d;  // separable factor; taps = outer(taps1d, taps1d)
    int support = 0;             // taps1d entries beyond this radius are below 1e-16 of the peak

    int radius() const noexcept { return size / 2; }
    double tap(int dx, int dy) const { return taps[(dy + radius()) * size + dx + radius()]; }
};

/// Spatial standard deviation of the Gaussian whose frequency response equals
/// `nyquist_gain` at 1/(2*ratio) cycles/sample.
double mtf_sigma(double nyquist_gain, int ratio);

MtfKernel design_mtf_kernel(double nyquist_gain, int ratio, int size, BandId band = BandId::B2);

/// Magnitude of the kernel's DFT at (fx, fy) cycles/sample.
double kernel_response(const MtfKernel& kernel, double fx, double fy);

/// Text grid of taps, one row per line.
std::string format_kernel(const MtfKernel& kernel);

struct MtfSettings {
    std::map<BandId, double> gains;  // missing bands use default_gain
    double default_gain = 0.275;
    int kernel_size = 41;
    int ratio = 2;

    double gain(BandId band) const;
};

std::vector<MtfKernel> make_kernels(std::span<const BandId> bands, const MtfSettings& settings);

// Plane kernels. Boundary handling is half-sample symmetric everywhere; the
// low-pass runs the vertical pass first, then the horizontal pass, with a
// 64-bit intermediate. `stride` > 1 evaluates only rows/columns that are
// multiples of the stride, which equals lowpass followed by decimation bit for
// bit.
template <class T>
void lowpass_plane(std::span<const T> in, int width, int height, const MtfKernel& kernel, std::span<T> out,
                   int stride = 1);

/// Exact adjoint of lowpass_plane with the same stride: `in` has the strided
/// (output) dimensions, `out` the full dimensions.
template <class T>
void lowpass_adjoint_plane(std::span<const T> in, int width, int height, const MtfKernel& kernel, std::span<T> out,
                           int stride = 1);

/// Catmull-Rom (a = -0.5) interpolation; output pixel (R*i, R*j) sits on input pixel (i, j).
template <class T>
void upsample_plane(std::span<const T> in, int width, int height, int ratio, std::span<T> out);

/// Keys cubic convolution kernel with a = -0.5.
double cubic_weight(double distance);

BandStack lowpass(const BandStack& stack, std::span<const MtfKernel> kernels);
BandStack highpass(const BandStack& stack, std::span<const MtfKernel> kernels);
BandStack decimate(const BandStack& stack, int ratio);
BandStack upsample(const BandStack& stack, int ratio);

struct DowngradedPair {
    BandStack stack10;  // now at 2x its original gsd
    BandStack stack20;
};

/// Reduced-resolution pair: each stack MTF-filtered and decimated by `ratio`.
DowngradedPair wald_downgrade(const BandStack& stack10, const BandStack& stack20,
                              std::span<const MtfKernel> kernels10, std::span<const MtfKernel> kernels20,
                              int ratio = 2);

}  // namespace s2fr

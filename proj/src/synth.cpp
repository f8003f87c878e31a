#include "s2fr/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "s2fr/error.hpp"

namespace s2fr {

namespace {

// Central wavelengths in nm, indexed by BandId.
constexpr std::array<double, 10> kWavelength{490, 560, 665, 842, 705, 740, 783, 865, 1610, 2190};

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller keeps the stream identical across standard libraries.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

using Plane = std::vector<double>;

void standardize(Plane& p) {
    double mean = 0.0;
    for (double v : p) mean += v;
    mean /= static_cast<double>(p.size());
    double var = 0.0;
    for (double v : p) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(p.size()));
    for (double& v : p) v = sd > 0.0 ? (v - mean) / sd : 0.0;
}

// Zero-mean, unit-variance texture with roughly equal energy per octave, so
// the statistics look alike at 10 m and at 20 m.
Plane texture(Rng& rng, int size, int octaves) {
    const std::size_t n = static_cast<std::size_t>(size) * size;
    Plane out(n, 0.0), noise(n), layer(n);
    for (int o = 0; o < octaves; ++o) {
        const double sigma = 0.6 * std::ldexp(1.0, o);
        // Nyquist gain that makes design_mtf_kernel produce this sigma.
        const double gain = std::exp(-0.5 * std::pow(sigma * std::numbers::pi / 2.0, 2));
        const MtfKernel smooth = design_mtf_kernel(gain, 2, 2 * static_cast<int>(std::ceil(4.0 * sigma)) + 1);
        for (double& v : noise) v = rng.normal();
        lowpass_plane<double>(noise, size, size, smooth, layer);
        standardize(layer);
        for (std::size_t i = 0; i < n; ++i) out[i] += layer[i];
    }
    standardize(out);
    return out;
}

Plane material_field(Rng& rng, int size, const SynthSettings& s) {
    const std::size_t n = static_cast<std::size_t>(size) * size;
    Plane field(n, 0.0);
    for (int b = 0; b < s.blobs; ++b) {
        const double cx = rng.uniform(-0.1, 1.1) * size;
        const double cy = rng.uniform(-0.1, 1.1) * size;
        const double scale = rng.uniform(size / 40.0, size / 6.0);
        const double amp = rng.uniform(-1.0, 1.0);
        const double reach = 4.0 * scale;
        const int x0 = std::max(0, static_cast<int>(cx - reach)), x1 = std::min(size - 1, static_cast<int>(cx + reach));
        const int y0 = std::max(0, static_cast<int>(cy - reach)), y1 = std::min(size - 1, static_cast<int>(cy + reach));
        const double inv = 1.0 / (2.0 * scale * scale);
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const double dx = x - cx, dy = y - cy;
                field[static_cast<std::size_t>(y) * size + x] += amp * std::exp(-(dx * dx + dy * dy) * inv);
            }
    }
    for (int e = 0; e < s.edges; ++e) {
        const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double nx = std::cos(angle), ny = std::sin(angle);
        const double offset = rng.uniform(0.2, 0.8) * size * (std::abs(nx) + std::abs(ny));
        const double amp = rng.uniform(0.3, 0.8);
        const double width = rng.uniform(0.4, 1.2);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                field[static_cast<std::size_t>(y) * size + x] +=
                    amp * std::tanh((nx * x + ny * y - offset) / width);
    }
    return field;
}

// Smooth reflectance curve over wavelength, kept within [0.03, 0.7].
std::array<double, 10> spectrum(Rng& rng) {
    const double c0 = rng.uniform(0.08, 0.45);
    const double c1 = rng.uniform(-0.25, 0.35);
    const double c2 = rng.uniform(-0.2, 0.2);
    const double bump_at = rng.uniform(650.0, 950.0);
    const double bump = rng.uniform(-0.1, 0.3);
    std::array<double, 10> out{};
    for (int b = 0; b < 10; ++b) {
        const double t = (kWavelength[b] - 490.0) / 1700.0;
        const double d = (kWavelength[b] - bump_at) / 120.0;
        out[b] = std::clamp(c0 + c1 * t + c2 * t * t + bump * std::exp(-0.5 * d * d), 0.03, 0.7);
    }
    return out;
}

}  // namespace

SynthScene synth_scene(const SynthSettings& s, const MtfSettings& mtf) {
    require(s.size >= 4 && s.size % 4 == 0, ErrorKind::Config,
            "synthetic scene size must be a positive multiple of 4, got " + std::to_string(s.size));
    require(s.materials >= 2, ErrorKind::Config, "synthetic scene needs at least 2 materials");
    require(s.texture_correlation >= 0.0 && s.texture_correlation <= 1.0, ErrorKind::Config,
            "texture_correlation must lie in [0, 1]");
    require(s.mixing_texture >= 0.0, ErrorKind::Config, "mixing_texture must be non-negative");
    require(s.octaves >= 1, ErrorKind::Config, "synthetic texture needs at least one octave");
    require(mtf.ratio == 2, ErrorKind::Config, "synthetic scenes are built for ratio 2");

    const int size = s.size;
    const std::size_t n = static_cast<std::size_t>(size) * size;
    Rng rng(s.seed);

    std::vector<std::array<double, 10>> spectra;
    std::vector<Plane> fields;
    for (int m = 0; m < s.materials; ++m) {
        spectra.push_back(spectrum(rng));
        fields.push_back(material_field(rng, size, s));
    }
    // Sub-pixel mixing: abundances vary at every scale, not only at blob and edge scale.
    if (s.mixing_texture > 0.0)
        for (auto& field : fields) {
            const Plane t = texture(rng, size, s.octaves);
            for (std::size_t i = 0; i < n; ++i) field[i] += s.mixing_texture * t[i];
        }

    // Softmax over materials gives abundances that sum to one per pixel.
    std::vector<Plane> abundance(s.materials, Plane(n));
    for (std::size_t i = 0; i < n; ++i) {
        double top = -1e300;
        for (int m = 0; m < s.materials; ++m) top = std::max(top, s.sharpness * fields[m][i]);
        double total = 0.0;
        for (int m = 0; m < s.materials; ++m) {
            abundance[m][i] = std::exp(s.sharpness * fields[m][i] - top);
            total += abundance[m][i];
        }
        for (int m = 0; m < s.materials; ++m) abundance[m][i] /= total;
    }

    const Plane shared = texture(rng, size, s.octaves);
    const double own_share = std::sqrt(1.0 - s.texture_correlation * s.texture_correlation);

    std::vector<float> data10(4 * n), data20(6 * n);
    for (int b = 0; b < 10; ++b) {
        const Plane own = texture(rng, size, s.octaves);
        float* dst = b < 4 ? &data10[b * n] : &data20[(b - 4) * n];
        for (std::size_t i = 0; i < n; ++i) {
            double mix = 0.0;
            for (int m = 0; m < s.materials; ++m) mix += abundance[m][i] * spectra[m][b];
            const double tex =
                std::max(0.5, 1.0 + s.texture_amplitude * (s.texture_correlation * shared[i] + own_share * own[i]));
            dst[i] = static_cast<float>(std::max(1e-4, tex * mix + s.noise * rng.normal()));
        }
    }

    SynthScene scene;
    scene.stack10 = BandStack(size, size, {kBands10.begin(), kBands10.end()}, 10.0, std::move(data10));
    scene.gt20 = BandStack(size, size, {kBands20.begin(), kBands20.end()}, 10.0, std::move(data20));
    const auto k20 = make_kernels(kBands20, mtf);
    scene.stack20 = decimate(lowpass(scene.gt20, k20), 2);
    return scene;
}

}  // namespace s2fr

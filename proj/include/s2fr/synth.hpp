#pragma once

#include <cstdint>

#include "s2fr/mtf.hpp"
#include "s2fr/raster.hpp"

namespace s2fr {

struct SynthSettings {
    int size = 256;              // 10-m grid side, divisible by 4
    std::uint64_t seed = 1;
    int materials = 6;
    int blobs = 24;              // Gaussian blobs per material
    int edges = 3;               // straight boundaries per material
    double sharpness = 6.0;      // softmax sharpness of the material mixture
    double texture_amplitude = 0.12;
    double texture_correlation = 0.95;  // share of the texture common to all bands
    int octaves = 5;                    // texture scales, 0.6 px doubling per octave
    double mixing_texture = 0.2;        // texture added to each material field before mixing
    double noise = 0.002;
};

struct SynthScene {
    BandStack stack10;  // B2,B3,B4,B8 at 10 m
    BandStack gt20;     // B5..B12 on the 10-m grid: the ground truth to recover
    BandStack stack20;  // gt20 MTF-filtered and decimated by 2
};

/// Seeded scene of material mixtures with smooth spectra, straight edges,
/// mixing that varies at every scale and band-correlated multi-scale texture.
/// Values are strictly positive.
SynthScene synth_scene(const SynthSettings& settings, const MtfSettings& mtf = {});

}  // namespace s2fr

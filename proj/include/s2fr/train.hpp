#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "s2fr/detail_ref.hpp"
#include "s2fr/fusion_net.hpp"
#include "s2fr/losses.hpp"
#include "s2fr/mtf.hpp"
#include "s2fr/raster.hpp"

namespace s2fr {

enum class Scheme { Baseline, Reversed, Proposed };

std::string_view scheme_name(Scheme scheme);
std::optional<Scheme> parse_scheme(std::string_view name);

struct TrainConfig {
    Scheme scheme = Scheme::Proposed;
    int iterations = 2000;
    double lr = 2e-4;
    LossConfig loss;
    DetailSettings detail;
    MtfSettings mtf;
    std::uint64_t seed = 1;
    int tile = 128;      // side of a training tile on the network-input grid
    int batch = 4;       // tiles per step during pre-training
    int log_every = 50;  // 0 logs only the final step
};

struct TrainLogEntry {
    int iteration = 0;  // 1-based optimizer step
    LossBreakdown loss;
    double ms = 0.0;  // wall time since the start of the run
};

struct TrainLog {
    std::vector<TrainLogEntry> entries;

    std::string csv() const;
    void write_csv(const std::filesystem::path& path) const;
};

/// Raw (unnormalized) co-registered pair; stack10 is `ratio` times the size of stack20.
struct ScenePair {
    BandStack stack10;
    BandStack stack20;
};

/// Network inputs and loss targets for one scene, in the normalized domain.
struct TrainingData {
    TensorF input;   // (1, 10, H, W): four 10-m bands then six upsampled 20-m bands
    TensorF target;  // Baseline: (1,6,H,W) reference on the input grid; otherwise (1,6,H/R,W/R)
    TensorF detail;  // Proposed only: (1,6,H,W)
};

/// Each stack is normalized with its own statistics. Baseline first moves the
/// pair one scale down, so the original 20-m stack becomes the reference.
TrainingData prepare_inputs(const ScenePair& scene, Scheme scheme, const TrainConfig& config);

/// Cuts every full `tile` x `tile` block of the data into one mini-batch.
/// Targets on the coarser grid are cut at the matching reduced size.
TrainingData tile_batch(const TrainingData& data, int tile, int ratio);

struct TrainResult {
    FusionNet net;
    TrainLog log;
};

TrainResult pretrain(const std::vector<ScenePair>& dataset, const TrainConfig& config);

/// Fine-tunes `net` on one scene with a fixed mini-batch of all its tiles.
/// The optimizer state is reset first; iterations = 0 returns `net` unchanged.
TrainResult target_adapt(const FusionNet& net, const ScenePair& scene, const TrainConfig& config);

/// Super-resolves the 20-m stack of a scene onto the 10-m grid.
BandStack fuse(const FusionNet& net, const BandStack& stack10, const BandStack& stack20, int ratio = 2,
               int strip_rows = 64);

/// Concatenates normalized 10-m bands and upsampled normalized 20-m bands.
TensorF network_input(const BandStack& norm10, const BandStack& norm20_up);

}  // namespace s2fr

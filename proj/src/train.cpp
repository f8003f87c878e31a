#include "s2fr/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "s2fr/error.hpp"

namespace s2fr {

namespace {

TensorF stack_tensor(const BandStack& stack) {
    TensorF t(1, stack.band_count(), stack.height(), stack.width());
    const auto s = stack.samples();
    std::copy(s.begin(), s.end(), t.data.begin());
    return t;
}

void check_pair(const BandStack& stack10, const BandStack& stack20, int ratio) {
    require(stack10.band_count() == 4 && stack20.band_count() == 6, ErrorKind::Shape,
            "expected a 4-band 10-m stack and a 6-band 20-m stack, got " +
                std::to_string(stack10.band_count()) + " and " + std::to_string(stack20.band_count()));
    require(stack10.width() == ratio * stack20.width() &&
                stack10.height() == ratio * stack20.height(),
            ErrorKind::Shape,
            "10-m stack " + std::to_string(stack10.width()) + "x" + std::to_string(stack10.height()) +
                " is not " + std::to_string(ratio) + "x the 20-m stack " + std::to_string(stack20.width()) +
                "x" + std::to_string(stack20.height()));
}

void check_config(const TrainConfig& config) {
    require(config.iterations >= 0, ErrorKind::Config, "train.iterations must be non-negative");
    require(config.tile > 0 && config.tile % 2 == 0, ErrorKind::Config, "train.tile must be positive and even");
    require(config.tile % config.mtf.ratio == 0, ErrorKind::Config, "train.tile must be a multiple of the ratio");
    require(config.lr > 0.0 && std::isfinite(config.lr), ErrorKind::Config, "train.lr must be positive");
    require(config.log_every >= 0, ErrorKind::Config, "train.log_every must be non-negative");
}

void copy_window(const TensorF& src, int x0, int y0, int size, TensorF& dst, int slot) {
    for (int ch = 0; ch < src.c; ++ch)
        for (int y = 0; y < size; ++y) {
            const auto row = src.plane(0, ch).subspan(static_cast<std::size_t>(y0 + y) * src.w + x0, size);
            std::copy(row.begin(), row.end(), dst.plane(slot, ch).begin() + static_cast<std::size_t>(y) * size);
        }
}

// One optimizer step on a batch; returns the loss before the update.
LossBreakdown train_step(FusionNet& net, ForwardCache<float>& cache, const TrainingData& batch,
                         const TrainConfig& config, const std::vector<MtfKernel>& kernels20, Scheme scheme,
                         int iteration) {
    const TensorF pred = net.forward(batch.input, &cache);
    LossResult<float> res;
    switch (scheme) {
        case Scheme::Baseline:
            res = loss_supervised(pred, batch.target, config.loss.norm);
            break;
        case Scheme::Reversed:
            res = loss_lp(pred, batch.target, kernels20, config.mtf.ratio, config.loss.norm);
            break;
        case Scheme::Proposed:
            res = loss_total(pred, batch.target, batch.detail, kernels20, config.mtf.ratio, config.loss);
            break;
    }
    require(std::isfinite(res.loss.total), ErrorKind::Numeric,
            "training diverged: non-finite loss at step " + std::to_string(iteration));
    const auto grads = net.backward(cache, res.grad);
    net.adam_step(grads, AdamSettings{.lr = config.lr});
    return res.loss;
}

bool should_log(int iteration, int iterations, int log_every) {
    return iteration == iterations || (log_every > 0 && iteration % log_every == 0);
}

}  // namespace

std::string_view scheme_name(Scheme scheme) {
    switch (scheme) {
        case Scheme::Baseline: return "baseline";
        case Scheme::Reversed: return "reversed";
        case Scheme::Proposed: return "proposed";
    }
    return "?";
}

std::optional<Scheme> parse_scheme(std::string_view name) {
    if (name == "baseline") return Scheme::Baseline;
    if (name == "reversed") return Scheme::Reversed;
    if (name == "proposed") return Scheme::Proposed;
    return std::nullopt;
}

std::string TrainLog::csv() const {
    std::string out = "iteration,total,lp,det,ms\n";
    char buf[160];
    for (const auto& e : entries) {
        std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.3f\n", e.iteration, e.loss.total, e.loss.lp, e.loss.det,
                      e.ms);
        out += buf;
    }
    return out;
}

void TrainLog::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    require(out.good(), ErrorKind::Io, "cannot write " + path.string());
    out << csv();
    require(out.good(), ErrorKind::Io, "write failure on " + path.string());
}

TensorF network_input(const BandStack& norm10, const BandStack& norm20_up) {
    require(norm10.band_count() == 4 && norm20_up.band_count() == 6, ErrorKind::Shape,
            "network input needs 4 + 6 bands");
    require(norm10.width() == norm20_up.width() && norm10.height() == norm20_up.height(), ErrorKind::Shape,
            "10-m bands and upsampled 20-m bands are on different grids");
    TensorF t(1, kNetInputChannels, norm10.height(), norm10.width());
    for (int b = 0; b < 4; ++b) {
        const auto p = norm10.plane(b);
        std::copy(p.begin(), p.end(), t.plane(0, b).begin());
    }
    for (int b = 0; b < 6; ++b) {
        const auto p = norm20_up.plane(b);
        std::copy(p.begin(), p.end(), t.plane(0, kSkipChannelOffset + b).begin());
    }
    return t;
}

TrainingData prepare_inputs(const ScenePair& scene, Scheme scheme, const TrainConfig& config) {
    const int ratio = config.mtf.ratio;
    check_pair(scene.stack10, scene.stack20, ratio);
    const auto k10 = make_kernels(scene.stack10.bands(), config.mtf);
    const auto k20 = make_kernels(scene.stack20.bands(), config.mtf);

    TrainingData data;
    if (scheme == Scheme::Baseline) {
        // The full-resolution 10-m pixels are only ever read by the downgrade.
        const DowngradedPair low = wald_downgrade(scene.stack10, scene.stack20, k10, k20, ratio);
        const NormalizedStack n10 = normalize(low.stack10);
        const NormalizedStack n20 = normalize(low.stack20);
        data.input = network_input(n10.stack, upsample(n20.stack, ratio));
        data.target = stack_tensor(apply_normalization(scene.stack20, n20.stats));
        return data;
    }

    const NormalizedStack n10 = normalize(scene.stack10);
    const NormalizedStack n20 = normalize(scene.stack20);
    data.input = network_input(n10.stack, upsample(n20.stack, ratio));
    data.target = stack_tensor(n20.stack);
    if (scheme == Scheme::Proposed)
        data.detail = stack_tensor(build_all_references(n10.stack, n20.stack, k10, k20, config.detail).as_stack());
    return data;
}

TrainingData tile_batch(const TrainingData& data, int tile, int ratio) {
    const TensorF& in = data.input;
    require(data.input.n == 1, ErrorKind::Shape, "tile_batch expects a single scene");
    require(tile > 0 && tile % ratio == 0, ErrorKind::Config, "tile must be a positive multiple of the ratio");
    require(in.h >= tile && in.w >= tile, ErrorKind::Shape,
            "scene " + std::to_string(in.w) + "x" + std::to_string(in.h) + " is smaller than one " +
                std::to_string(tile) + "-pixel tile");
    const int ny = in.h / tile, nx = in.w / tile;
    const bool coarse = data.target.h != in.h;
    const int ttile = coarse ? tile / ratio : tile;

    TrainingData out;
    out.input = TensorF(ny * nx, in.c, tile, tile);
    out.target = TensorF(ny * nx, data.target.c, ttile, ttile);
    if (!data.detail.data.empty()) out.detail = TensorF(ny * nx, data.detail.c, tile, tile);
    for (int ty = 0; ty < ny; ++ty)
        for (int tx = 0; tx < nx; ++tx) {
            const int slot = ty * nx + tx;
            copy_window(in, tx * tile, ty * tile, tile, out.input, slot);
            copy_window(data.target, tx * ttile, ty * ttile, ttile, out.target, slot);
            if (!data.detail.data.empty()) copy_window(data.detail, tx * tile, ty * tile, tile, out.detail, slot);
        }
    return out;
}

TrainResult pretrain(const std::vector<ScenePair>& dataset, const TrainConfig& config) {
    require(!dataset.empty(), ErrorKind::Config, "pretraining needs at least one scene");
    check_config(config);
    require(config.iterations >= 1, ErrorKind::Config, "train.iterations must be at least 1 for pretraining");
    require(config.batch >= 1, ErrorKind::Config, "train.batch must be at least 1");
    const int ratio = config.mtf.ratio;

    std::vector<TrainingData> scenes;
    for (const auto& s : dataset) {
        scenes.push_back(prepare_inputs(s, config.scheme, config));
        const auto& in = scenes.back().input;
        require(in.h >= config.tile && in.w >= config.tile, ErrorKind::Shape,
                "scene " + std::to_string(in.w) + "x" + std::to_string(in.h) + " is smaller than one " +
                    std::to_string(config.tile) + "-pixel tile");
    }
    const auto k20 = make_kernels(dataset.front().stack20.bands(), config.mtf);

    FusionNet net = FusionNet::init(config.seed);
    TrainLog log;
    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    const bool with_detail = config.scheme == Scheme::Proposed;
    const bool coarse = config.scheme != Scheme::Baseline;
    const int ttile = coarse ? config.tile / ratio : config.tile;
    ForwardCache<float> cache;
    const auto start = std::chrono::steady_clock::now();

    for (int it = 1; it <= config.iterations; ++it) {
        TrainingData batch;
        batch.input = TensorF(config.batch, kNetInputChannels, config.tile, config.tile);
        batch.target = TensorF(config.batch, kNetOutputChannels, ttile, ttile);
        if (with_detail) batch.detail = TensorF(config.batch, kNetOutputChannels, config.tile, config.tile);
        for (int b = 0; b < config.batch; ++b) {
            const auto& s = scenes[rng() % scenes.size()];
            const int gx = (s.input.w - config.tile) / ratio + 1;
            const int gy = (s.input.h - config.tile) / ratio + 1;
            const int x0 = ratio * static_cast<int>(rng() % gx);
            const int y0 = ratio * static_cast<int>(rng() % gy);
            copy_window(s.input, x0, y0, config.tile, batch.input, b);
            if (coarse)
                copy_window(s.target, x0 / ratio, y0 / ratio, ttile, batch.target, b);
            else
                copy_window(s.target, x0, y0, ttile, batch.target, b);
            if (with_detail) copy_window(s.detail, x0, y0, config.tile, batch.detail, b);
        }
        const LossBreakdown loss = train_step(net, cache, batch, config, k20, config.scheme, it);
        if (should_log(it, config.iterations, config.log_every)) {
            const double ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
            log.entries.push_back({it, loss, ms});
        }
    }
    return {std::move(net), std::move(log)};
}

TrainResult target_adapt(const FusionNet& net, const ScenePair& scene, const TrainConfig& config) {
    check_config(config);
    FusionNet out = net;
    if (config.iterations == 0) return {std::move(out), {}};
    out.reset_optimizer();

    const TrainingData batch = tile_batch(prepare_inputs(scene, config.scheme, config), config.tile, config.mtf.ratio);
    const auto k20 = make_kernels(scene.stack20.bands(), config.mtf);
    TrainLog log;
    ForwardCache<float> cache;
    const auto start = std::chrono::steady_clock::now();
    for (int it = 1; it <= config.iterations; ++it) {
        const LossBreakdown loss = train_step(out, cache, batch, config, k20, config.scheme, it);
        if (should_log(it, config.iterations, config.log_every)) {
            const double ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
            log.entries.push_back({it, loss, ms});
        }
    }
    return {std::move(out), std::move(log)};
}

BandStack fuse(const FusionNet& net, const BandStack& stack10, const BandStack& stack20, int ratio,
               int strip_rows) {
    check_pair(stack10, stack20, ratio);
    const NormalizedStack n10 = normalize(stack10);
    const NormalizedStack n20 = normalize(stack20);
    const TensorF pred = net.forward_strips(network_input(n10.stack, upsample(n20.stack, ratio)), strip_rows);
    BandStack out(stack10.width(), stack10.height(), stack20.bands(), stack10.gsd(), pred.data);
    return denormalize(out, n20.stats);
}

}  // namespace s2fr

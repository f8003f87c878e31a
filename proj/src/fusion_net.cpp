#include "s2fr/fusion_net.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include <Eigen/Core>
#include <json.hpp>

#include "s2fr/error.hpp"
#include "s2fr/parallel.hpp"

namespace s2fr {

namespace {

std::atomic<std::uint64_t> g_version{0};

std::uint64_t next_version() { return ++g_version; }

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

// Activations are kept as (P x C) column-major matrices over a grid padded by
// one zero pixel on every side, P = (h+2)(w+2). A 3x3 convolution is then a sum
// of nine GEMMs over row ranges shifted by the tap offset.
struct PaddedGrid {
    int h, w;
    std::size_t rows() const { return static_cast<std::size_t>(h + 2) * (w + 2); }
    // First and count of the rows spanning every interior pixel.
    std::size_t first() const { return static_cast<std::size_t>(w) + 3; }
    std::size_t span() const { return rows() - 2 * first(); }
    std::ptrdiff_t offset(int tap) const { return (tap / 3 - 1) * static_cast<std::ptrdiff_t>(w + 2) + (tap % 3 - 1); }
    std::size_t index(int y, int x) const { return static_cast<std::size_t>(y + 1) * (w + 2) + x + 1; }
};

template <class T>
using RowBlock = Eigen::Map<const Mat<T>, 0, Eigen::OuterStride<>>;
template <class T>
using RowBlockMut = Eigen::Map<Mat<T>, 0, Eigen::OuterStride<>>;
using TapStride = Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>;

// (cin x cout) slice of a [out][in][3][3] weight array for one tap.
template <class T>
Eigen::Map<const Mat<T>, 0, TapStride> tap_matrix(const T* weights, int cin, int cout, int tap) {
    return {weights + tap, cin, cout, TapStride(static_cast<Eigen::Index>(cin) * kKernelTaps, kKernelTaps)};
}

template <class T>
Eigen::Map<Mat<T>, 0, TapStride> tap_matrix(T* weights, int cin, int cout, int tap) {
    return {weights + tap, cin, cout, TapStride(static_cast<Eigen::Index>(cin) * kKernelTaps, kKernelTaps)};
}

template <class T>
void pad_planes(const T* planes, int channels, const PaddedGrid& g, std::vector<T>& out) {
    out.assign(g.rows() * channels, T(0));
    const std::size_t hw = static_cast<std::size_t>(g.h) * g.w;
    for (int c = 0; c < channels; ++c)
        for (int y = 0; y < g.h; ++y)
            std::copy_n(planes + c * hw + static_cast<std::size_t>(y) * g.w, g.w,
                        out.data() + c * g.rows() + g.index(y, 0));
}

// Clears the left/right padding columns, which the shifted GEMMs fill with
// values wrapped from neighbouring rows.
template <class T>
void clear_side_padding(T* m, int channels, const PaddedGrid& g) {
    for (int c = 0; c < channels; ++c) {
        T* p = m + c * g.rows();
        for (int y = 0; y < g.h; ++y) {
            p[g.index(y, 0) - 1] = T(0);
            p[g.index(y, g.w)] = T(0);
        }
    }
}

// out[first .. first+span) += sum_t in[first+off_t ..] * W_t
template <class T>
void conv_accumulate(const T* in, int cin, const T* weights, int cout, const PaddedGrid& g, T* out) {
    const auto n = static_cast<Eigen::Index>(g.span());
    const auto ld = static_cast<Eigen::Index>(g.rows());
    RowBlockMut<T> z(out + g.first(), n, cout, Eigen::OuterStride<>(ld));
    for (int t = 0; t < kKernelTaps; ++t) {
        RowBlock<T> x(in + g.first() + g.offset(t), n, cin, Eigen::OuterStride<>(ld));
        z.noalias() += x * tap_matrix(weights, cin, cout, t);
    }
}

template <class Body>
void for_each_sample(int n, Body&& body) {
    if (n > 1 && (deterministic() || n >= thread_count())) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) body(i);
    } else {
        for (int i = 0; i < n; ++i) body(i);
    }
}

}  // namespace

template <class T>
BasicFusionNet<T>::BasicFusionNet() : params_(parameter_count(), T(0)), version_(next_version()) {}

template <class T>
std::size_t BasicFusionNet<T>::parameter_count() {
    std::size_t n = 0;
    for (const auto& l : kFusionLayers) n += static_cast<std::size_t>(l.out) * l.in * kKernelTaps + l.out;
    return n;
}

template <class T>
std::size_t BasicFusionNet<T>::weight_offset(int layer) {
    std::size_t n = 0;
    for (int l = 0; l < layer; ++l)
        n += static_cast<std::size_t>(kFusionLayers[l].out) * kFusionLayers[l].in * kKernelTaps + kFusionLayers[l].out;
    return n;
}

template <class T>
std::size_t BasicFusionNet<T>::bias_offset(int layer) {
    return weight_offset(layer) +
           static_cast<std::size_t>(kFusionLayers[layer].out) * kFusionLayers[layer].in * kKernelTaps;
}

template <class T>
std::span<T> BasicFusionNet<T>::weights(int layer) {
    const auto& l = kFusionLayers.at(layer);
    return std::span<T>(params_).subspan(weight_offset(layer), static_cast<std::size_t>(l.out) * l.in * kKernelTaps);
}

template <class T>
std::span<const T> BasicFusionNet<T>::weights(int layer) const {
    const auto& l = kFusionLayers.at(layer);
    return std::span<const T>(params_).subspan(weight_offset(layer),
                                               static_cast<std::size_t>(l.out) * l.in * kKernelTaps);
}

template <class T>
std::span<T> BasicFusionNet<T>::bias(int layer) {
    return std::span<T>(params_).subspan(bias_offset(layer), kFusionLayers.at(layer).out);
}

template <class T>
std::span<const T> BasicFusionNet<T>::bias(int layer) const {
    return std::span<const T>(params_).subspan(bias_offset(layer), kFusionLayers.at(layer).out);
}

template <class T>
BasicFusionNet<T> BasicFusionNet<T>::init(std::uint64_t seed) {
    BasicFusionNet net;
    net.seed_ = seed;
    std::mt19937_64 rng(seed);
    for (int l = 0; l < static_cast<int>(kFusionLayers.size()); ++l) {
        const double bound = std::sqrt(6.0 / (kFusionLayers[l].in * kKernelTaps));
        for (T& v : net.weights(l)) {
            const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            v = static_cast<T>((2.0 * u - 1.0) * bound);
        }
    }
    return net;
}

template <class T>
BasicFusionNet<T> BasicFusionNet<T>::zeros() {
    return BasicFusionNet();
}

template <class T>
void BasicFusionNet<T>::touch() {
    version_ = next_version();
}

template <class T>
void BasicFusionNet<T>::reset_optimizer() {
    adam_m_.clear();
    adam_v_.clear();
    adam_t_ = 0;
}

template <class T>
Tensor<T> BasicFusionNet<T>::forward(const Tensor<T>& input, ForwardCache<T>* cache) const {
    require(input.c == kNetInputChannels, ErrorKind::Shape,
            "network input needs " + std::to_string(kNetInputChannels) + " channels, got " + shape_string(input));
    require(input.n > 0 && input.h > 0 && input.w > 0, ErrorKind::Shape, "empty network input");

    const int h = input.h, w = input.w;
    const PaddedGrid grid{h, w};
    Tensor<T> out(input.n, kNetOutputChannels, h, w);
    if (cache) {
        // resize keeps the buffers of a reused cache, avoiding fresh allocations every step.
        cache->samples.resize(input.n);
        cache->n = input.n;
        cache->h = h;
        cache->w = w;
        cache->version = version_;
    }

    for_each_sample(input.n, [&](int i) {
        thread_local typename ForwardCache<T>::Sample local;
        thread_local std::vector<T> last;
        auto& slot = cache ? cache->samples[i] : local;
        pad_planes(input.sample(i).data(), kNetInputChannels, grid, slot.inputs[0]);
        for (int l = 0; l < 3; ++l) {
            const int cin = kFusionLayers[l].in, cout = kFusionLayers[l].out;
            auto& z = l < 2 ? slot.inputs[l + 1] : last;
            z.assign(grid.rows() * cout, T(0));
            conv_accumulate(slot.inputs[l].data(), cin, weights(l).data(), cout, grid, z.data());
            const auto b = bias(l);
            for (int co = 0; co < cout; ++co) {
                T* p = z.data() + co * grid.rows();
                const T bias_value = b[co];
                for (int y = 0; y < h; ++y) {
                    T* row = p + grid.index(y, 0);
                    if (l < 2) {
                        for (int x = 0; x < w; ++x) row[x] = std::max(row[x] + bias_value, T(0));
                    } else {
                        const T* skip = input.plane(i, kSkipChannelOffset + co).data() + static_cast<std::size_t>(y) * w;
                        T* dst = out.plane(i, co).data() + static_cast<std::size_t>(y) * w;
                        for (int x = 0; x < w; ++x) dst[x] = row[x] + bias_value + skip[x];
                    }
                }
            }
            if (l < 2) clear_side_padding(z.data(), cout, grid);
        }
    });
    return out;
}

template <class T>
Tensor<T> BasicFusionNet<T>::forward_strips(const Tensor<T>& input, int strip_rows) const {
    require(strip_rows > 0, ErrorKind::Config, "strip height must be positive");
    if (input.h <= strip_rows) return forward(input);
    Tensor<T> out(input.n, kNetOutputChannels, input.h, input.w);
    for (int y0 = 0; y0 < input.h; y0 += strip_rows) {
        const int y1 = std::min(input.h, y0 + strip_rows);
        const int top = std::max(0, y0 - kReceptiveRadius);
        const int bottom = std::min(input.h, y1 + kReceptiveRadius);
        Tensor<T> part(input.n, input.c, bottom - top, input.w);
        for (int i = 0; i < input.n; ++i)
            for (int ch = 0; ch < input.c; ++ch) {
                auto src = input.plane(i, ch).subspan(static_cast<std::size_t>(top) * input.w, part.plane_size());
                std::copy(src.begin(), src.end(), part.plane(i, ch).begin());
            }
        const Tensor<T> res = forward(part);
        for (int i = 0; i < input.n; ++i)
            for (int ch = 0; ch < out.c; ++ch) {
                auto src = res.plane(i, ch).subspan(static_cast<std::size_t>(y0 - top) * input.w,
                                                    static_cast<std::size_t>(y1 - y0) * input.w);
                std::copy(src.begin(), src.end(),
                          out.plane(i, ch).begin() + static_cast<std::ptrdiff_t>(y0) * input.w);
            }
    }
    return out;
}

template <class T>
std::vector<T> BasicFusionNet<T>::backward(const ForwardCache<T>& cache, const Tensor<T>& upstream,
                                           Tensor<T>* input_grad) const {
    require(cache.version == version_ && !cache.samples.empty(), ErrorKind::Shape,
            "stale cache: parameters changed since the forward pass");
    require(upstream.n == cache.n && upstream.c == kNetOutputChannels && upstream.h == cache.h &&
                upstream.w == cache.w,
            ErrorKind::Shape, "upstream gradient " + shape_string(upstream) + " does not match the forward pass");

    const int h = cache.h, w = cache.w;
    const PaddedGrid grid{h, w};
    const auto n = static_cast<Eigen::Index>(grid.span());
    const auto ld = static_cast<Eigen::Index>(grid.rows());
    const std::size_t count = parameter_count();
    std::vector<std::vector<T>> per_sample(cache.n);
    if (input_grad) *input_grad = Tensor<T>(cache.n, kNetInputChannels, h, w);

    for_each_sample(cache.n, [&](int i) {
        const auto& s = cache.samples[i];
        auto& g = per_sample[i];
        g.assign(count, T(0));

        // dL/d(pre-activation) of the current layer on the padded grid; the
        // padding stays zero. Workspaces are per thread and reused across calls.
        thread_local std::vector<T> dz, dx;
        pad_planes(upstream.sample(i).data(), kNetOutputChannels, grid, dz);
        for (int l = 2; l >= 0; --l) {
            const int cin = kFusionLayers[l].in, cout = kFusionLayers[l].out;
            const T* x = s.inputs[l].data();
            RowBlock<T> dzm(dz.data() + grid.first(), n, cout, Eigen::OuterStride<>(ld));
            for (int t = 0; t < kKernelTaps; ++t) {
                RowBlock<T> xs(x + grid.first() + grid.offset(t), n, cin, Eigen::OuterStride<>(ld));
                tap_matrix(g.data() + weight_offset(l), cin, cout, t).noalias() = xs.transpose() * dzm;
            }
            for (int co = 0; co < cout; ++co) {
                const T* p = dz.data() + co * grid.rows();
                double acc = 0.0;
                for (std::size_t j = 0; j < grid.rows(); ++j) acc += p[j];
                g[bias_offset(l) + co] = static_cast<T>(acc);
            }
            if (l == 0 && !input_grad) break;

            dx.assign(grid.rows() * cin, T(0));
            for (int t = 0; t < kKernelTaps; ++t) {
                RowBlockMut<T> dxs(dx.data() + grid.first() + grid.offset(t), n, cin, Eigen::OuterStride<>(ld));
                dxs.noalias() += dzm * tap_matrix(weights(l).data(), cin, cout, t).transpose();
            }
            if (l > 0) {
                // Padding positions have a zero activation, so the ReLU mask also clears them.
                for (std::size_t j = 0; j < dx.size(); ++j)
                    if (!(x[j] > T(0))) dx[j] = T(0);
                std::swap(dz, dx);
            } else {
                for (int ci = 0; ci < kNetInputChannels; ++ci) {
                    auto dst = input_grad->plane(i, ci);
                    const T* src = dx.data() + ci * grid.rows();
                    for (int y = 0; y < h; ++y)
                        std::copy_n(src + grid.index(y, 0), w, dst.begin() + static_cast<std::ptrdiff_t>(y) * w);
                }
                for (int co = 0; co < kNetOutputChannels; ++co) {
                    auto skip = input_grad->plane(i, kSkipChannelOffset + co);
                    auto up = upstream.plane(i, co);
                    for (std::size_t j = 0; j < skip.size(); ++j) skip[j] += up[j];
                }
            }
        }
    });

    std::vector<T> total(count, T(0));
    for (const auto& g : per_sample)
        for (std::size_t j = 0; j < count; ++j) total[j] += g[j];
    return total;
}

template <class T>
void BasicFusionNet<T>::adam_step(std::span<const T> grads, const AdamSettings& settings) {
    require(grads.size() == params_.size(), ErrorKind::Shape,
            "gradient has " + std::to_string(grads.size()) + " entries, network has " +
                std::to_string(params_.size()));
    if (adam_m_.size() != params_.size()) {
        adam_m_.assign(params_.size(), T(0));
        adam_v_.assign(params_.size(), T(0));
    }
    ++adam_t_;
    const double bc1 = 1.0 - std::pow(settings.beta1, static_cast<double>(adam_t_));
    const double bc2 = 1.0 - std::pow(settings.beta2, static_cast<double>(adam_t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const double g = grads[i];
        const double m = settings.beta1 * adam_m_[i] + (1.0 - settings.beta1) * g;
        const double v = settings.beta2 * adam_v_[i] + (1.0 - settings.beta2) * g * g;
        adam_m_[i] = static_cast<T>(m);
        adam_v_[i] = static_cast<T>(v);
        params_[i] = static_cast<T>(params_[i] - settings.lr * (m / bc1) / (std::sqrt(v / bc2) + settings.eps));
    }
    ++trained_steps_;
    touch();
}

template <class T>
bool BasicFusionNet<T>::identical(const BasicFusionNet& other) const {
    return seed_ == other.seed_ && trained_steps_ == other.trained_steps_ &&
           std::memcmp(params_.data(), other.params_.data(), params_.size() * sizeof(T)) == 0;
}

template <class T>
void BasicFusionNet<T>::save(const std::filesystem::path& path) const {
    nlohmann::json header;
    header["format"] = "s2fr-fusion-net";
    header["layers"] = nlohmann::json::array();
    for (const auto& l : kFusionLayers) header["layers"].push_back({{"in", l.in}, {"out", l.out}, {"kernel", 3}});
    header["skip_offset"] = kSkipChannelOffset;
    header["seed"] = seed_;
    header["steps"] = trained_steps_;
    header["parameters"] = params_.size();
    header["dtype"] = "f32";

    std::vector<float> payload(params_.begin(), params_.end());
    if constexpr (std::endian::native == std::endian::big) {
        for (float& f : payload) {
            auto u = std::bit_cast<std::uint32_t>(f);
            u = (u >> 24) | ((u >> 8) & 0xff00u) | ((u << 8) & 0xff0000u) | (u << 24);
            f = std::bit_cast<float>(u);
        }
    }
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        require(out.good(), ErrorKind::Io, "cannot write checkpoint " + path.string());
        out.write(reinterpret_cast<const char*>(payload.data()),
                  static_cast<std::streamsize>(payload.size() * sizeof(float)));
        require(out.good(), ErrorKind::Io, "write failure on " + path.string());
    }
    const auto header_path = path.string() + ".json";
    std::ofstream hout(header_path, std::ios::trunc);
    require(hout.good(), ErrorKind::Io, "cannot write " + header_path);
    hout << header.dump(2) << '\n';
}

template <class T>
BasicFusionNet<T> BasicFusionNet<T>::load(const std::filesystem::path& path) {
    const auto header_path = path.string() + ".json";
    std::ifstream hin(header_path);
    require(hin.good(), ErrorKind::Io, "missing checkpoint header " + header_path);
    nlohmann::json header;
    try {
        hin >> header;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Io, "corrupt checkpoint header " + header_path + ": " + e.what());
    }

    BasicFusionNet net;
    try {
        const auto& layers = header.at("layers");
        require(layers.size() == kFusionLayers.size(), ErrorKind::Shape, "checkpoint layer count mismatch");
        for (std::size_t l = 0; l < kFusionLayers.size(); ++l) {
            require(layers[l].at("in").get<int>() == kFusionLayers[l].in &&
                        layers[l].at("out").get<int>() == kFusionLayers[l].out &&
                        layers[l].at("kernel").get<int>() == 3,
                    ErrorKind::Shape, "checkpoint layer " + std::to_string(l) + " has a different shape");
        }
        require(header.at("parameters").get<std::size_t>() == parameter_count(), ErrorKind::Shape,
                "checkpoint parameter count mismatch");
        net.seed_ = header.at("seed").get<std::uint64_t>();
        net.trained_steps_ = header.at("steps").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Io, "corrupt checkpoint header " + header_path + ": " + e.what());
    }

    std::ifstream in(path, std::ios::binary | std::ios::ate);
    require(in.good(), ErrorKind::Io, "cannot open checkpoint " + path.string());
    const auto bytes = static_cast<std::size_t>(in.tellg());
    require(bytes == parameter_count() * sizeof(float), ErrorKind::Io,
            "checkpoint payload size mismatch in " + path.string());
    in.seekg(0);
    std::vector<float> payload(parameter_count());
    in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(bytes));
    require(in.good(), ErrorKind::Io, "read failure on " + path.string());
    if constexpr (std::endian::native == std::endian::big) {
        for (float& f : payload) {
            auto u = std::bit_cast<std::uint32_t>(f);
            u = (u >> 24) | ((u >> 8) & 0xff00u) | ((u << 8) & 0xff0000u) | (u << 24);
            f = std::bit_cast<float>(u);
        }
    }
    for (std::size_t i = 0; i < payload.size(); ++i) {
        require(std::isfinite(payload[i]), ErrorKind::Numeric, "non-finite parameter in " + path.string());
        net.params_[i] = static_cast<T>(payload[i]);
    }
    net.touch();
    return net;
}

template class BasicFusionNet<float>;
template class BasicFusionNet<double>;

}  // namespace s2fr

#include "s2fr/losses.hpp"

#include <cmath>
#include <vector>

#include "s2fr/error.hpp"

namespace s2fr {

namespace {

double penalty(double r, LossNorm norm) { return norm == LossNorm::L1 ? std::abs(r) : r * r; }

// d penalty / d r; the L1 subgradient at 0 is taken as 0.
double penalty_slope(double r, LossNorm norm) {
    if (norm == LossNorm::L2) return 2.0 * r;
    return r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
}

template <class T>
void check_kernels(const Tensor<T>& pred, std::span<const MtfKernel> kernels) {
    require(kernels.size() == static_cast<std::size_t>(pred.c), ErrorKind::Shape,
            "expected one kernel per prediction channel, got " + std::to_string(kernels.size()));
}

// Sums per-plane partials in index order so the result does not depend on scheduling.
double ordered_sum(const std::vector<double>& parts) {
    double s = 0.0;
    for (double p : parts) s += p;
    return s;
}

}  // namespace

std::string_view norm_name(LossNorm norm) { return norm == LossNorm::L1 ? "l1" : "l2"; }

std::optional<LossNorm> parse_norm(std::string_view name) {
    if (name == "l1" || name == "L1") return LossNorm::L1;
    if (name == "l2" || name == "L2") return LossNorm::L2;
    return std::nullopt;
}

template <class T>
LossResult<T> loss_supervised(const Tensor<T>& pred, const Tensor<T>& gt, LossNorm norm) {
    require(pred.same_shape(gt), ErrorKind::Shape,
            "prediction " + shape_string(pred) + " and reference " + shape_string(gt) + " differ");
    LossResult<T> out{{}, Tensor<T>(pred.n, pred.c, pred.h, pred.w)};
    const double count = static_cast<double>(pred.size());
    const int planes = pred.n * pred.c;
    const std::size_t ps = pred.plane_size();
    std::vector<double> parts(planes, 0.0);
#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        double acc = 0.0;
        for (std::size_t j = p * ps; j < (p + 1) * ps; ++j) {
            const double r = static_cast<double>(pred.data[j]) - gt.data[j];
            acc += penalty(r, norm);
            out.grad.data[j] = static_cast<T>(penalty_slope(r, norm) / count);
        }
        parts[p] = acc;
    }
    const double value = ordered_sum(parts) / count;
    out.loss = {value, value, 0.0};
    return out;
}

template <class T>
LossResult<T> loss_lp(const Tensor<T>& pred, const Tensor<T>& input20, std::span<const MtfKernel> kernels, int ratio,
                      LossNorm norm) {
    require(ratio >= 1, ErrorKind::Config, "ratio must be a positive integer");
    require(pred.n == input20.n && pred.c == input20.c && pred.h == ratio * input20.h &&
                pred.w == ratio * input20.w,
            ErrorKind::Shape,
            "prediction " + shape_string(pred) + " is not " + std::to_string(ratio) + "x the 20-m input " +
                shape_string(input20));
    check_kernels(pred, kernels);

    LossResult<T> out{{}, Tensor<T>(pred.n, pred.c, pred.h, pred.w)};
    const double count = static_cast<double>(input20.size());
    const int planes = pred.n * pred.c;
    std::vector<double> parts(planes, 0.0);
#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        const int i = p / pred.c, ch = p % pred.c;
        const auto target = input20.plane(i, ch);
        std::vector<T> low(target.size());
        lowpass_plane<T>(pred.plane(i, ch), pred.w, pred.h, kernels[ch], low, ratio);
        double acc = 0.0;
        std::vector<T> g(target.size());
        for (std::size_t j = 0; j < target.size(); ++j) {
            const double r = static_cast<double>(low[j]) - target[j];
            acc += penalty(r, norm);
            g[j] = static_cast<T>(penalty_slope(r, norm) / count);
        }
        parts[p] = acc;
        lowpass_adjoint_plane<T>(g, pred.w, pred.h, kernels[ch], out.grad.plane(i, ch), ratio);
    }
    const double value = ordered_sum(parts) / count;
    out.loss = {value, value, 0.0};
    return out;
}

template <class T>
LossResult<T> loss_det(const Tensor<T>& pred, const Tensor<T>& detail, std::span<const MtfKernel> kernels,
                       LossNorm norm) {
    require(pred.same_shape(detail), ErrorKind::Shape,
            "prediction " + shape_string(pred) + " and detail reference " + shape_string(detail) + " differ");
    check_kernels(pred, kernels);

    LossResult<T> out{{}, Tensor<T>(pred.n, pred.c, pred.h, pred.w)};
    const double count = static_cast<double>(pred.size());
    const int planes = pred.n * pred.c;
    std::vector<double> parts(planes, 0.0);
#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        const int i = p / pred.c, ch = p % pred.c;
        const auto x = pred.plane(i, ch);
        const auto d = detail.plane(i, ch);
        std::vector<T> low(x.size());
        lowpass_plane<T>(x, pred.w, pred.h, kernels[ch], low);
        double acc = 0.0;
        std::vector<T> g(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double r = (static_cast<double>(x[j]) - low[j]) - d[j];
            acc += penalty(r, norm);
            g[j] = static_cast<T>(penalty_slope(r, norm) / count);
        }
        parts[p] = acc;
        // d/dx of (x - L x) is (I - L^T).
        std::vector<T> back(x.size());
        lowpass_adjoint_plane<T>(g, pred.w, pred.h, kernels[ch], back);
        auto dst = out.grad.plane(i, ch);
        for (std::size_t j = 0; j < x.size(); ++j) dst[j] = g[j] - back[j];
    }
    const double value = ordered_sum(parts) / count;
    out.loss = {value, 0.0, value};
    return out;
}

template <class T>
LossResult<T> loss_total(const Tensor<T>& pred, const Tensor<T>& input20, const Tensor<T>& detail,
                         std::span<const MtfKernel> kernels, int ratio, const LossConfig& config) {
    require(config.beta >= 0.0 && std::isfinite(config.beta), ErrorKind::Config, "beta must be non-negative");
    LossResult<T> lp = loss_lp(pred, input20, kernels, ratio, config.norm);
    const LossResult<T> det = loss_det(pred, detail, kernels, config.norm);
    lp.loss.det = det.loss.det;
    lp.loss.total = lp.loss.lp + config.beta * det.loss.det;
    // With beta = 0 the gradient is left untouched, so the objective matches
    // the plain cycle-consistency loss bit for bit.
    if (config.beta != 0.0) {
        const T beta = static_cast<T>(config.beta);
        for (std::size_t j = 0; j < lp.grad.data.size(); ++j) lp.grad.data[j] += beta * det.grad.data[j];
    }
    return lp;
}

template LossResult<float> loss_supervised<float>(const Tensor<float>&, const Tensor<float>&, LossNorm);
template LossResult<double> loss_supervised<double>(const Tensor<double>&, const Tensor<double>&, LossNorm);
template LossResult<float> loss_lp<float>(const Tensor<float>&, const Tensor<float>&, std::span<const MtfKernel>,
                                          int, LossNorm);
template LossResult<double> loss_lp<double>(const Tensor<double>&, const Tensor<double>&,
                                            std::span<const MtfKernel>, int, LossNorm);
template LossResult<float> loss_det<float>(const Tensor<float>&, const Tensor<float>&, std::span<const MtfKernel>,
                                           LossNorm);
template LossResult<double> loss_det<double>(const Tensor<double>&, const Tensor<double>&,
                                             std::span<const MtfKernel>, LossNorm);
template LossResult<float> loss_total<float>(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                                             std::span<const MtfKernel>, int, const LossConfig&);
template LossResult<double> loss_total<double>(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&,
                                               std::span<const MtfKernel>, int, const LossConfig&);

}  // namespace s2fr

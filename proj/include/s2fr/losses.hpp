#pragma once

#include <optional>
#include <span>
#include <string_view>

#include "s2fr/mtf.hpp"
#include "s2fr/tensor.hpp"

namespace s2fr {

enum class LossNorm { L1, L2 };

std::string_view norm_name(LossNorm norm);
std::optional<LossNorm> parse_norm(std::string_view name);

struct LossConfig {
    double beta = 0.25;  // weight of the detail term
    LossNorm norm = LossNorm::L1;
};

/// total = lp + beta * det. Supervised losses report their value as `lp`.
struct LossBreakdown {
    double total = 0.0;
    double lp = 0.0;
    double det = 0.0;
};

template <class T>
struct LossResult {
    LossBreakdown loss;
    Tensor<T> grad;  // d(total)/d(pred)
};

/// Mean error between prediction and reference.
template <class T>
LossResult<T> loss_supervised(const Tensor<T>& pred, const Tensor<T>& gt, LossNorm norm = LossNorm::L1);

/// Cycle-consistency term: mean error between the MTF-filtered, decimated
/// prediction and the 20-m input. One kernel per prediction channel.
template <class T>
LossResult<T> loss_lp(const Tensor<T>& pred, const Tensor<T>& input20, std::span<const MtfKernel> kernels,
                      int ratio = 2, LossNorm norm = LossNorm::L1);

/// Detail term: mean error between highpass(pred) and the detail reference.
template <class T>
LossResult<T> loss_det(const Tensor<T>& pred, const Tensor<T>& detail, std::span<const MtfKernel> kernels,
                       LossNorm norm = LossNorm::L1);

template <class T>
LossResult<T> loss_total(const Tensor<T>& pred, const Tensor<T>& input20, const Tensor<T>& detail,
                         std::span<const MtfKernel> kernels, int ratio, const LossConfig& config);

}  // namespace s2fr

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>

namespace camkit {

/// Probability clamp for binary cross entropy.
inline constexpr double kBceEpsilon = 1e-7;

struct LossWeights {
    double lambda_dice = 1.0;
};

template <typename T>
struct CombinedLoss {
    T total{};
    T bce{};
    T dice{}; // mean over annotated samples, 0 if none annotated
};

/// Per-sample segmentation pair inside a batch. target == nullptr marks an
/// unannotated sample, which contributes nothing to the dice term.
template <typename T>
struct SegPair {
    std::span<const T> pred;
    const T* target = nullptr;
};

/// Mean of -[t log p + (1-t) log(1-p)], p clamped to [eps, 1-eps].
template <typename T>
T bce_loss(std::span<const T> pred, std::span<const T> target) {
    if (pred.size() != target.size())
        throw std::invalid_argument("bce_loss: shape mismatch");
    if (pred.empty()) throw std::invalid_argument("bce_loss: empty input");
    const T lo = static_cast<T>(kBceEpsilon), hi = static_cast<T>(1.0 - kBceEpsilon);
    double acc = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const double p = std::clamp(pred[i], lo, hi);
        const double t = target[i];
        acc -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    }
    return static_cast<T>(acc / pred.size());
}

/// d bce / d pred; zero where the clamp is active.
template <typename T>
T bce_loss_grad(std::span<const T> pred, std::span<const T> target, std::span<T> grad) {
    if (pred.size() != target.size() || grad.size() != pred.size())
        throw std::invalid_argument("bce_loss_grad: shape mismatch");
    const T lo = static_cast<T>(kBceEpsilon), hi = static_cast<T>(1.0 - kBceEpsilon);
    const double inv_n = 1.0 / pred.size();
    for (size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] < lo || pred[i] > hi) {
            grad[i] = T(0);
            continue;
        }
        const double p = pred[i], t = target[i];
        grad[i] = static_cast<T>(inv_n * (p - t) / (p * (1.0 - p)));
    }
    return bce_loss(pred, target);
}

/// Fused gradient of bce(sigmoid(z)) w.r.t. the logits z: (p - t)/n. pred
/// holds the sigmoid outputs. Use this to train a sigmoid head: it never
/// degenerates, while chaining bce_loss_grad through the sigmoid derivative
/// multiplies a clamped huge value by p(1-p), which is an exact float zero
/// once the sigmoid saturates, silencing exactly the confidently wrong
/// samples. Returns the (clamped) bce loss.
template <typename T>
T bce_logit_grad(std::span<const T> pred, std::span<const T> target, std::span<T> grad) {
    if (pred.size() != target.size() || grad.size() != pred.size())
        throw std::invalid_argument("bce_logit_grad: shape mismatch");
    const double inv_n = 1.0 / pred.size();
    for (size_t i = 0; i < pred.size(); ++i)
        grad[i] = static_cast<T>(inv_n * (static_cast<double>(pred[i]) - target[i]));
    return bce_loss(pred, target);
}

/// Soft dice loss over the whole map: 1 - (2*sum(p*t)+eps)/(sum(p)+sum(t)+eps).
template <typename T>
T dice_loss(std::span<const T> pred, std::span<const T> target, T epsilon = static_cast<T>(1e-6)) {
    if (pred.size() != target.size())
        throw std::invalid_argument("dice_loss: shape mismatch");
    double inter = 0.0, sum = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        inter += static_cast<double>(pred[i]) * target[i];
        sum += static_cast<double>(pred[i]) + target[i];
    }
    return static_cast<T>(1.0 - (2.0 * inter + epsilon) / (sum + epsilon));
}

template <typename T>
T dice_loss_grad(std::span<const T> pred, std::span<const T> target, std::span<T> grad,
                 T epsilon = static_cast<T>(1e-6)) {
    if (pred.size() != target.size() || grad.size() != pred.size())
        throw std::invalid_argument("dice_loss_grad: shape mismatch");
    double inter = 0.0, sum = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        inter += static_cast<double>(pred[i]) * target[i];
        sum += static_cast<double>(pred[i]) + target[i];
    }
    const double denom = sum + epsilon;
    const double num = 2.0 * inter + epsilon;
    for (size_t i = 0; i < pred.size(); ++i) {
        // d/dp_i [1 - num/denom], num' = 2 t_i, denom' = 1
        grad[i] = static_cast<T>(-(2.0 * target[i] * denom - num) / (denom * denom));
    }
    return static_cast<T>(1.0 - num / denom);
}

/// bce(class) + lambda_dice * mean-over-annotated(dice). A batch with no
/// annotated sample has a zero dice term.
template <typename T>
CombinedLoss<T> combined_loss(std::span<const T> class_pred, std::span<const T> class_target,
                              std::span<const SegPair<T>> segs, const LossWeights& weights,
                              T epsilon = static_cast<T>(1e-6)) {
    CombinedLoss<T> out;
    out.bce = bce_loss(class_pred, class_target);
    double dice_sum = 0.0;
    size_t annotated = 0;
    for (const auto& s : segs) {
        if (!s.target) continue;
        dice_sum += dice_loss(s.pred, std::span<const T>(s.target, s.pred.size()), epsilon);
        ++annotated;
    }
    out.dice = annotated ? static_cast<T>(dice_sum / annotated) : T(0);
    out.total = static_cast<T>(out.bce + weights.lambda_dice * out.dice);
    return out;
}

/// Gradients of combined_loss. seg_grads must be parallel to segs with
/// matching sizes; entries for unannotated samples are zero-filled.
template <typename T>
CombinedLoss<T> combined_loss_grad(std::span<const T> class_pred, std::span<const T> class_target,
                                   std::span<const SegPair<T>> segs, const LossWeights& weights,
                                   std::span<T> class_grad, std::span<std::span<T>> seg_grads,
                                   T epsilon = static_cast<T>(1e-6)) {
    if (seg_grads.size() != segs.size())
        throw std::invalid_argument("combined_loss_grad: seg_grads/segs mismatch");
    CombinedLoss<T> out;
    out.bce = bce_loss_grad(class_pred, class_target, class_grad);
    size_t annotated = 0;
    for (const auto& s : segs)
        if (s.target) ++annotated;
    double dice_sum = 0.0;
    for (size_t i = 0; i < segs.size(); ++i) {
        const auto& s = segs[i];
        if (seg_grads[i].size() != s.pred.size())
            throw std::invalid_argument("combined_loss_grad: grad buffer size mismatch");
        if (!s.target) {
            std::fill(seg_grads[i].begin(), seg_grads[i].end(), T(0));
            continue;
        }
        dice_sum += dice_loss_grad(s.pred, std::span<const T>(s.target, s.pred.size()),
                                   seg_grads[i], epsilon);
        const T scale = static_cast<T>(weights.lambda_dice / annotated);
        for (auto& g : seg_grads[i]) g *= scale;
    }
    out.dice = annotated ? static_cast<T>(dice_sum / annotated) : T(0);
    out.total = static_cast<T>(out.bce + weights.lambda_dice * out.dice);
    return out;
}

} // namespace camkit

#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "camkit/layers.hpp"

namespace camkit {

/// Adaptive-moment optimizer with bias correction. State is per parameter
/// tensor and starts fresh on construction, so each training phase gets
/// clean moment estimates.
class Adam {
public:
    explicit Adam(std::vector<Param*> params, double lr = 1e-3, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
        if (lr <= 0) throw std::invalid_argument("Adam: learning rate must be positive");
        m_.resize(params_.size());
        v_.resize(params_.size());
        for (size_t i = 0; i < params_.size(); ++i) {
            m_[i].assign(params_[i]->value.size(), 0.0f);
            v_[i].assign(params_[i]->value.size(), 0.0f);
        }
    }

    void zero_grad() {
        for (Param* p : params_) p->zero_grad();
    }

    /// One update over all trainable parameters; frozen ones are untouched.
    void step() {
        ++t_;
        const double correction1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
        const double correction2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
        for (size_t i = 0; i < params_.size(); ++i) {
            Param& p = *params_[i];
            if (!p.trainable) continue;
            for (size_t k = 0; k < p.value.size(); ++k) {
                const double g = p.grad[k];
                const double m = b1_ * m_[i][k] + (1.0 - b1_) * g;
                const double v = b2_ * v_[i][k] + (1.0 - b2_) * g * g;
                m_[i][k] = static_cast<float>(m);
                v_[i][k] = static_cast<float>(v);
                const double mhat = m / correction1;
                const double vhat = v / correction2;
                p.value[k] -= static_cast<float>(lr_ * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

private:
    std::vector<Param*> params_;
    std::vector<std::vector<float>> m_, v_;
    double lr_, b1_, b2_, eps_;
    long long t_ = 0;
};

/// Scales the trainable gradients so their global L2 norm is at most
/// max_norm. A guard against the rare gradient spike that can fling a
/// nearly converged network into saturation. max_norm <= 0 disables.
/// Returns the pre-clip norm.
inline double clip_grad_norm(const std::vector<Param*>& params, double max_norm) {
    double sq = 0.0;
    for (const Param* p : params) {
        if (!p->trainable) continue;
        for (const float g : p->grad) sq += static_cast<double>(g) * g;
    }
    const double norm = std::sqrt(sq);
    if (max_norm <= 0 || norm <= max_norm) return norm;
    const float scale = static_cast<float>(max_norm / norm);
    for (Param* p : params) {
        if (!p->trainable) continue;
        for (float& g : p->grad) g *= scale;
    }
    return norm;
}

} // namespace camkit

#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "model.hpp"
#include "numerics.hpp"

namespace graphkan {

/// Cosine annealing from lr_max at t = 0 to lr_min at t = epochs.
inline double cosine_lr(double lr_max, double lr_min, std::size_t epochs, std::size_t t) {
    if (epochs == 0) return lr_max;
    if (t >= epochs) return lr_min;
    if (t == 0) return lr_max;
    const double frac = static_cast<double>(t) / static_cast<double>(epochs);
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * frac));
}

/// Adam with bias correction. Moment buffers are created lazily on the first
/// step and mirror the parameter arrays one-to-one.
struct adam_state {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t t = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
};

inline void adam_step(adam_state& st, const std::vector<param_view<double>>& params,
                      const std::vector<param_view<double>>& grads, double lr) {
    if (params.size() != grads.size()) throw input_error("adam_step: parameter/gradient count mismatch");
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (params[p].data.size() != grads[p].data.size())
            throw input_error("adam_step: shape mismatch for " + params[p].name);
        for (double g : grads[p].data)
            if (!std::isfinite(g)) throw numeric_error("adam_step: non-finite gradient in " + grads[p].name);
    }
    if (st.m.empty()) {
        for (const auto& p : params) {
            st.m.emplace_back(p.data.size(), 0.0);
            st.v.emplace_back(p.data.size(), 0.0);
        }
    } else if (st.m.size() != params.size()) {
        throw input_error("adam_step: optimizer state does not match parameters");
    }
    ++st.t;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto x = params[p].data;
        const auto g = grads[p].data;
        auto& m = st.m[p];
        auto& v = st.v[p];
        for (std::size_t k = 0; k < x.size(); ++k) {
            m[k] = st.beta1 * m[k] + (1.0 - st.beta1) * g[k];
            v[k] = st.beta2 * v[k] + (1.0 - st.beta2) * g[k] * g[k];
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            x[k] -= lr * mhat / (std::sqrt(vhat) + st.eps);
        }
    }
}

}  // namespace graphkan

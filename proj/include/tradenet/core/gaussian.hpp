#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "tradenet/core/error.hpp"
#include "tradenet/core/rng.hpp"

namespace tradenet {

// Diagonal Gaussian with state-independent log standard deviations.

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;     // 0.5 * ln(2 pi)
inline constexpr double kHalfLog2PiE = 1.41893853320467274178;    // 0.5 * ln(2 pi e)

inline double gaussian_log_prob(std::span<const double> mean, std::span<const double> log_std,
                                std::span<const double> action) {
    if (mean.size() != log_std.size() || mean.size() != action.size()) {
        fail(ErrorKind::shape, "gaussian_log_prob dimension mismatch");
    }
    double lp = 0.0;
    for (std::size_t i = 0; i < mean.size(); ++i) {
        const double z = (action[i] - mean[i]) * std::exp(-log_std[i]);
        lp += -0.5 * z * z - log_std[i] - kHalfLog2Pi;
    }
    return lp;
}

/// Partial derivatives of gaussian_log_prob with respect to mean and log_std
/// (written into the output spans).
inline void gaussian_log_prob_grad(std::span<const double> mean, std::span<const double> log_std,
                                   std::span<const double> action, std::span<double> d_mean,
                                   std::span<double> d_log_std) {
    for (std::size_t i = 0; i < mean.size(); ++i) {
        const double inv_var = std::exp(-2.0 * log_std[i]);
        const double diff = action[i] - mean[i];
        d_mean[i] = diff * inv_var;
        d_log_std[i] = diff * diff * inv_var - 1.0;
    }
}

inline double gaussian_entropy(std::span<const double> log_std) {
    double e = 0.0;
    for (double s : log_std) e += s + kHalfLog2PiE;
    return e;
}

struct GaussianSample {
    std::vector<double> sample;
    double log_prob;
    double entropy;
};

inline GaussianSample gaussian_head(std::span<const double> mean, std::span<const double> log_std, Rng& rng) {
    if (mean.size() != log_std.size()) fail(ErrorKind::shape, "gaussian_head dimension mismatch");
    GaussianSample out{std::vector<double>(mean.size()), 0.0, gaussian_entropy(log_std)};
    for (std::size_t i = 0; i < mean.size(); ++i) {
        if (!std::isfinite(log_std[i])) fail(ErrorKind::numeric, "gaussian_head: non-finite log_std");
        out.sample[i] = mean[i] + std::exp(log_std[i]) * rng.normal();
    }
    out.log_prob = gaussian_log_prob(mean, log_std, out.sample);
    return out;
}

}  // namespace tradenet

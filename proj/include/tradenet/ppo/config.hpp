#pragma once

#include <cmath>
#include <cstdint>

#include "tradenet/core/error.hpp"

namespace tradenet::ppo {

struct PpoConfig {
    double gamma = 0.99;
    double gae_lambda = 0.95;
    double clip_eps = 0.2;
    double learning_rate = 3e-4;
    std::size_t n_steps = 2048;
    std::size_t n_epochs = 10;
    std::size_t minibatch_size = 64;
    double vf_coef = 0.5;
    double ent_coef = 0.0;
    double max_grad_norm = 0.5;
    std::size_t total_timesteps = 100000;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(gamma > 0 && gamma <= 1)) fail(ErrorKind::config, "ppo.gamma must be in (0,1]");
        if (!(gae_lambda >= 0 && gae_lambda <= 1)) fail(ErrorKind::config, "ppo.gae_lambda must be in [0,1]");
        if (!(clip_eps > 0)) fail(ErrorKind::config, "ppo.clip_eps must be positive");
        if (!(learning_rate >= 0) || !std::isfinite(learning_rate)) {
            fail(ErrorKind::config, "ppo.learning_rate must be finite and non-negative");
        }
        if (n_steps < 1) fail(ErrorKind::config, "ppo.n_steps must be >= 1");
        if (n_epochs < 1) fail(ErrorKind::config, "ppo.n_epochs must be >= 1");
        if (minibatch_size < 1 || minibatch_size > n_steps) {
            fail(ErrorKind::config, "ppo.minibatch_size must be in [1, n_steps]");
        }
        if (!(vf_coef >= 0) || !(ent_coef >= 0)) fail(ErrorKind::config, "ppo loss coefficients must be non-negative");
        if (!(max_grad_norm > 0)) fail(ErrorKind::config, "ppo.max_grad_norm must be positive");
        if (total_timesteps < 1) fail(ErrorKind::config, "ppo.total_timesteps must be >= 1");
    }

    std::size_t iterations() const { return (total_timesteps + n_steps - 1) / n_steps; }
};

}  // namespace tradenet::ppo

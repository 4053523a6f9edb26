#pragma once

namespace dronesim {

struct PpoConfig {
    double gamma = 0.99;
    double gae_lambda = 0.95;
    double clip_eps = 0.2;
    int epochs = 4;
    int minibatches = 8;
    double learning_rate = 3e-4;  // Adam
    double value_coef = 0.5;
    double entropy_coef = 1e-3;
    int rollout_len = 32;  // T
    double max_grad_norm = 1.0;
    bool centralized_critic = false;  // critic sees all agents' observations
    double log_std_init = -0.5;

    bool valid() const {
        return gamma >= 0.0 && gamma <= 1.0 && gae_lambda >= 0.0 && gae_lambda <= 1.0 &&
               clip_eps > 0.0 && epochs > 0 && minibatches > 0 && learning_rate > 0.0 &&
               rollout_len > 0;
    }
};

}  // namespace dronesim

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dronesim/rng.hpp"
#include "dronesim/tensor.hpp"

namespace dronesim {

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

struct Linear {
    Mat W;                  // [in][out], row-major
    std::vector<double> b;  // [out]
};

// Three tanh hidden layers plus a linear head.
struct Mlp {
    int in = 0, hidden = 0, out = 0;
    Linear l1, l2, l3, head;

    void init(int in_dim, int hidden_dim, int out_dim, double head_gain, Rng& rng);
};

struct MlpCache {
    Mat x;             // M×in
    Mat h1, h2, h3;    // M×hidden, post-tanh
    Mat out;           // M×out
    void resize(int M, const Mlp& net);
};

struct MlpScratch {
    Mat d;    // M×hidden delta buffer
    Mat dp;   // M×hidden second delta buffer
    Mat wT;   // transposed weight scratch
    void resize(int M, const Mlp& net);
};

void mlp_forward(const Mlp& net, const double* x, int M, MlpCache& cache, ThreadPool* pool);

struct MlpGrads {
    Linear l1, l2, l3, head;
    void match(const Mlp& net);
    void zero();
};

// Accumulates parameter gradients for dL/d(out); input gradients are not
// needed anywhere and are not produced.
void mlp_backward(const Mlp& net, const MlpCache& cache, const double* d_out, MlpGrads& grads,
                  MlpScratch& scratch, ThreadPool* pool);

// Running mean / variance normalizer with clipping, frozen at evaluation.
struct RunningNorm {
    std::vector<double> mean, var;
    double count = 1e-4;

    void init(int dim) {
        mean.assign(dim, 0.0);
        var.assign(dim, 1.0);
        count = 1e-4;
    }
    int dim() const { return static_cast<int>(mean.size()); }
    // out = clip((x − mean) / sqrt(var + 1e-8), ±10); in == out is allowed.
    void normalize(const double* in, double* out, int rows) const;
    // Chan et al. parallel merge of batch moments.
    void update(const double* batch_mean, const double* batch_var, double batch_count);
};

// Actor-critic parameter set: 3×hidden tanh trunks (separate actor and
// critic), linear heads, state-independent log-std, plus observation
// normalizer state. All 64-bit.
struct PolicyParams {
    int obs_dim = 0, act_dim = 0, critic_dim = 0, hidden = 256;
    Mlp actor;
    Mlp critic;
    std::vector<double> log_std;  // clamped to [kLogStdMin, kLogStdMax] on use
    RunningNorm obs_norm;

    static PolicyParams create(int obs_dim, int act_dim, int critic_dim, int hidden,
                               double log_std_init, std::uint64_t seed);

    std::size_t param_count() const;
    // Visits every trainable tensor in a fixed order (actor, critic, log_std).
    template <class Fn>
    void for_each_tensor(Fn&& fn) {
        for (Mlp* net : {&actor, &critic}) {
            for (Linear* l : {&net->l1, &net->l2, &net->l3, &net->head}) {
                fn(l->W.d.data(), l->W.d.size());
                fn(l->b.data(), l->b.size());
            }
        }
        fn(log_std.data(), log_std.size());
    }
};

struct PolicyGrads {
    MlpGrads actor, critic;
    std::vector<double> log_std;

    void match(const PolicyParams& p);
    void zero();
    template <class Fn>
    void for_each_tensor(Fn&& fn) {
        for (MlpGrads* net : {&actor, &critic}) {
            for (Linear* l : {&net->l1, &net->l2, &net->l3, &net->head}) {
                fn(l->W.d.data(), l->W.d.size());
                fn(l->b.data(), l->b.size());
            }
        }
        fn(log_std.data(), log_std.size());
    }
};

// Checkpoint file: little-endian binary, header with dims, then row-major
// weight blocks in the for_each_tensor order.
void save_policy(const std::string& path, const PolicyParams& params, std::int64_t global_step);
PolicyParams load_policy(const std::string& path, std::int64_t* global_step = nullptr);

}  // namespace dronesim

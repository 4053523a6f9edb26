#include "dronesim/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>

namespace dronesim {

namespace {

// Orthogonal-style init: orthonormalize the shorter side of a Gaussian
// matrix (rows when in <= out, columns otherwise), then scale by gain.
void orthogonal_init(Mat& W, double gain, Rng& rng) {
    const int in = W.rows, out = W.cols;
    for (auto& v : W.d) v = rng.normal();
    const bool by_rows = in <= out;
    const int nvec = by_rows ? in : out;
    const int len = by_rows ? out : in;
    auto get = [&](int v, int k) -> double& { return by_rows ? W.at(v, k) : W.at(k, v); };
    for (int j = 0; j < nvec; ++j) {
        for (int k = 0; k < j; ++k) {
            double d = 0.0;
            for (int t = 0; t < len; ++t) d += get(j, t) * get(k, t);
            for (int t = 0; t < len; ++t) get(j, t) -= d * get(k, t);
        }
        double n = 0.0;
        for (int t = 0; t < len; ++t) n += get(j, t) * get(j, t);
        n = std::sqrt(n);
        if (n < 1e-12) n = 1.0;
        for (int t = 0; t < len; ++t) get(j, t) *= gain / n;
    }
}

void init_linear(Linear& l, int in, int out, double gain, Rng& rng) {
    l.W.resize(in, out);
    orthogonal_init(l.W, gain, rng);
    l.b.assign(out, 0.0);
}

void add_bias_tanh(Mat& m, const std::vector<double>& b, ThreadPool* pool) {
    maybe_parallel_for(pool, static_cast<std::size_t>(m.rows), [&](std::size_t rb, std::size_t re) {
        for (std::size_t i = rb; i < re; ++i) {
            double* row = m.row(static_cast<int>(i));
            for (int j = 0; j < m.cols; ++j) row[j] = std::tanh(row[j] + b[j]);
        }
    }, 64);
}

void add_bias(Mat& m, const std::vector<double>& b, ThreadPool* pool) {
    maybe_parallel_for(pool, static_cast<std::size_t>(m.rows), [&](std::size_t rb, std::size_t re) {
        for (std::size_t i = rb; i < re; ++i) {
            double* row = m.row(static_cast<int>(i));
            for (int j = 0; j < m.cols; ++j) row[j] += b[j];
        }
    }, 64);
}

// delta ← (delta_upstream) ⊙ (1 − h²), where h holds tanh activations
void tanh_backward(Mat& delta, const Mat& h, ThreadPool* pool) {
    maybe_parallel_for(pool, static_cast<std::size_t>(delta.rows),
                       [&](std::size_t rb, std::size_t re) {
                           for (std::size_t i = rb; i < re; ++i) {
                               double* d = delta.row(static_cast<int>(i));
                               const double* a = h.row(static_cast<int>(i));
                               for (int j = 0; j < delta.cols; ++j) d[j] *= 1.0 - a[j] * a[j];
                           }
                       }, 64);
}

void bias_grad(const double* d, int M, int N, std::vector<double>& gb) {
    for (int i = 0; i < M; ++i) {
        const double* row = d + static_cast<std::size_t>(i) * N;
        for (int j = 0; j < N; ++j) gb[j] += row[j];
    }
}

}  // namespace

void Mlp::init(int in_dim, int hidden_dim, int out_dim, double head_gain, Rng& rng) {
    in = in_dim;
    hidden = hidden_dim;
    out = out_dim;
    const double g = 1.41;
    init_linear(l1, in, hidden, g, rng);
    init_linear(l2, hidden, hidden, g, rng);
    init_linear(l3, hidden, hidden, g, rng);
    init_linear(head, hidden, out, head_gain, rng);
}

void MlpCache::resize(int M, const Mlp& net) {
    x.resize(M, net.in);
    h1.resize(M, net.hidden);
    h2.resize(M, net.hidden);
    h3.resize(M, net.hidden);
    out.resize(M, net.out);
}

void MlpScratch::resize(int M, const Mlp& net) {
    d.resize(M, net.hidden);
    dp.resize(M, net.hidden);
    const int wmax = std::max(net.hidden * net.hidden,
                              std::max(net.in * net.hidden, net.hidden * net.out));
    wT.resize(1, wmax);
}

void mlp_forward(const Mlp& net, const double* x, int M, MlpCache& c, ThreadPool* pool) {
    c.resize(M, net);
    std::memcpy(c.x.d.data(), x, sizeof(double) * c.x.size());
    gemm_nn(c.x.d.data(), net.l1.W.d.data(), c.h1.d.data(), M, net.in, net.hidden, false, pool);
    add_bias_tanh(c.h1, net.l1.b, pool);
    gemm_nn(c.h1.d.data(), net.l2.W.d.data(), c.h2.d.data(), M, net.hidden, net.hidden, false,
            pool);
    add_bias_tanh(c.h2, net.l2.b, pool);
    gemm_nn(c.h2.d.data(), net.l3.W.d.data(), c.h3.d.data(), M, net.hidden, net.hidden, false,
            pool);
    add_bias_tanh(c.h3, net.l3.b, pool);
    gemm_nn(c.h3.d.data(), net.head.W.d.data(), c.out.d.data(), M, net.hidden, net.out, false,
            pool);
    add_bias(c.out, net.head.b, pool);
}

void MlpGrads::match(const Mlp& net) {
    auto m = [](Linear& g, const Linear& l) {
        g.W.resize(l.W.rows, l.W.cols);
        g.b.assign(l.b.size(), 0.0);
    };
    m(l1, net.l1);
    m(l2, net.l2);
    m(l3, net.l3);
    m(head, net.head);
}

void MlpGrads::zero() {
    for (Linear* l : {&l1, &l2, &l3, &head}) {
        l->W.zero();
        std::fill(l->b.begin(), l->b.end(), 0.0);
    }
}

void mlp_backward(const Mlp& net, const MlpCache& c, const double* d_out, MlpGrads& g,
                  MlpScratch& s, ThreadPool* pool) {
    const int M = c.x.rows;
    s.resize(M, net);
    // head
    gemm_tn(c.h3.d.data(), d_out, g.head.W.d.data(), M, net.hidden, net.out, true, pool);
    bias_grad(d_out, M, net.out, g.head.b);
    transpose(net.head.W.d.data(), s.wT.d.data(), net.hidden, net.out);
    gemm_nn(d_out, s.wT.d.data(), s.d.d.data(), M, net.out, net.hidden, false, pool);
    tanh_backward(s.d, c.h3, pool);
    // layer 3
    gemm_tn(c.h2.d.data(), s.d.d.data(), g.l3.W.d.data(), M, net.hidden, net.hidden, true, pool);
    bias_grad(s.d.d.data(), M, net.hidden, g.l3.b);
    transpose(net.l3.W.d.data(), s.wT.d.data(), net.hidden, net.hidden);
    gemm_nn(s.d.d.data(), s.wT.d.data(), s.dp.d.data(), M, net.hidden, net.hidden, false, pool);
    tanh_backward(s.dp, c.h2, pool);
    // layer 2
    gemm_tn(c.h1.d.data(), s.dp.d.data(), g.l2.W.d.data(), M, net.hidden, net.hidden, true, pool);
    bias_grad(s.dp.d.data(), M, net.hidden, g.l2.b);
    transpose(net.l2.W.d.data(), s.wT.d.data(), net.hidden, net.hidden);
    gemm_nn(s.dp.d.data(), s.wT.d.data(), s.d.d.data(), M, net.hidden, net.hidden, false, pool);
    tanh_backward(s.d, c.h1, pool);
    // layer 1
    gemm_tn(c.x.d.data(), s.d.d.data(), g.l1.W.d.data(), M, net.in, net.hidden, true, pool);
    bias_grad(s.d.d.data(), M, net.hidden, g.l1.b);
}

void RunningNorm::normalize(const double* in, double* out, int rows) const {
    const int n = dim();
    for (int i = 0; i < rows; ++i) {
        const double* src = in + static_cast<std::size_t>(i) * n;
        double* dst = out + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double v = (src[j] - mean[j]) / std::sqrt(var[j] + 1e-8);
            dst[j] = std::clamp(v, -10.0, 10.0);
        }
    }
}

void RunningNorm::update(const double* batch_mean, const double* batch_var, double batch_count) {
    const int n = dim();
    const double tot = count + batch_count;
    for (int j = 0; j < n; ++j) {
        const double delta = batch_mean[j] - mean[j];
        const double m_a = var[j] * count;
        const double m_b = batch_var[j] * batch_count;
        var[j] = (m_a + m_b + delta * delta * count * batch_count / tot) / tot;
        mean[j] += delta * batch_count / tot;
    }
    count = tot;
}

PolicyParams PolicyParams::create(int obs_dim, int act_dim, int critic_dim, int hidden,
                                  double log_std_init, std::uint64_t seed) {
    PolicyParams p;
    p.obs_dim = obs_dim;
    p.act_dim = act_dim;
    p.critic_dim = critic_dim > 0 ? critic_dim : obs_dim;
    p.hidden = hidden;
    Rng rng(mix_seed(seed, 0xC0FFEE, 0, 7));
    p.actor.init(obs_dim, hidden, act_dim, 0.01, rng);
    p.critic.init(p.critic_dim, hidden, 1, 1.0, rng);
    p.log_std.assign(act_dim, log_std_init);
    p.obs_norm.init(obs_dim);
    return p;
}

std::size_t PolicyParams::param_count() const {
    std::size_t n = 0;
    const_cast<PolicyParams*>(this)->for_each_tensor(
        [&](double*, std::size_t c) { n += c; });
    return n;
}

void PolicyGrads::match(const PolicyParams& p) {
    actor.match(p.actor);
    critic.match(p.critic);
    log_std.assign(p.log_std.size(), 0.0);
}

void PolicyGrads::zero() {
    actor.zero();
    critic.zero();
    std::fill(log_std.begin(), log_std.end(), 0.0);
}

namespace {

constexpr std::uint32_t kCkptMagic = 0x4B505344;  // "DSPK"
constexpr std::uint32_t kCkptVersion = 1;

void write_block(std::FILE* f, const void* p, std::size_t bytes) {
    if (std::fwrite(p, 1, bytes, f) != bytes) throw std::runtime_error("checkpoint: short write");
}

void read_block(std::FILE* f, void* p, std::size_t bytes) {
    if (std::fread(p, 1, bytes, f) != bytes) throw std::runtime_error("checkpoint: short read");
}

}  // namespace

void save_policy(const std::string& path, const PolicyParams& params, std::int64_t global_step) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (f == nullptr) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
    try {
        const std::uint32_t head[2] = {kCkptMagic, kCkptVersion};
        write_block(f, head, sizeof(head));
        const std::int32_t dims[5] = {params.obs_dim, params.act_dim, params.critic_dim,
                                      params.hidden, 3};
        write_block(f, dims, sizeof(dims));
        write_block(f, &global_step, sizeof(global_step));
        write_block(f, &params.obs_norm.count, sizeof(double));
        write_block(f, params.obs_norm.mean.data(), sizeof(double) * params.obs_norm.mean.size());
        write_block(f, params.obs_norm.var.data(), sizeof(double) * params.obs_norm.var.size());
        const_cast<PolicyParams&>(params).for_each_tensor(
            [&](double* p, std::size_t n) { write_block(f, p, sizeof(double) * n); });
    } catch (...) {
        std::fclose(f);
        throw;
    }
    std::fclose(f);
}

PolicyParams load_policy(const std::string& path, std::int64_t* global_step) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (f == nullptr) throw std::runtime_error("checkpoint: cannot open: " + path);
    PolicyParams p;
    try {
        std::uint32_t head[2];
        read_block(f, head, sizeof(head));
        if (head[0] != kCkptMagic) throw std::runtime_error("checkpoint: bad magic: " + path);
        if (head[1] != kCkptVersion) throw std::runtime_error("checkpoint: bad version");
        std::int32_t dims[5];
        read_block(f, dims, sizeof(dims));
        std::int64_t step = 0;
        read_block(f, &step, sizeof(step));
        if (global_step != nullptr) *global_step = step;
        p = PolicyParams::create(dims[0], dims[1], dims[2], dims[3], 0.0, 0);
        read_block(f, &p.obs_norm.count, sizeof(double));
        read_block(f, p.obs_norm.mean.data(), sizeof(double) * p.obs_norm.mean.size());
        read_block(f, p.obs_norm.var.data(), sizeof(double) * p.obs_norm.var.size());
        p.for_each_tensor([&](double* d, std::size_t n) { read_block(f, d, sizeof(double) * n); });
    } catch (...) {
        std::fclose(f);
        throw;
    }
    std::fclose(f);
    return p;
}

}  // namespace dronesim

// SPDX-License-Identifier: Apache-2.0

#include "rfsolve/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace rfsolve {

void FeatureCache::store(const CacheKey& key, Tensor value) {
    auto [it, inserted] = entries_.emplace(key, std::move(value));
    if (!inserted) throw std::logic_error("feature cache: key written twice in one run");
}

const Tensor* FeatureCache::find(const CacheKey& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
}

AttentionField::AttentionField(std::size_t tokens, std::size_t channels,
                               std::size_t n_blocks, std::uint64_t seed,
                               double weight_scale, double cond_scale, double out_scale)
    : tokens_(tokens), channels_(channels), cond_seed_(seed ^ 0xa5a5a5a5ull),
      cond_scale_(cond_scale), out_scale_(out_scale) {
    if (tokens_ == 0 || channels_ == 0 || n_blocks == 0)
        throw std::invalid_argument("attention field: empty geometry");
    Rng rng(seed);
    double s = weight_scale / std::sqrt(static_cast<double>(channels_));
    for (std::size_t b = 0; b < n_blocks; ++b) {
        AttnBlock blk;
        blk.channels = channels_;
        blk.wq.resize(channels_ * channels_);
        blk.wk.resize(channels_ * channels_);
        blk.wv.resize(channels_ * channels_);
        blk.wo.resize(channels_ * channels_);
        for (double& w : blk.wq) w = s * rng.normal();
        for (double& w : blk.wk) w = s * rng.normal();
        for (double& w : blk.wv) w = s * rng.normal();
        for (double& w : blk.wo) w = s * rng.normal();
        blocks_.push_back(std::move(blk));
    }
    time_vec_.resize(channels_);
    for (double& v : time_vec_) v = 0.3 * rng.normal();
}

Tensor AttentionField::condition_embedding(ConditionId c) const {
    Rng rng(cond_seed_ + 0x100000001ull * (c.id + 1));
    Tensor e = Tensor::zeros({tokens_, channels_});
    for (double& v : e.data) v = cond_scale_ * rng.normal();
    return e;
}

namespace {

// rows (T x C) times square (C x C), row-major
void matmul_square(const std::vector<double>& x, const std::vector<double>& w,
                   std::vector<double>& out, std::size_t tokens, std::size_t ch) {
    out.assign(tokens * ch, 0.0);
    for (std::size_t r = 0; r < tokens; ++r)
        for (std::size_t k = 0; k < ch; ++k) {
            double xv = x[r * ch + k];
            if (xv == 0.0) continue;
            const double* wrow = w.data() + k * ch;
            double* orow = out.data() + r * ch;
            for (std::size_t c = 0; c < ch; ++c) orow[c] += xv * wrow[c];
        }
}

}  // namespace

Tensor AttentionField::evaluate(const Tensor& state, double t,
                                std::optional<ConditionId> condition) const {
    return forward(state, t, condition, nullptr, nullptr);
}

Tensor AttentionField::forward(const Tensor& state, double t,
                               std::optional<ConditionId> condition,
                               const ValueMap* v_override, ValueMap* v_capture) const {
    check_state(state);
    std::size_t tc = tokens_ * channels_;
    std::vector<double> x(state.data.begin(), state.data.end());
    for (std::size_t r = 0; r < tokens_; ++r)
        for (std::size_t c = 0; c < channels_; ++c) x[r * channels_ + c] += t * time_vec_[c];
    // The condition enters only through the value projections: overriding V
    // for every block then removes all condition dependence, which is what
    // makes full feature sharing pull the output onto the reconstruction.
    Tensor cond_e = condition ? condition_embedding(*condition)
                              : Tensor::zeros({tokens_, channels_});

    std::vector<double> normed(tc), v_in(tc), q, k, v, f(tc), proj;
    double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(channels_));
    for (int m = 0; m < block_count(); ++m) {
        const AttnBlock& blk = blocks_[m];
        for (std::size_t r = 0; r < tokens_; ++r) {
            double ms = 0.0;
            for (std::size_t c = 0; c < channels_; ++c) {
                double xv = x[r * channels_ + c];
                ms += xv * xv;
            }
            double inv = 1.0 / std::sqrt(ms / channels_ + 1e-6);
            for (std::size_t c = 0; c < channels_; ++c)
                normed[r * channels_ + c] = x[r * channels_ + c] * inv;
        }
        matmul_square(normed, blk.wq, q, tokens_, channels_);
        matmul_square(normed, blk.wk, k, tokens_, channels_);
        for (std::size_t i = 0; i < tc; ++i) v_in[i] = normed[i] + cond_e.data[i];
        matmul_square(v_in, blk.wv, v, tokens_, channels_);

        if (v_capture) (*v_capture)[m] = Tensor({tokens_, channels_}, v);
        if (v_override) {
            auto it = v_override->find(m);
            if (it != v_override->end()) {
                if (it->second.size() != tc)
                    throw std::invalid_argument("attention: override value shape mismatch");
                v.assign(it->second.data.begin(), it->second.data.end());
            }
        }

        // softmax(Q K^T / sqrt(d)) V
        std::vector<double> row(tokens_);
        for (std::size_t r = 0; r < tokens_; ++r) {
            double mx = -1e300;
            for (std::size_t s = 0; s < tokens_; ++s) {
                double dot = 0.0;
                for (std::size_t c = 0; c < channels_; ++c)
                    dot += q[r * channels_ + c] * k[s * channels_ + c];
                row[s] = dot * inv_sqrt_d;
                if (row[s] > mx) mx = row[s];
            }
            double z = 0.0;
            for (std::size_t s = 0; s < tokens_; ++s) {
                row[s] = std::exp(row[s] - mx);
                z += row[s];
            }
            for (std::size_t c = 0; c < channels_; ++c) {
                double acc = 0.0;
                for (std::size_t s = 0; s < tokens_; ++s)
                    acc += row[s] * v[s * channels_ + c];
                f[r * channels_ + c] = acc / z;
            }
        }
        matmul_square(f, blk.wo, proj, tokens_, channels_);
        for (std::size_t i = 0; i < tc; ++i) x[i] += proj[i];
    }

    Tensor out(state.shape, std::move(x));
    for (double& o : out.data) o *= out_scale_;
    if (!out.all_finite()) throw std::runtime_error("attention field: non-finite output");
    return out;
}

namespace {

void check_share(const ShareConfig& share, int n_steps, int n_blocks, int order) {
    if (share.n_share < 0 || share.n_share > n_steps)
        throw std::invalid_argument("share: n_share out of range");
    if (share.n_share > 0 && (share.m_share < 1 || share.m_share > n_blocks))
        throw std::invalid_argument("share: m_share out of range");
    if (share.n_share > 0 && order > 2)
        throw std::invalid_argument("share: feature sharing supports orders 1 and 2");
}

PassTag to_tag(Pass p) {
    return p == Pass::Main ? PassTag::Main : PassTag::Probe;
}

}  // namespace

EditResult invert_with_capture(const AttentionField& field, const Tensor& z0,
                               const TimeGrid& grid, const SolverConfig& config,
                               ConditionId source, const ShareConfig& share) {
    grid.validate();
    int n = grid.intervals();
    int blocks = field.block_count();
    check_share(share, n, blocks, config.order);

    EditResult result;

    SolverConfig invert_cfg = config;
    invert_cfg.direction = Direction::Invert;
    TrajectoryResult inv = run_trajectory(field, z0, grid, invert_cfg, source);
    result.noise = std::move(inv.final_state);
    result.inversion_record = std::move(inv.record);

    SolverConfig denoise_cfg = config;
    denoise_cfg.direction = Direction::Denoise;
    EvalFn eval = [&](const Tensor& state, double t, Pass pass, int step) {
        bool shared = share.n_share > 0 && step < share.n_share;
        if (!shared) return field.forward(state, t, source, nullptr, nullptr);
        AttentionField::ValueMap captured;
        Tensor out = field.forward(state, t, source, nullptr, &captured);
        for (int m = blocks - share.m_share; m < blocks; ++m)
            result.cache.store({step, m, to_tag(pass)}, std::move(captured.at(m)));
        return out;
    };
    result.reconstruction =
        run_trajectory(eval, result.noise, grid, denoise_cfg, /*record=*/false).final_state;
    return result;
}

Tensor denoise_with_share(const AttentionField& field, const Tensor& noise,
                          const TimeGrid& grid, const SolverConfig& config,
                          ConditionId target, const ShareConfig& share,
                          const FeatureCache& cache, bool share_probe_pass) {
    grid.validate();
    int n = grid.intervals();
    int blocks = field.block_count();
    check_share(share, n, blocks, config.order);

    SolverConfig cfg = config;
    cfg.direction = Direction::Denoise;

    EvalFn eval = [&](const Tensor& state, double t, Pass pass, int step) {
        bool shared = share.n_share > 0 && step < share.n_share;
        if (shared && pass == Pass::Probe && !share_probe_pass) shared = false;
        if (!shared) return field.forward(state, t, target, nullptr, nullptr);
        AttentionField::ValueMap override_map;
        for (int m = blocks - share.m_share; m < blocks; ++m) {
            const Tensor* v = cache.find({step, m, to_tag(pass)});
            if (!v) throw std::runtime_error("denoise_with_share: missing cache entry");
            override_map.emplace(m, *v);
        }
        return field.forward(state, t, target, &override_map, nullptr);
    };
    return run_trajectory(eval, noise, grid, cfg, /*record=*/false).final_state;
}

}  // namespace rfsolve

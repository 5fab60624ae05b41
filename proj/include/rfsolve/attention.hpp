// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <vector>

#include "rfsolve/field.hpp"
#include "rfsolve/rng.hpp"
#include "rfsolve/solver.hpp"
#include "rfsolve/tensor.hpp"

namespace rfsolve {

enum class PassTag { Main, Probe };

struct CacheKey {
    int step = 0;   // denoising step index, 0..N-1 from the noise end
    int block = 0;  // block index within the field
    PassTag pass = PassTag::Main;
    auto operator<=>(const CacheKey&) const = default;
};

/// Value features stored during inversion, replayed during denoising.
/// Write-once per key per run.
class FeatureCache {
public:
    void store(const CacheKey& key, Tensor value);
    const Tensor* find(const CacheKey& key) const;
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

private:
    std::map<CacheKey, Tensor> entries_;
};

struct ShareConfig {
    int n_share = 0;  // timesteps shared at the noise end; 0 disables
    int m_share = 1;  // number of final blocks shared
};

/// One self-attention block: RMS pre-norm, square Q/K/V/O projections,
/// residual connection. Single head.
struct AttnBlock {
    std::size_t channels = 0;
    std::vector<double> wq, wk, wv, wo;  // channels x channels, row-major
};

/// Toy attention velocity network. State is reshaped to tokens x channels;
/// a per-channel time vector scaled by t and a condition-dependent
/// per-token embedding are added before the block stack. The velocity is
/// the scaled output of the final block.
class AttentionField final : public VelocityField {
public:
    /// Per-block value override/capture maps keyed by block index.
    using ValueMap = std::map<int, Tensor>;

    AttentionField(std::size_t tokens, std::size_t channels, std::size_t n_blocks,
                   std::uint64_t seed, double weight_scale = 0.2,
                   double cond_scale = 0.1, double out_scale = 0.3);

    std::size_t dim() const override { return tokens_ * channels_; }
    std::size_t tokens() const { return tokens_; }
    std::size_t channels() const { return channels_; }
    int block_count() const { return static_cast<int>(blocks_.size()); }

    Tensor evaluate(const Tensor& state, double t,
                    std::optional<ConditionId> condition = {}) const override;

    /// Forward pass with feature hooks: for each block, the computed value
    /// tensor is written to *v_capture (when given) and replaced by the
    /// entry in *v_override (when present for that block).
    Tensor forward(const Tensor& state, double t, std::optional<ConditionId> condition,
                   const ValueMap* v_override, ValueMap* v_capture) const;

private:
    Tensor condition_embedding(ConditionId c) const;

    std::size_t tokens_, channels_;
    std::vector<AttnBlock> blocks_;
    std::vector<double> time_vec_;  // per channel
    std::uint64_t cond_seed_;
    double cond_scale_, out_scale_;
};

struct EditResult {
    Tensor noise;           // inverted latent
    Tensor reconstruction;  // source-condition denoise of that latent
    TrajectoryRecord inversion_record;
    FeatureCache cache;
};

/// Editing front half: invert z0 to noise under the source condition, then
/// denoise that noise once under the source condition, capturing value
/// features of the last m_share blocks during the first n_share denoising
/// timesteps, for both the main and derivative-probe passes. Capturing
/// along the reconstruction pass (rather than the inversion pass) is what
/// makes same-condition sharing an exact no-op: the override run then
/// retraces the capture run state for state. Cache keys use the denoising
/// step index directly.
EditResult invert_with_capture(const AttentionField& field, const Tensor& z0,
                               const TimeGrid& grid, const SolverConfig& config,
                               ConditionId source, const ShareConfig& share);

/// Denoising (noise -> data) under the target condition, overriding value
/// features from the cache during the first n_share denoising timesteps.
/// `share_probe_pass` exists only so tests can show the probe-pass entries
/// are load-bearing.
Tensor denoise_with_share(const AttentionField& field, const Tensor& noise,
                          const TimeGrid& grid, const SolverConfig& config,
                          ConditionId target, const ShareConfig& share,
                          const FeatureCache& cache, bool share_probe_pass = true);

}  // namespace rfsolve

// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rfsolve/field.hpp"
#include "rfsolve/rng.hpp"
#include "rfsolve/tensor.hpp"

namespace rfsolve {

/// One dense layer, weights row-major (out x in).
struct MlpLayer {
    std::size_t in = 0, out = 0;
    std::vector<double> weight;
    std::vector<double> bias;
};

/// Small tanh MLP velocity field. Time enters by concatenating the scalar t
/// to the state, so input dim = data_dim + 1. The condition input is
/// accepted and ignored; conditioning lives in the attention field.
class MlpField final : public VelocityField {
public:
    MlpField(std::size_t data_dim, const std::vector<std::size_t>& hidden, Rng& rng);
    MlpField(std::size_t data_dim, std::vector<MlpLayer> layers);

    std::size_t dim() const override { return data_dim_; }
    Tensor evaluate(const Tensor& state, double t,
                    std::optional<ConditionId> condition = {}) const override;

    std::vector<MlpLayer>& layers() { return layers_; }
    const std::vector<MlpLayer>& layers() const { return layers_; }
    std::size_t parameter_count() const;

private:
    std::size_t data_dim_;
    std::vector<MlpLayer> layers_;

    friend struct MlpBackprop;
};

/// Parameter-shaped gradient container, same layout as the layer list.
struct MlpGradients {
    std::vector<MlpLayer> layers;  // weight/bias hold gradients
    static MlpGradients zeros_like(const MlpField& f);
    void scale_in_place(double s);
};

/// Mean over the batch of ||(x1 - x0) - v(x_t, t)||^2 with
/// x_t = t*x1 + (1-t)*x0, plus the exact reverse-mode gradient.
/// Batches are (B x d) tensors; t has one entry per sample.
struct LossAndGrad {
    double loss = 0.0;
    MlpGradients grad;
};
LossAndGrad rf_loss_batch(const MlpField& field, const Tensor& x0, const Tensor& x1,
                          const std::vector<double>& t);

struct GaussComponent {
    std::vector<double> mean;
    std::vector<double> std;
    double weight = 1.0;
};

/// Seeded 2-D (or n-D for mixtures) sample sources standing in for a data
/// distribution.
class ToyDistribution {
public:
    static ToyDistribution gaussian_mixture(std::vector<GaussComponent> components);
    static ToyDistribution two_moons(double noise);
    static ToyDistribution checkerboard(int cells);

    std::size_t dim() const { return dim_; }
    /// One sample row into out[row_offset..].
    void sample(Rng& rng, Tensor& out, std::size_t row) const;
    Tensor sample_batch(Rng& rng, std::size_t n) const;

private:
    enum class Kind { Mixture, TwoMoons, Checkerboard };
    Kind kind_ = Kind::Mixture;
    std::size_t dim_ = 2;
    std::vector<GaussComponent> components_;
    double noise_ = 0.0;
    int cells_ = 4;
};

enum class Optimizer { SGD, Adam };

struct TrainConfig {
    std::size_t batch_size = 64;
    std::size_t steps = 2000;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    Optimizer optimizer = Optimizer::Adam;
    // Adam moments
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

struct TrainResult {
    std::vector<double> loss_curve;
};

/// Trains `field` in place to transport dist0 (data, t=0) to a standard
/// Gaussian (noise, t=1). Fresh x0, x1, t each step. Aborts on divergence.
TrainResult train(MlpField& field, const ToyDistribution& dist0, const TrainConfig& config);

/// Serialization: one RFTENSOR file per parameter tensor plus a plain-text
/// manifest listing layer shapes in order.
void save_mlp(const MlpField& field, const std::string& dir);
MlpField load_mlp(const std::string& dir);

}  // namespace rfsolve

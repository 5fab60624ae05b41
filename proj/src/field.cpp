// SPDX-License-Identifier: Apache-2.0

#include "rfsolve/field.hpp"

#include <cmath>

namespace rfsolve {

Tensor ConstantField::evaluate(const Tensor& state, double, std::optional<ConditionId>) const {
    check_state(state);
    return c_;
}

Tensor ConstantField::exact_solution(const Tensor& z, double t0, double t1) const {
    return add_scaled(z, t1 - t0, c_);
}

Tensor ConstantField::total_derivative(const Tensor& state, double) const {
    return Tensor::zeros(state.shape);
}

Tensor LinearStateField::evaluate(const Tensor& state, double, std::optional<ConditionId>) const {
    check_state(state);
    return scale(state, a_);
}

Tensor LinearStateField::exact_solution(const Tensor& z, double t0, double t1) const {
    return scale(z, std::exp(a_ * (t1 - t0)));
}

Tensor LinearStateField::total_derivative(const Tensor& state, double) const {
    // dv/dt + (dv/dz)*v = 0 + a*(a*z)
    return scale(state, a_ * a_);
}

Tensor LinearTimeField::evaluate(const Tensor& state, double t, std::optional<ConditionId>) const {
    check_state(state);
    Tensor out = Tensor::zeros(state.shape);
    for (double& v : out.data) v = t;
    return out;
}

Tensor LinearTimeField::exact_solution(const Tensor& z, double t0, double t1) const {
    Tensor out = z;
    double inc = 0.5 * (t1 * t1 - t0 * t0);
    for (double& v : out.data) v += inc;
    return out;
}

Tensor LinearTimeField::total_derivative(const Tensor& state, double) const {
    Tensor out = Tensor::zeros(state.shape);
    for (double& v : out.data) v = 1.0;
    return out;
}

Tensor QuadraticTimeField::evaluate(const Tensor& state, double t, std::optional<ConditionId>) const {
    check_state(state);
    Tensor out = Tensor::zeros(state.shape);
    for (double& v : out.data) v = t * t;
    return out;
}

Tensor QuadraticTimeField::exact_solution(const Tensor& z, double t0, double t1) const {
    Tensor out = z;
    double inc = (t1 * t1 * t1 - t0 * t0 * t0) / 3.0;
    for (double& v : out.data) v += inc;
    return out;
}

Tensor QuadraticTimeField::total_derivative(const Tensor& state, double t) const {
    Tensor out = Tensor::zeros(state.shape);
    for (double& v : out.data) v = 2.0 * t;
    return out;
}

Tensor RotationField::evaluate(const Tensor& state, double, std::optional<ConditionId>) const {
    check_state(state);
    return Tensor::vec({-omega_ * state[1], omega_ * state[0]});
}

Tensor RotationField::exact_solution(const Tensor& z, double t0, double t1) const {
    double th = omega_ * (t1 - t0);
    double c = std::cos(th), s = std::sin(th);
    return Tensor::vec({c * z[0] - s * z[1], s * z[0] + c * z[1]});
}

Tensor RotationField::total_derivative(const Tensor& state, double) const {
    // (dv/dz)*v = omega*J * omega*J*z = -omega^2 * z
    return scale(state, -omega_ * omega_);
}

GaussianPairField::GaussianPairField(Tensor mu0, Tensor sigma0, Tensor mu1)
    : mu0_(std::move(mu0)), sigma0_(std::move(sigma0)), mu1_(std::move(mu1)) {
    if (mu0_.size() != sigma0_.size() || mu0_.size() != mu1_.size())
        throw std::invalid_argument("gaussian-pair: parameter size mismatch");
    for (double s : sigma0_.data)
        if (!(s > 0.0)) throw std::invalid_argument("gaussian-pair: sigma0 must be positive");
}

double GaussianPairField::mean_at(std::size_t i, double t) const {
    return t * mu1_[i] + (1.0 - t) * mu0_[i];
}

double GaussianPairField::std_at(std::size_t i, double t) const {
    double s0 = sigma0_[i];
    return std::sqrt(t * t + (1.0 - t) * (1.0 - t) * s0 * s0);
}

double GaussianPairField::log_std_rate(std::size_t i, double t) const {
    double s0 = sigma0_[i];
    double s2 = t * t + (1.0 - t) * (1.0 - t) * s0 * s0;
    return (t - (1.0 - t) * s0 * s0) / s2;
}

Tensor GaussianPairField::evaluate(const Tensor& state, double t,
                                   std::optional<ConditionId>) const {
    check_state(state);
    Tensor out = Tensor::zeros(state.shape);
    for (std::size_t i = 0; i < state.size(); ++i)
        out[i] = (mu1_[i] - mu0_[i]) + log_std_rate(i, t) * (state[i] - mean_at(i, t));
    return out;
}

Tensor GaussianPairField::exact_solution(const Tensor& z, double t0, double t1) const {
    Tensor out = Tensor::zeros(z.shape);
    for (std::size_t i = 0; i < z.size(); ++i)
        out[i] = mean_at(i, t1) + (std_at(i, t1) / std_at(i, t0)) * (z[i] - mean_at(i, t0));
    return out;
}

Tensor GaussianPairField::total_derivative(const Tensor& state, double t) const {
    // With r = s'/s the trajectory derivative of v is (r' + r^2)(z - m) = (s''/s)(z - m).
    Tensor out = Tensor::zeros(state.shape);
    for (std::size_t i = 0; i < state.size(); ++i) {
        double s0 = sigma0_[i];
        double s = std_at(i, t);
        double sp = (t - (1.0 - t) * s0 * s0) / s;
        double spp = ((1.0 + s0 * s0) - sp * sp) / s;
        out[i] = (spp / s) * (state[i] - mean_at(i, t));
    }
    return out;
}

}  // namespace rfsolve

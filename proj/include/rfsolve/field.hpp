// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "rfsolve/tensor.hpp"

namespace rfsolve {

/// Opaque conditioning context. A stand-in for a prompt: the numerics only
/// need to distinguish source from target conditioning.
struct ConditionId {
    std::uint32_t id = 0;
    friend bool operator==(ConditionId a, ConditionId b) { return a.id == b.id; }
};

/// Velocity field v(z, t, condition) driving the ODE dz/dt = v(z, t).
/// Evaluation must be deterministic and shape-preserving. Time runs on
/// [0, 1]; derivative probes may step slightly past 1, so implementations
/// accept a small overshoot.
class VelocityField {
public:
    virtual ~VelocityField() = default;
    virtual std::size_t dim() const = 0;
    virtual Tensor evaluate(const Tensor& state, double t,
                            std::optional<ConditionId> condition = {}) const = 0;

protected:
    void check_state(const Tensor& state) const {
        if (state.size() != dim())
            throw std::invalid_argument("field: state size does not match field dim");
    }
};

/// A field with a closed-form ODE solution, usable as a convergence oracle.
/// `total_derivative` returns dv/dt along the trajectory,
/// i.e. dv/dt + (dv/dz)*v, where known analytically.
class AnalyticField : public VelocityField {
public:
    virtual Tensor exact_solution(const Tensor& z_start, double t_start,
                                  double t_end) const = 0;
    virtual Tensor total_derivative(const Tensor& state, double t) const = 0;
    virtual std::string name() const = 0;
};

/// v = c.
class ConstantField final : public AnalyticField {
public:
    explicit ConstantField(Tensor c) : c_(std::move(c)) {}
    std::size_t dim() const override { return c_.size(); }
    Tensor evaluate(const Tensor& state, double t,
                    std::optional<ConditionId> condition = {}) const override;
    Tensor exact_solution(const Tensor& z, double t0, double t1) const override;
    Tensor total_derivative(const Tensor& state, double t) const override;
    std::string name() const override { return "constant"; }

private:
    Tensor c_;
};

/// v = a*z, solution z*exp(a*(t1-t0)).
class LinearStateField final : public AnalyticField {
public:
    LinearStateField(double a, std::size_t dim) : a_(a), dim_(dim) {}
    std::size_t dim() const override { return dim_; }
    Tensor evaluate(const Tensor& state, double t,
                    std::optional<ConditionId> condition = {}) const override;
    Tensor exact_solution(const Tensor& z, double t0, double t1) const override;
    Tensor total_derivative(const Tensor& state, double t) const override;
    std::string name() const override { return "linear-state"; }

private:
    double a_;
    std::size_t dim_;
};

/// v = t (per component, state-independent). Order-2 solvers are exact here.
class LinearTimeField final : public AnalyticField {
public:
    explicit LinearTimeField(std::size_t dim) : dim_(dim) {}
    std::size_t dim() const override { return dim_; }
    Tensor evaluate(const Tensor& state, double t,
                    std::optional<ConditionId> condition = {}) const override;
    Tensor exact_solution(const Tensor& z, double t0, double t1) const override;
    Tensor total_derivative(const Tensor& state, double t) const override;
    std::string name() const override { return "linear-time"; }

private:
    std::size_t dim_;
};

/// v = t^2 per component. Oracle-only: separates order 3 from order 2.
class QuadraticTimeField final : public AnalyticField {
public:
    explicit QuadraticTimeField(std::size_t dim) : dim_(dim) {}
    std::size_t dim() const override { return dim_; }
    Tensor evaluate(const Tensor& state, double t,
                    std::optional<ConditionId> condition = {}) const override;
    Tensor exact_solution(const Tensor& z, double t0, double t1) const override;
    Tensor total_derivative(const Tensor& state, double t) const override;
    std::string name() const override { return "quadratic-time"; }

private:
    std::size_t dim_;
};

/// 2-D rigid rotation, v = omega * (-z1, z0). Norm-preserving.
class RotationField final : public AnalyticField {
public:
    explicit RotationField(double omega) : omega_(omega) {}
    std::size_t dim() const override { return 2; }
    Tensor evaluate(const Tensor& state, double t,
                    std::optional<ConditionId> condition = {}) const override;
    Tensor exact_solution(const Tensor& z, double t0, double t1) const override;
    Tensor total_derivative(const Tensor& state, double t) const override;
    std::string name() const override { return "rotation"; }

private:
    double omega_;
};

/// Marginal velocity of the straight-path interpolation between
/// N(mu0, diag(sigma0^2)) at t=0 and N(mu1, I) at t=1. Per dimension:
///   m(t) = t*mu1 + (1-t)*mu0,  s(t)^2 = t^2 + (1-t)^2*sigma0^2,
///   v(z,t) = m'(t) + (s'(t)/s(t)) * (z - m(t)),
/// with the exact affine flow z -> m(t1) + (s(t1)/s(t0)) * (z - m(t0)).
class GaussianPairField final : public AnalyticField {
public:
    GaussianPairField(Tensor mu0, Tensor sigma0, Tensor mu1);
    std::size_t dim() const override { return mu0_.size(); }
    Tensor evaluate(const Tensor& state, double t,
                    std::optional<ConditionId> condition = {}) const override;
    Tensor exact_solution(const Tensor& z, double t0, double t1) const override;
    Tensor total_derivative(const Tensor& state, double t) const override;
    std::string name() const override { return "gaussian-pair"; }

private:
    double mean_at(std::size_t i, double t) const;
    double std_at(std::size_t i, double t) const;
    double log_std_rate(std::size_t i, double t) const;  // s'(t)/s(t)
    Tensor mu0_, sigma0_, mu1_;
};

}  // namespace rfsolve

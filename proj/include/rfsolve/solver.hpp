// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "rfsolve/field.hpp"
#include "rfsolve/tensor.hpp"

namespace rfsolve {

/// Discrete schedule t_N..t_0, strictly decreasing from 1 to 0.
struct TimeGrid {
    std::vector<double> times;

    static TimeGrid uniform(int intervals);
    int intervals() const { return static_cast<int>(times.size()) - 1; }
    void validate() const;
};

enum class Direction { Denoise, Invert };

struct SolverConfig {
    int order = 2;
    double delta_t = 0.01;  // derivative probe step
    Direction direction = Direction::Denoise;
};

/// Which network evaluation a step is making. The main evaluation produces
/// v at the current state; probes feed the finite-difference derivative
/// estimates. Editing hooks key feature caches off this tag.
enum class Pass { Main, Probe, Probe2 };

/// Evaluation callback: (state, t, pass, step index) -> velocity. The plain
/// solver path wraps VelocityField::evaluate; the editing path swaps in a
/// hook that captures or overrides attention value features per pass.
using EvalFn = std::function<Tensor(const Tensor&, double, Pass, int)>;

EvalFn plain_eval(const VelocityField& field, std::optional<ConditionId> condition);

struct StepReport {
    double t_from = 0.0;
    double t_to = 0.0;
    Tensor state_out;
    Tensor velocity;
    std::vector<Tensor> derivative_estimates;  // length order-1
    int nfe = 0;
};

StepReport euler_step(const EvalFn& eval, const Tensor& state, double t_from,
                      double t_to, int step_index = 0);

/// v_hat = v(z, t); probe z + dt*v_hat at t + dt; v_deriv is the forward
/// difference, estimating the total time derivative along the trajectory.
struct DerivativeEstimate {
    Tensor v_hat;
    Tensor v_deriv;
    Tensor probe_state;
};
DerivativeEstimate estimate_derivative(const EvalFn& eval, const Tensor& state,
                                       double t, double delta_t, int step_index = 0);

/// z + h*v + (1/2)h^2*v'
StepReport rf_solver2_step(const EvalFn& eval, const Tensor& state, double t_from,
                           double t_to, double delta_t, int step_index = 0);

/// Adds (1/6)h^3*v''; v'' from a second forward-Euler probe and a
/// three-point difference. Three evaluations per step.
StepReport rf_solver3_step(const EvalFn& eval, const Tensor& state, double t_from,
                           double t_to, double delta_t, int step_index = 0);

StepReport solver_step(const EvalFn& eval, const Tensor& state, double t_from,
                       double t_to, const SolverConfig& config, int step_index = 0);

// Convenience overloads on a field + condition.
StepReport euler_step(const VelocityField& field, const Tensor& state, double t_from,
                      double t_to, std::optional<ConditionId> condition = {});
DerivativeEstimate estimate_derivative(const VelocityField& field, const Tensor& state,
                                       double t, double delta_t,
                                       std::optional<ConditionId> condition = {});
StepReport rf_solver2_step(const VelocityField& field, const Tensor& state, double t_from,
                           double t_to, double delta_t,
                           std::optional<ConditionId> condition = {});
StepReport rf_solver3_step(const VelocityField& field, const Tensor& state, double t_from,
                           double t_to, double delta_t,
                           std::optional<ConditionId> condition = {});

/// Per-timestep latents and velocities captured during a run.
/// states[0] is the starting state in trajectory order, so a Denoise record
/// runs t_N..t_0 and an Invert record runs t_0..t_N.
struct TrajectoryRecord {
    TimeGrid grid;
    Direction direction = Direction::Denoise;
    std::vector<Tensor> states;
    std::vector<Tensor> velocities;
    std::vector<double> step_times;  // time at each recorded state
    int total_nfe = 0;

    /// State at schedule time times[i] (grid order t_N..t_0) regardless of
    /// trajectory direction.
    const Tensor& state_at_grid_index(int i) const;
};

struct TrajectoryResult {
    Tensor final_state;
    TrajectoryRecord record;
};

TrajectoryResult run_trajectory(const EvalFn& eval, const Tensor& z_init,
                                const TimeGrid& grid, const SolverConfig& config,
                                bool record = true);
TrajectoryResult run_trajectory(const VelocityField& field, const Tensor& z_init,
                                const TimeGrid& grid, const SolverConfig& config,
                                std::optional<ConditionId> condition = {},
                                bool record = true);

}  // namespace rfsolve

// SPDX-License-Identifier: Apache-2.0

#include "rfsolve/solver.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rfsolve {

TimeGrid TimeGrid::uniform(int intervals) {
    if (intervals < 1) throw std::invalid_argument("time grid: need at least 1 interval");
    TimeGrid g;
    g.times.resize(intervals + 1);
    for (int i = 0; i <= intervals; ++i)
        g.times[i] = static_cast<double>(intervals - i) / intervals;
    g.times.front() = 1.0;
    g.times.back() = 0.0;
    return g;
}

void TimeGrid::validate() const {
    if (times.size() < 2) throw std::invalid_argument("time grid: need at least 1 interval");
    if (times.front() != 1.0 || times.back() != 0.0)
        throw std::invalid_argument("time grid: endpoints must be 1.0 and 0.0");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] < times[i - 1]))
            throw std::invalid_argument("time grid: not strictly decreasing");
}

EvalFn plain_eval(const VelocityField& field, std::optional<ConditionId> condition) {
    return [&field, condition](const Tensor& state, double t, Pass, int) {
        Tensor v = field.evaluate(state, t, condition);
        if (!v.all_finite()) throw std::runtime_error("field divergence: non-finite velocity");
        return v;
    };
}

StepReport euler_step(const EvalFn& eval, const Tensor& state, double t_from,
                      double t_to, int step_index) {
    if (t_to == t_from) throw std::invalid_argument("euler_step: zero-length step");
    StepReport r;
    r.t_from = t_from;
    r.t_to = t_to;
    r.velocity = eval(state, t_from, Pass::Main, step_index);
    r.state_out = add_scaled(state, t_to - t_from, r.velocity);
    r.nfe = 1;
    return r;
}

DerivativeEstimate estimate_derivative(const EvalFn& eval, const Tensor& state,
                                       double t, double delta_t, int step_index) {
    if (!(delta_t > 0.0)) throw std::invalid_argument("estimate_derivative: delta_t must be positive");
    DerivativeEstimate d;
    d.v_hat = eval(state, t, Pass::Main, step_index);
    d.probe_state = add_scaled(state, delta_t, d.v_hat);
    Tensor v_probe = eval(d.probe_state, t + delta_t, Pass::Probe, step_index);
    d.v_deriv = scale(sub(v_probe, d.v_hat), 1.0 / delta_t);
    return d;
}

StepReport rf_solver2_step(const EvalFn& eval, const Tensor& state, double t_from,
                           double t_to, double delta_t, int step_index) {
    if (t_to == t_from) throw std::invalid_argument("rf_solver2_step: zero-length step");
    DerivativeEstimate d = estimate_derivative(eval, state, t_from, delta_t, step_index);
    double h = t_to - t_from;
    StepReport r;
    r.t_from = t_from;
    r.t_to = t_to;
    r.velocity = d.v_hat;
    r.state_out = add_scaled(add_scaled(state, h, d.v_hat), 0.5 * h * h, d.v_deriv);
    r.derivative_estimates = {d.v_deriv};
    r.nfe = 2;
    return r;
}

StepReport rf_solver3_step(const EvalFn& eval, const Tensor& state, double t_from,
                           double t_to, double delta_t, int step_index) {
    if (t_to == t_from) throw std::invalid_argument("rf_solver3_step: zero-length step");
    if (!(delta_t > 0.0)) throw std::invalid_argument("rf_solver3_step: delta_t must be positive");
    Tensor v0 = eval(state, t_from, Pass::Main, step_index);
    Tensor z1 = add_scaled(state, delta_t, v0);
    Tensor v1 = eval(z1, t_from + delta_t, Pass::Probe, step_index);
    Tensor z2 = add_scaled(z1, delta_t, v1);
    Tensor v2 = eval(z2, t_from + 2.0 * delta_t, Pass::Probe2, step_index);

    Tensor v_deriv = scale(sub(v1, v0), 1.0 / delta_t);
    // Three-point second difference along the forward-Euler continuation.
    Tensor v_second = v2;
    for (std::size_t i = 0; i < v_second.size(); ++i)
        v_second.data[i] = (v2.data[i] - 2.0 * v1.data[i] + v0.data[i]) / (delta_t * delta_t);

    double h = t_to - t_from;
    StepReport r;
    r.t_from = t_from;
    r.t_to = t_to;
    r.velocity = v0;
    r.state_out = add_scaled(
        add_scaled(add_scaled(state, h, v0), 0.5 * h * h, v_deriv),
        h * h * h / 6.0, v_second);
    r.derivative_estimates = {std::move(v_deriv), std::move(v_second)};
    r.nfe = 3;
    return r;
}

StepReport solver_step(const EvalFn& eval, const Tensor& state, double t_from,
                       double t_to, const SolverConfig& config, int step_index) {
    switch (config.order) {
        case 1: return euler_step(eval, state, t_from, t_to, step_index);
        case 2: return rf_solver2_step(eval, state, t_from, t_to, config.delta_t, step_index);
        case 3: return rf_solver3_step(eval, state, t_from, t_to, config.delta_t, step_index);
        default: throw std::invalid_argument("solver: order must be 1, 2, or 3");
    }
}

StepReport euler_step(const VelocityField& field, const Tensor& state, double t_from,
                      double t_to, std::optional<ConditionId> condition) {
    return euler_step(plain_eval(field, condition), state, t_from, t_to);
}

DerivativeEstimate estimate_derivative(const VelocityField& field, const Tensor& state,
                                       double t, double delta_t,
                                       std::optional<ConditionId> condition) {
    return estimate_derivative(plain_eval(field, condition), state, t, delta_t);
}

StepReport rf_solver2_step(const VelocityField& field, const Tensor& state, double t_from,
                           double t_to, double delta_t, std::optional<ConditionId> condition) {
    return rf_solver2_step(plain_eval(field, condition), state, t_from, t_to, delta_t);
}

StepReport rf_solver3_step(const VelocityField& field, const Tensor& state, double t_from,
                           double t_to, double delta_t, std::optional<ConditionId> condition) {
    return rf_solver3_step(plain_eval(field, condition), state, t_from, t_to, delta_t);
}

const Tensor& TrajectoryRecord::state_at_grid_index(int i) const {
    int n = grid.intervals();
    if (i < 0 || i > n) throw std::out_of_range("trajectory record: grid index");
    return direction == Direction::Denoise ? states[i] : states[n - i];
}

TrajectoryResult run_trajectory(const EvalFn& eval, const Tensor& z_init,
                                const TimeGrid& grid, const SolverConfig& config,
                                bool record) {
    grid.validate();
    int n = grid.intervals();
    TrajectoryRecord rec;
    rec.grid = grid;
    rec.direction = config.direction;

    Tensor state = z_init;
    if (record) {
        rec.states.reserve(n + 1);
        rec.velocities.reserve(n);
        rec.step_times.reserve(n + 1);
        rec.states.push_back(state);
        rec.step_times.push_back(config.direction == Direction::Denoise ? grid.times.front()
                                                                        : grid.times.back());
    }
    for (int j = 0; j < n; ++j) {
        double t_from, t_to;
        if (config.direction == Direction::Denoise) {
            t_from = grid.times[j];
            t_to = grid.times[j + 1];
        } else {
            t_from = grid.times[n - j];
            t_to = grid.times[n - j - 1];
        }
        StepReport step = solver_step(eval, state, t_from, t_to, config, j);
        state = std::move(step.state_out);
        if (!state.all_finite())
            throw std::runtime_error("trajectory: non-finite state at step " + std::to_string(j));
        rec.total_nfe += step.nfe;
        if (record) {
            rec.velocities.push_back(std::move(step.velocity));
            rec.states.push_back(state);
            rec.step_times.push_back(t_to);
        }
    }
    return TrajectoryResult{std::move(state), std::move(rec)};
}

TrajectoryResult run_trajectory(const VelocityField& field, const Tensor& z_init,
                                const TimeGrid& grid, const SolverConfig& config,
                                std::optional<ConditionId> condition, bool record) {
    return run_trajectory(plain_eval(field, condition), z_init, grid, config, record);
}

}  // namespace rfsolve

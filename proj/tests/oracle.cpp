// SPDX-License-Identifier: Apache-2.0

#include "oracle.hpp"

#include <cmath>
#include <stdexcept>

namespace rfsolve::oracle {

namespace {

Tensor rk4_run(const VelocityField& field, const Tensor& z0, double t0, double t1, int steps,
               std::optional<ConditionId> condition) {
    double h = (t1 - t0) / steps;
    Tensor z = z0;
    for (int i = 0; i < steps; ++i) {
        double t = t0 + i * h;
        Tensor k1 = field.evaluate(z, t, condition);
        Tensor k2 = field.evaluate(add_scaled(z, 0.5 * h, k1), t + 0.5 * h, condition);
        Tensor k3 = field.evaluate(add_scaled(z, 0.5 * h, k2), t + 0.5 * h, condition);
        Tensor k4 = field.evaluate(add_scaled(z, h, k3), t + h, condition);
        for (std::size_t j = 0; j < z.size(); ++j)
            z.data[j] += h / 6.0 *
                         (k1.data[j] + 2.0 * k2.data[j] + 2.0 * k3.data[j] + k4.data[j]);
        if (!z.all_finite()) throw std::runtime_error("rk4_reference: divergence");
    }
    return z;
}

}  // namespace

ReferenceSolution rk4_reference(const VelocityField& field, const Tensor& z0, double t0,
                                double t1, int steps, std::optional<ConditionId> condition) {
    if (steps < 10000) throw std::invalid_argument("rk4_reference: need >= 1e4 steps");
    ReferenceSolution sol;
    sol.value = rk4_run(field, z0, t0, t1, steps, condition);
    Tensor finer = rk4_run(field, z0, t0, t1, 2 * steps, condition);
    sol.error_bound = l2_norm(sub(sol.value, finer));
    return sol;
}

double simpson(const std::function<double(double)>& f, double a, double b, int panels) {
    if (panels % 2 != 0) ++panels;
    double h = (b - a) / panels;
    double acc = f(a) + f(b);
    for (int i = 1; i < panels; ++i) acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& loss,
                                std::vector<double> params, double epsilon) {
    if (epsilon < 1e-7 || epsilon > 1e-3)
        throw std::invalid_argument("fd_gradient: epsilon out of [1e-7, 1e-3]");
    std::vector<double> grad(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        double saved = params[i];
        params[i] = saved + epsilon;
        double up = loss(params);
        params[i] = saved - epsilon;
        double down = loss(params);
        params[i] = saved;
        grad[i] = (up - down) / (2.0 * epsilon);
    }
    return grad;
}

std::vector<double> flatten_params(const MlpField& field) {
    std::vector<double> flat;
    for (const auto& l : field.layers()) {
        flat.insert(flat.end(), l.weight.begin(), l.weight.end());
        flat.insert(flat.end(), l.bias.begin(), l.bias.end());
    }
    return flat;
}

void unflatten_params(MlpField& field, const std::vector<double>& flat) {
    std::size_t pos = 0;
    for (auto& l : field.layers()) {
        std::copy(flat.begin() + pos, flat.begin() + pos + l.weight.size(), l.weight.begin());
        pos += l.weight.size();
        std::copy(flat.begin() + pos, flat.begin() + pos + l.bias.size(), l.bias.begin());
        pos += l.bias.size();
    }
    if (pos != flat.size()) throw std::invalid_argument("unflatten_params: size mismatch");
}

std::vector<double> flatten_grads(const MlpGradients& grads) {
    std::vector<double> flat;
    for (const auto& l : grads.layers) {
        flat.insert(flat.end(), l.weight.begin(), l.weight.end());
        flat.insert(flat.end(), l.bias.begin(), l.bias.end());
    }
    return flat;
}

}  // namespace rfsolve::oracle

// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "rfsolve/attention.hpp"
#include "rfsolve/field.hpp"
#include "rfsolve/solver.hpp"
#include "rfsolve/tensor.hpp"

namespace rfsolve {

/// Per-timestep MSE between inversion and reconstruction latents paired at
/// equal t, one curve per solver order.
struct ErrorCurve {
    std::vector<int> grid_indices;  // indices into the coarse grid (t_N..t_0)
    std::vector<double> t_values;
    std::vector<double> mse_values;
    int order = 0;
    int intervals = 0;  // N actually run for this order
    std::string field_name;
};

/// Invert z0 over N steps recording latents, denoise the result recording
/// latents, and report MSE at each shared timestep. When `nfe_fair` is set,
/// order 1 runs 2N steps and curves are compared at the coarse grid's
/// timesteps only.
std::vector<ErrorCurve> fig2_study(const VelocityField& field, const Tensor& z0, int intervals,
                                   const std::vector<int>& orders,
                                   std::optional<ConditionId> condition = {},
                                   bool nfe_fair = true, double delta_t = 0.01,
                                   const std::string& field_name = "field");

struct ConvergenceReport {
    std::vector<int> step_counts;
    std::vector<double> terminal_errors;  // L2 vs exact solution
    double slope = 0.0;                   // log error vs log h
    bool exact = false;                   // all errors below 1e-12
    std::string field_name;
    int order = 0;
    Direction direction = Direction::Denoise;
};

ConvergenceReport convergence_study(const AnalyticField& field, const Tensor& z0,
                                    Direction direction, int order,
                                    const std::vector<int>& step_counts,
                                    double delta_t = 0.01);

struct AblationRow {
    int order = 0;
    int intervals = 0;
    int nfe = 0;
    double terminal_mse = 0.0;  // MSE(z0, invert->denoise roundtrip)
};

/// Fixed-NFE order comparison: order k runs total_nfe/k steps.
std::vector<AblationRow> nfe_ablation(const VelocityField& field, const Tensor& z0,
                                      int total_nfe, const std::vector<int>& orders,
                                      std::optional<ConditionId> condition = {},
                                      double delta_t = 0.01);

struct EditStudyRow {
    int n_share = 0;
    double mse_to_reconstruction = 0.0;  // vs unshared same-condition reconstruction
    double mse_to_free_edit = 0.0;       // vs n_share=0 target-condition output
};

std::vector<EditStudyRow> edit_study(const AttentionField& field, const Tensor& z0,
                                     const TimeGrid& grid, const SolverConfig& config,
                                     ConditionId source, ConditionId target,
                                     const std::vector<int>& n_share_values, int m_share);

// CSV emission, schema: `# key=value` metadata lines then label,v0,v1,... rows.
void write_error_curves_csv(const std::vector<ErrorCurve>& curves, const std::string& path,
                            std::uint64_t seed);
void write_convergence_csv(const ConvergenceReport& report, const std::string& path,
                           std::uint64_t seed);
void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path,
                        const std::string& field_name, int total_nfe, std::uint64_t seed);
void write_edit_study_csv(const std::vector<EditStudyRow>& rows, const std::string& path,
                          int m_share, std::uint64_t seed);

/// Least-squares slope of log(err) against log(h), h = 1/N.
double fit_loglog_slope(const std::vector<int>& step_counts,
                        const std::vector<double>& errors);

}  // namespace rfsolve

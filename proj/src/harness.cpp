// SPDX-License-Identifier: Apache-2.0

#include "rfsolve/harness.hpp"

#include <cmath>
#include <stdexcept>

namespace rfsolve {

std::vector<ErrorCurve> fig2_study(const VelocityField& field, const Tensor& z0, int intervals,
                                   const std::vector<int>& orders,
                                   std::optional<ConditionId> condition, bool nfe_fair,
                                   double delta_t, const std::string& field_name) {
    if (intervals < 1) throw std::invalid_argument("fig2_study: need at least 1 interval");
    std::vector<ErrorCurve> curves;
    for (int order : orders) {
        int n = (nfe_fair && order == 1) ? 2 * intervals : intervals;
        int stride = n / intervals;  // fine-to-coarse subsampling factor
        TimeGrid grid = TimeGrid::uniform(n);

        SolverConfig invert_cfg{order, delta_t, Direction::Invert};
        TrajectoryResult inv = run_trajectory(field, z0, grid, invert_cfg, condition);
        SolverConfig denoise_cfg{order, delta_t, Direction::Denoise};
        TrajectoryResult den = run_trajectory(field, inv.final_state, grid, denoise_cfg, condition);

        ErrorCurve curve;
        curve.order = order;
        curve.intervals = n;
        curve.field_name = field_name;
        for (int i = 0; i <= intervals; ++i) {
            int fine = i * stride;  // same t on the fine grid (uniform grids nest)
            curve.grid_indices.push_back(i);
            curve.t_values.push_back(grid.times[fine]);
            curve.mse_values.push_back(mse(inv.record.state_at_grid_index(fine),
                                           den.record.state_at_grid_index(fine)));
        }
        curves.push_back(std::move(curve));
    }
    return curves;
}

double fit_loglog_slope(const std::vector<int>& step_counts,
                        const std::vector<double>& errors) {
    if (step_counts.size() != errors.size() || step_counts.size() < 2)
        throw std::invalid_argument("slope fit: need matching lists of >= 2 points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = step_counts.size();
    for (std::size_t i = 0; i < n; ++i) {
        double x = std::log(1.0 / step_counts[i]);
        double y = std::log(errors[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

ConvergenceReport convergence_study(const AnalyticField& field, const Tensor& z0,
                                    Direction direction, int order,
                                    const std::vector<int>& step_counts, double delta_t) {
    if (step_counts.size() < 4)
        throw std::invalid_argument("convergence_study: need >= 4 grid resolutions");
    ConvergenceReport report;
    report.step_counts = step_counts;
    report.field_name = field.name();
    report.order = order;
    report.direction = direction;

    double t_start = direction == Direction::Denoise ? 1.0 : 0.0;
    double t_end = direction == Direction::Denoise ? 0.0 : 1.0;
    Tensor exact = field.exact_solution(z0, t_start, t_end);

    for (int n : step_counts) {
        TimeGrid grid = TimeGrid::uniform(n);
        SolverConfig cfg{order, delta_t, direction};
        TrajectoryResult run = run_trajectory(field, z0, grid, cfg, {}, /*record=*/false);
        report.terminal_errors.push_back(l2_norm(sub(run.final_state, exact)));
    }

    report.exact = true;
    for (double e : report.terminal_errors)
        if (e >= 1e-12) report.exact = false;
    if (!report.exact) report.slope = fit_loglog_slope(step_counts, report.terminal_errors);
    return report;
}

std::vector<AblationRow> nfe_ablation(const VelocityField& field, const Tensor& z0,
                                      int total_nfe, const std::vector<int>& orders,
                                      std::optional<ConditionId> condition, double delta_t) {
    if (total_nfe < 3) throw std::invalid_argument("nfe_ablation: total_nfe must be >= 3");
    std::vector<AblationRow> rows;
    for (int order : orders) {
        AblationRow row;
        row.order = order;
        row.intervals = total_nfe / order;
        row.nfe = row.intervals * order;
        TimeGrid grid = TimeGrid::uniform(row.intervals);
        SolverConfig invert_cfg{order, delta_t, Direction::Invert};
        Tensor noise = run_trajectory(field, z0, grid, invert_cfg, condition, false).final_state;
        SolverConfig denoise_cfg{order, delta_t, Direction::Denoise};
        Tensor back = run_trajectory(field, noise, grid, denoise_cfg, condition, false).final_state;
        row.terminal_mse = mse(z0, back);
        rows.push_back(row);
    }
    return rows;
}

std::vector<EditStudyRow> edit_study(const AttentionField& field, const Tensor& z0,
                                     const TimeGrid& grid, const SolverConfig& config,
                                     ConditionId source, ConditionId target,
                                     const std::vector<int>& n_share_values, int m_share) {
    // Capture once with full sharing; smaller n_share sweeps read a prefix
    // of the same cache.
    ShareConfig full{grid.intervals(), m_share};
    EditResult session = invert_with_capture(field, z0, grid, config, source, full);

    ShareConfig none{0, m_share};
    Tensor free_edit = denoise_with_share(field, session.noise, grid, config, target, none,
                                          session.cache);

    std::vector<EditStudyRow> rows;
    for (int n_share : n_share_values) {
        ShareConfig share{n_share, m_share};
        Tensor edited = denoise_with_share(field, session.noise, grid, config, target, share,
                                           session.cache);
        EditStudyRow row;
        row.n_share = n_share;
        row.mse_to_reconstruction = mse(edited, session.reconstruction);
        row.mse_to_free_edit = mse(edited, free_edit);
        rows.push_back(row);
    }
    return rows;
}

void write_error_curves_csv(const std::vector<ErrorCurve>& curves, const std::string& path,
                            std::uint64_t seed) {
    std::vector<std::pair<std::string, std::string>> meta;
    meta.emplace_back("study", "fig2");
    meta.emplace_back("seed", std::to_string(seed));
    if (!curves.empty()) meta.emplace_back("field", curves.front().field_name);
    std::vector<CsvRow> rows;
    if (!curves.empty()) {
        rows.emplace_back("t", curves.front().t_values);
        for (const auto& c : curves) {
            std::string label = "mse_order" + std::to_string(c.order) + "_N" +
                                std::to_string(c.intervals);
            rows.emplace_back(label, c.mse_values);
        }
    }
    write_csv(meta, rows, path);
}

void write_convergence_csv(const ConvergenceReport& report, const std::string& path,
                           std::uint64_t seed) {
    std::vector<std::pair<std::string, std::string>> meta;
    meta.emplace_back("study", "converge");
    meta.emplace_back("field", report.field_name);
    meta.emplace_back("order", std::to_string(report.order));
    meta.emplace_back("seed", std::to_string(seed));
    meta.emplace_back("slope", report.exact ? "exact" : format_double(report.slope));
    std::vector<double> counts(report.step_counts.begin(), report.step_counts.end());
    write_csv(meta, {{"steps", counts}, {"error", report.terminal_errors}}, path);
}

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path,
                        const std::string& field_name, int total_nfe, std::uint64_t seed) {
    std::vector<std::pair<std::string, std::string>> meta;
    meta.emplace_back("study", "nfe-ablation");
    meta.emplace_back("field", field_name);
    meta.emplace_back("total_nfe", std::to_string(total_nfe));
    meta.emplace_back("seed", std::to_string(seed));
    std::vector<double> order, intervals, nfe, err;
    for (const auto& r : rows) {
        order.push_back(r.order);
        intervals.push_back(r.intervals);
        nfe.push_back(r.nfe);
        err.push_back(r.terminal_mse);
    }
    write_csv(meta, {{"order", order}, {"steps", intervals}, {"nfe", nfe}, {"mse", err}}, path);
}

void write_edit_study_csv(const std::vector<EditStudyRow>& rows, const std::string& path,
                          int m_share, std::uint64_t seed) {
    std::vector<std::pair<std::string, std::string>> meta;
    meta.emplace_back("study", "edit-study");
    meta.emplace_back("m_share", std::to_string(m_share));
    meta.emplace_back("seed", std::to_string(seed));
    std::vector<double> n_share, to_recon, to_free;
    for (const auto& r : rows) {
        n_share.push_back(r.n_share);
        to_recon.push_back(r.mse_to_reconstruction);
        to_free.push_back(r.mse_to_free_edit);
    }
    write_csv(meta,
              {{"n_share", n_share},
               {"mse_to_reconstruction", to_recon},
               {"mse_to_free_edit", to_free}},
              path);
}

}  // namespace rfsolve

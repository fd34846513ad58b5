#pragma once

#include "cmdp/harness.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace cmdp {

/// %.17g, enough to round-trip any double.
std::string format_double(double x);

/// Column order: k, v_r_true, v_c_true, regret_cum, cv_cum, lambda_mean,
/// model_updates_cum, wall_ms. An `interpolated` column is appended only
/// when some row was interpolated.
std::string run_csv(const RunRecord& record);

/// Inverse of run_csv. Throws std::runtime_error on malformed input.
std::vector<EpisodeRow> parse_run_csv(const std::string& text);

nlohmann::json summary_json(const RunRecord& record, const nlohmann::json& verdicts);

/// Static polyline chart.
std::string line_chart_svg(const std::string& title, const std::string& y_label, const std::vector<double>& xs,
                           const std::vector<double>& ys);

struct ReportFiles {
    std::filesystem::path csv;
    std::filesystem::path summary;
    std::vector<std::filesystem::path> plots;
};

/// Writes run.csv, summary.json and (optionally) regret.svg / cv.svg into
/// `out_dir`, creating it if needed.
ReportFiles emit_report(const RunRecord& record, const std::filesystem::path& out_dir,
                        const nlohmann::json& verdicts = nlohmann::json::object(), bool plots = true);

/// Plots only, from rows read back from a run.csv.
std::vector<std::filesystem::path> emit_plots(const std::vector<EpisodeRow>& rows,
                                              const std::filesystem::path& out_dir);

} // namespace cmdp

#include "cmdp/report.hpp"

#include "cmdp/instance_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace cmdp {

namespace {

constexpr const char* kColumns[] = {"k",      "v_r_true",    "v_c_true",          "regret_cum", "cv_cum",
                                    "lambda_mean", "model_updates_cum", "wall_ms"};

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, sep)) out.push_back(field);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_double(const std::string& text) {
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || *end != '\0') throw std::runtime_error("run.csv: bad number \"" + text + "\"");
    return v;
}

std::int64_t parse_int(const std::string& text) {
    char* end = nullptr;
    const long long v = std::strtoll(text.c_str(), &end, 10);
    if (text.empty() || *end != '\0') throw std::runtime_error("run.csv: bad integer \"" + text + "\"");
    return v;
}

std::string escape_xml(const std::string& text) {
    std::string out;
    for (char c : text) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        default: out += c;
        }
    }
    return out;
}

} // namespace

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string run_csv(const RunRecord& record) {
    const bool flagged = std::any_of(record.rows.begin(), record.rows.end(), [](const auto& r) { return r.interpolated; });
    std::string out;
    for (std::size_t i = 0; i < std::size(kColumns); ++i) {
        if (i) out += ',';
        out += kColumns[i];
    }
    if (flagged) out += ",interpolated";
    out += '\n';
    for (const auto& r : record.rows) {
        out += std::to_string(r.k);
        for (double v : {r.v_r_true, r.v_c_true, r.regret_cum, r.cv_cum, r.lambda_mean}) {
            out += ',';
            out += format_double(v);
        }
        out += ',';
        out += std::to_string(r.model_updates_cum);
        out += ',';
        out += format_double(r.wall_ms);
        if (flagged) out += r.interpolated ? ",1" : ",0";
        out += '\n';
    }
    return out;
}

std::vector<EpisodeRow> parse_run_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("run.csv: empty input");
    const auto header = split(line, ',');
    const std::size_t base = std::size(kColumns);
    if (header.size() < base || !std::equal(kColumns, kColumns + base, header.begin()))
        throw std::runtime_error("run.csv: unexpected header \"" + line + "\"");
    const bool flagged = header.size() == base + 1 && header[base] == "interpolated";
    if (header.size() > base && !flagged) throw std::runtime_error("run.csv: unexpected header \"" + line + "\"");

    std::vector<EpisodeRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != header.size()) throw std::runtime_error("run.csv: wrong field count in \"" + line + "\"");
        EpisodeRow r;
        r.k = parse_int(f[0]);
        r.v_r_true = parse_double(f[1]);
        r.v_c_true = parse_double(f[2]);
        r.regret_cum = parse_double(f[3]);
        r.cv_cum = parse_double(f[4]);
        r.lambda_mean = parse_double(f[5]);
        r.model_updates_cum = parse_int(f[6]);
        r.wall_ms = parse_double(f[7]);
        r.interpolated = flagged && f[8] == "1";
        rows.push_back(r);
    }
    return rows;
}

nlohmann::json summary_json(const RunRecord& record, const nlohmann::json& verdicts) {
    const auto& h = record.header;
    nlohmann::json j;
    j["episodes"] = record.rows.size();
    j["regret_total"] = record.regret_total();
    j["cv_total"] = record.cv_total();
    j["model_updates_total"] = record.rows.empty() ? 0 : record.rows.back().model_updates_cum;
    j["optimal_value"] = h.optimal_value;
    j["budget"] = h.budget;
    j["zeta"] = h.zeta;
    j["seed"] = h.seed;
    j["instance_hash"] = h.instance_hash;
    j["config"] = h.config;
    j["verdicts"] = verdicts;
    return j;
}

std::string line_chart_svg(const std::string& title, const std::string& y_label, const std::vector<double>& xs,
                           const std::vector<double>& ys) {
    constexpr double width = 640, height = 400, left = 70, right = 20, top = 40, bottom = 50;
    double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
    if (!xs.empty()) {
        x_min = *std::min_element(xs.begin(), xs.end());
        x_max = *std::max_element(xs.begin(), xs.end());
        y_min = std::min(0.0, *std::min_element(ys.begin(), ys.end()));
        y_max = std::max(0.0, *std::max_element(ys.begin(), ys.end()));
    }
    if (x_max == x_min) x_max = x_min + 1;
    if (y_max == y_min) y_max = y_min + 1;
    const double plot_w = width - left - right, plot_h = height - top - bottom;
    auto px = [&](double x) { return left + (x - x_min) / (x_max - x_min) * plot_w; };
    auto py = [&](double y) { return top + (y_max - y) / (y_max - y_min) * plot_h; };

    std::ostringstream svg;
    svg.precision(6);
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"16\">"
        << escape_xml(title) << "</text>\n";
    svg << "<g stroke=\"black\" stroke-width=\"1\">\n"
        << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w << "\" y2=\""
        << top + plot_h << "\"/>\n"
        << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
        << "\"/>\n</g>\n";
    svg << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
    for (int i = 0; i <= 4; ++i) {
        const double y = y_min + (y_max - y_min) * i / 4.0;
        svg << "<text x=\"" << left - 6 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\">" << y << "</text>\n";
        const double x = x_min + (x_max - x_min) * i / 4.0;
        svg << "<text x=\"" << px(x) << "\" y=\"" << top + plot_h + 16 << "\" text-anchor=\"middle\">" << x
            << "</text>\n";
    }
    svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 10
        << "\" text-anchor=\"middle\">episode</text>\n";
    svg << "<text x=\"16\" y=\"" << top + plot_h / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << top + plot_h / 2 << ")\">" << escape_xml(y_label) << "</text>\n</g>\n";
    if (!xs.empty()) {
        svg << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
        // thin very long series to keep files small
        const std::size_t stride = std::max<std::size_t>(1, xs.size() / 2000);
        for (std::size_t i = 0; i < xs.size(); i += stride) svg << px(xs[i]) << ',' << py(ys[i]) << ' ';
        svg << px(xs.back()) << ',' << py(ys.back()) << "\"/>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

std::vector<std::filesystem::path> emit_plots(const std::vector<EpisodeRow>& rows,
                                              const std::filesystem::path& out_dir) {
    std::vector<double> ks, regret, cv;
    for (const auto& r : rows) {
        ks.push_back(static_cast<double>(r.k));
        regret.push_back(r.regret_cum);
        cv.push_back(r.cv_cum);
    }
    const auto regret_path = out_dir / "regret.svg";
    const auto cv_path = out_dir / "cv.svg";
    write_text_file(regret_path, line_chart_svg("Cumulative regret", "Regret(k)", ks, regret));
    write_text_file(cv_path, line_chart_svg("Cumulative constraint violation", "CV(k)", ks, cv));
    return {regret_path, cv_path};
}

ReportFiles emit_report(const RunRecord& record, const std::filesystem::path& out_dir,
                        const nlohmann::json& verdicts, bool plots) {
    std::filesystem::create_directories(out_dir);
    ReportFiles files;
    files.csv = out_dir / "run.csv";
    files.summary = out_dir / "summary.json";
    write_text_file(files.csv, run_csv(record));
    write_text_file(files.summary, summary_json(record, verdicts).dump(2) + "\n");
    if (plots) files.plots = emit_plots(record.rows, out_dir);
    return files;
}

} // namespace cmdp

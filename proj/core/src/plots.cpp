#include "masklab/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "io_util.hpp"
#include "masklab/drift.hpp"
#include "masklab/error.hpp"
#include "masklab/masking.hpp"

namespace masklab {

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 400;
constexpr double kLeft = 64.0;
constexpr double kRight = 616.0;
constexpr double kTop = 48.0;
constexpr double kBottom = 352.0;

const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string fmt_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void take(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }

    void pad() {
        if (lo > hi) {
            lo = 0.0;
            hi = 1.0;
            return;
        }
        if (lo == hi) {
            lo -= 0.5;
            hi += 0.5;
            return;
        }
        const double margin = 0.05 * (hi - lo);
        lo -= margin;
        hi += margin;
    }
};

struct Series {
    std::string label;
    std::vector<double> xs;
    std::vector<double> ys;
};

class SvgBuilder {
public:
    explicit SvgBuilder(const std::string& title) {
        out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
             << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
        out_ << "<rect width=\"" << kWidth << "\" height=\"" << kHeight
             << "\" fill=\"#ffffff\"/>\n";
        text(kWidth / 2.0, 24.0, title, 15, "middle", "#202020");
    }

    void text(double x, double y, const std::string& s, int size, const char* anchor,
              const char* fill) {
        out_ << "<text x=\"" << fmt2(x) << "\" y=\"" << fmt2(y)
             << "\" font-family=\"sans-serif\" font-size=\"" << size << "\" text-anchor=\""
             << anchor << "\" fill=\"" << fill << "\">" << s << "</text>\n";
    }

    void line(double x1, double y1, double x2, double y2, const char* stroke, double width) {
        out_ << "<line x1=\"" << fmt2(x1) << "\" y1=\"" << fmt2(y1) << "\" x2=\"" << fmt2(x2)
             << "\" y2=\"" << fmt2(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\""
             << fmt2(width) << "\"/>\n";
    }

    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke) {
        out_ << "<polyline fill=\"none\" stroke=\"" << stroke
             << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (i > 0) {
                out_ << ' ';
            }
            out_ << fmt2(pts[i].first) << ',' << fmt2(pts[i].second);
        }
        out_ << "\"/>\n";
    }

    void circle(double x, double y, double r, const std::string& fill) {
        out_ << "<circle cx=\"" << fmt2(x) << "\" cy=\"" << fmt2(y) << "\" r=\"" << fmt2(r)
             << "\" fill=\"" << fill << "\"/>\n";
    }

    void rect(double x, double y, double w, double h, const std::string& fill) {
        out_ << "<rect x=\"" << fmt2(x) << "\" y=\"" << fmt2(y) << "\" width=\"" << fmt2(w)
             << "\" height=\"" << fmt2(h) << "\" fill=\"" << fill << "\"/>\n";
    }

    std::string finish() {
        out_ << "</svg>\n";
        return out_.str();
    }

private:
    std::ostringstream out_;
};

double scale_x(double v, const Range& r) {
    return kLeft + (v - r.lo) / (r.hi - r.lo) * (kRight - kLeft);
}

double scale_y(double v, const Range& r) {
    return kBottom - (v - r.lo) / (r.hi - r.lo) * (kBottom - kTop);
}

void draw_axes(SvgBuilder& svg, const Range& xr, const Range& yr, const std::string& x_label,
               const std::string& y_label) {
    svg.line(kLeft, kBottom, kRight, kBottom, "#404040", 1.0);
    svg.line(kLeft, kTop, kLeft, kBottom, "#404040", 1.0);
    for (int i = 0; i <= 4; ++i) {
        const double fx = xr.lo + (xr.hi - xr.lo) * i / 4.0;
        const double px = scale_x(fx, xr);
        svg.line(px, kBottom, px, kBottom + 4.0, "#404040", 1.0);
        svg.text(px, kBottom + 18.0, fmt_tick(fx), 11, "middle", "#404040");

        const double fy = yr.lo + (yr.hi - yr.lo) * i / 4.0;
        const double py = scale_y(fy, yr);
        svg.line(kLeft - 4.0, py, kLeft, py, "#404040", 1.0);
        svg.text(kLeft - 8.0, py + 4.0, fmt_tick(fy), 11, "end", "#404040");
    }
    svg.text((kLeft + kRight) / 2.0, kHeight - 8.0, x_label, 12, "middle", "#202020");
    svg.text(14.0, kTop - 10.0, y_label, 12, "start", "#202020");
}

std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Series>& series) {
    Range xr, yr;
    for (const auto& s : series) {
        for (double x : s.xs) {
            xr.take(x);
        }
        for (double y : s.ys) {
            yr.take(y);
        }
    }
    xr.pad();
    yr.pad();

    SvgBuilder svg(title);
    draw_axes(svg, xr, yr, x_label, y_label);
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const std::string color = kPalette[si % 10];
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 0; i < s.xs.size(); ++i) {
            pts.emplace_back(scale_x(s.xs[i], xr), scale_y(s.ys[i], yr));
        }
        svg.polyline(pts, color);
        for (const auto& [px, py] : pts) {
            svg.circle(px, py, 2.0, color);
        }
        const double ly = kTop + 14.0 * static_cast<double>(si);
        svg.rect(kRight - 150.0, ly - 8.0, 10.0, 10.0, color);
        svg.text(kRight - 136.0, ly + 1.0, s.label, 11, "start", "#202020");
    }
    return svg.finish();
}

std::string bar_chart(const std::string& title, const std::string& y_label,
                      const std::vector<std::pair<std::string, double>>& bars) {
    Range yr;
    yr.take(0.0);
    for (const auto& [label, value] : bars) {
        yr.take(value);
    }
    yr.pad();

    SvgBuilder svg(title);
    Range xr;
    xr.lo = 0.0;
    xr.hi = static_cast<double>(bars.size());
    draw_axes(svg, xr, yr, "", y_label);

    const double slot = (kRight - kLeft) / static_cast<double>(bars.size());
    for (std::size_t i = 0; i < bars.size(); ++i) {
        const double x = kLeft + slot * (static_cast<double>(i) + 0.25);
        const double y0 = scale_y(0.0, yr);
        const double y1 = scale_y(bars[i].second, yr);
        svg.rect(x, std::min(y0, y1), slot * 0.5, std::abs(y0 - y1), kPalette[i % 10]);
        svg.text(x + slot * 0.25, kBottom + 18.0, bars[i].first, 10, "middle", "#404040");
        svg.text(x + slot * 0.25, std::min(y0, y1) - 4.0, fmt_tick(bars[i].second), 10, "middle",
                 "#202020");
    }
    return svg.finish();
}

bool file_exists(const std::string& path) {
    return std::filesystem::exists(path);
}

void write_text(const std::string& path, const std::string& text) {
    auto out = detail::open_out(path, "render_plots");
    out << text;
}

std::string join(const std::string& dir, const char* name) {
    return dir + "/" + name;
}

void plot_drift(const std::string& dir, PlotManifest& manifest) {
    const std::string src = join(dir, "drift.csv");
    if (!file_exists(src)) {
        manifest.skipped.push_back({"drift.svg", "drift.csv not found"});
        return;
    }
    DriftCurve curve;
    try {
        curve = read_drift_csv(src);
    } catch (const Error& e) {
        manifest.skipped.push_back({"drift.svg", e.what()});
        return;
    }
    std::vector<Series> series;
    series.push_back({"mean cos to clean centroid", curve.mask_fractions,
                      curve.mean_cos_to_clean_centroid});
    series.push_back({"centroid cos", curve.mask_fractions, curve.centroid_cos});
    series.push_back({"mean feature std", curve.mask_fractions, curve.mean_feature_std});
    write_text(join(dir, "drift.svg"),
               line_chart("Embedding drift under masking", "masked fraction", "value", series));
    manifest.written.emplace_back("drift.svg");
}

void plot_perturbation(const std::string& dir, PlotManifest& manifest) {
    const std::string src = join(dir, "perturbation_curves.csv");
    if (!file_exists(src)) {
        manifest.skipped.push_back({"perturbation.svg", "perturbation_curves.csv not found"});
        return;
    }
    AopcResult result;
    try {
        result = read_perturbation_curves_csv(src);
    } catch (const Error& e) {
        manifest.skipped.push_back({"perturbation.svg", e.what()});
        return;
    }

    // Sort samples by their curve mean and bucket them into deciles.
    std::vector<std::size_t> order(result.curves.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    const auto curve_mean = [&](std::size_t i) {
        const auto& v = result.curves[i].values;
        double sum = 0.0;
        for (std::size_t k = 1; k < v.size(); ++k) {
            sum += v[k];
        }
        return v.size() > 1 ? sum / static_cast<double>(v.size() - 1) : 0.0;
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return curve_mean(a) < curve_mean(b); });

    const std::size_t deciles = std::min<std::size_t>(10, order.size());
    std::vector<Series> series;
    for (std::size_t d = 0; d < deciles; ++d) {
        const std::size_t begin = d * order.size() / deciles;
        const std::size_t end = (d + 1) * order.size() / deciles;
        std::vector<double> sum;
        std::vector<double> count;
        for (std::size_t i = begin; i < end; ++i) {
            const auto& values = result.curves[order[i]].values;
            if (values.size() > sum.size()) {
                sum.resize(values.size(), 0.0);
                count.resize(values.size(), 0.0);
            }
            for (std::size_t k = 0; k < values.size(); ++k) {
                sum[k] += values[k];
                count[k] += 1.0;
            }
        }
        Series s;
        s.label = "decile " + std::to_string(d + 1);
        for (std::size_t k = 0; k < sum.size(); ++k) {
            s.xs.push_back(static_cast<double>(k));
            s.ys.push_back(sum[k] / count[k]);
        }
        series.push_back(std::move(s));
    }
    write_text(join(dir, "perturbation.svg"),
               line_chart("Perturbation curves by decile", "masked tokens k",
                          "probability drop", series));
    manifest.written.emplace_back("perturbation.svg");
}

bool read_fidelity_value(const std::string& path, double& value) {
    if (!file_exists(path)) {
        return false;
    }
    std::ifstream in(path, std::ios::binary);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception&) {
        return false;
    }
    if (!doc.contains("fidelity")) {
        return false;
    }
    value = doc["fidelity"].get<double>();
    return true;
}

void plot_fidelity_bars(const std::string& dir, PlotManifest& manifest) {
    static const std::pair<const char*, const char*> sources[] = {
        {"fidelity.json", "clean"},
        {"random_fidelity.json", "random order"},
        {"fidelity_attacked.json", "attacked"},
        {"fidelity_attacked_clean.json", "attacked (clean)"},
        {"fidelity_clean_post.json", "clean post-advtrain"},
        {"fidelity_attacked_post.json", "attacked post-advtrain"},
    };
    std::vector<std::pair<std::string, double>> bars;
    for (const auto& [file, label] : sources) {
        double value = 0.0;
        if (read_fidelity_value(join(dir, file), value)) {
            bars.emplace_back(label, value);
        }
    }
    if (bars.empty()) {
        manifest.skipped.push_back({"fidelity_bars.svg", "no fidelity reports found"});
        return;
    }
    write_text(join(dir, "fidelity_bars.svg"),
               bar_chart("Fidelity comparison", "fidelity", bars));
    manifest.written.emplace_back("fidelity_bars.svg");
}

}  // namespace

PlotManifest render_plots(const std::string& dir) {
    PlotManifest manifest;
    plot_drift(dir, manifest);
    plot_perturbation(dir, manifest);
    plot_fidelity_bars(dir, manifest);

    nlohmann::ordered_json doc;
    doc["written"] = manifest.written;
    auto& skipped = doc["skipped"] = nlohmann::ordered_json::array();
    for (const auto& skip : manifest.skipped) {
        skipped.push_back({{"plot", skip.plot}, {"reason", skip.reason}});
    }
    auto out = detail::open_out(join(dir, "plots_manifest.json"), "render_plots");
    out << doc.dump(2) << '\n';
    return manifest;
}

}  // namespace masklab

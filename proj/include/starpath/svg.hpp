#pragma once

// Minimal SVG charts: polylines, bars, a horizontal baseline and an optional
// right-hand axis. Each plotted group carries data-* attributes with the range
// it covers so tests can check the axes against the data.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "starpath/error.hpp"
#include "starpath/report.hpp"

namespace starpath {

using Series = std::vector<std::pair<double, double>>;

namespace detail {

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

inline std::string px(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void include(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    bool empty() const { return lo > hi; }

    /// Padded copy that is never degenerate.
    Range padded(double frac = 0.05) const {
        if (empty()) return {0.0, 1.0};
        if (lo == hi) {
            const double w = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
            return {lo - w, hi + w};
        }
        const double w = (hi - lo) * frac;
        return {lo - w, hi + w};
    }
};

}  // namespace detail

class SvgChart {
public:
    SvgChart(std::string title, std::string x_label, std::string y_label)
        : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

    void line(const std::string& name, const Series& s, const std::string& color = "#1f77b4") {
        items_.push_back({Kind::line, name, s, color, false});
        include(s, false);
    }

    /// Bars centred on each x, on the left axis.
    void bars(const std::string& name, const Series& s, const std::string& color = "#4c72b0") {
        items_.push_back({Kind::bars, name, s, color, false});
        include(s, false);
        y_.include(0.0);
    }

    /// A line measured against a second axis on the right.
    void line_right(const std::string& name, const Series& s, std::string y_label,
                    const std::string& color = "#dd8452") {
        items_.push_back({Kind::line, name, s, color, true});
        include(s, true);
        y2_label_ = std::move(y_label);
    }

    /// Horizontal line at y on the left axis (always inside the axis range).
    void baseline(double y, const std::string& color = "#d62728") {
        baseline_ = {y, color};
        y_.include(y);
    }

    void fix_y(double lo, double hi) { y_fixed_ = detail::Range{lo, hi}; }

    std::string render() const {
        using detail::px;
        const detail::Range xr = x_.padded(0.02);
        const detail::Range yr = y_fixed_ ? *y_fixed_ : y_.padded();
        const detail::Range y2r = y2_.padded();
        auto X = [&](double v) { return kLeft + (v - xr.lo) / (xr.hi - xr.lo) * plot_w(); };
        auto Y = [&](double v, const detail::Range& r) {
            return kTop + (1.0 - (v - r.lo) / (r.hi - r.lo)) * plot_h();
        };

        std::ostringstream o;
        o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
        o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
          << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
        o << "<title>" << detail::xml_escape(title_) << "</title>\n";
        o << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
        o << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
          << detail::xml_escape(title_) << "</text>\n";

        // Axes and ticks.
        o << "<g class=\"axes\" data-x-min=\"" << fmt(xr.lo) << "\" data-x-max=\"" << fmt(xr.hi)
          << "\" data-y-min=\"" << fmt(yr.lo) << "\" data-y-max=\"" << fmt(yr.hi) << '"';
        if (has_right()) o << " data-y2-min=\"" << fmt(y2r.lo) << "\" data-y2-max=\"" << fmt(y2r.hi) << '"';
        o << " stroke=\"black\" fill=\"none\">\n";
        o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w() << "\" height=\"" << plot_h()
          << "\"/>\n";
        o << "</g>\n<g class=\"ticks\" fill=\"black\">\n";
        for (int i = 0; i <= kTicks; ++i) {
            const double fx = xr.lo + (xr.hi - xr.lo) * i / kTicks;
            o << "<text x=\"" << px(X(fx)) << "\" y=\"" << kTop + plot_h() + 16
              << "\" text-anchor=\"middle\">" << detail::tick_label(fx) << "</text>\n";
            const double fy = yr.lo + (yr.hi - yr.lo) * i / kTicks;
            o << "<text x=\"" << kLeft - 6 << "\" y=\"" << px(Y(fy, yr) + 4)
              << "\" text-anchor=\"end\">" << detail::tick_label(fy) << "</text>\n";
            if (has_right()) {
                const double f2 = y2r.lo + (y2r.hi - y2r.lo) * i / kTicks;
                o << "<text x=\"" << kLeft + plot_w() + 6 << "\" y=\"" << px(Y(f2, y2r) + 4)
                  << "\" text-anchor=\"start\">" << detail::tick_label(f2) << "</text>\n";
            }
        }
        o << "<text x=\"" << px(kLeft + plot_w() / 2) << "\" y=\"" << kHeight - 10
          << "\" text-anchor=\"middle\">" << detail::xml_escape(x_label_) << "</text>\n";
        o << "<text x=\"16\" y=\"" << px(kTop + plot_h() / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
          << px(kTop + plot_h() / 2) << ")\">" << detail::xml_escape(y_label_) << "</text>\n";
        if (has_right())
            o << "<text x=\"" << kWidth - 12 << "\" y=\"" << px(kTop + plot_h() / 2)
              << "\" text-anchor=\"middle\" transform=\"rotate(90 " << kWidth - 12 << ' '
              << px(kTop + plot_h() / 2) << ")\">" << detail::xml_escape(y2_label_) << "</text>\n";
        o << "</g>\n";

        // Bars first so lines stay visible on top.
        for (const auto& it : items_) {
            if (it.kind != Kind::bars) continue;
            const detail::Range dr = data_range(it.data);
            double w = plot_w() / std::max<std::size_t>(it.data.size(), 1) * 0.7;
            if (it.data.size() > 1) {
                double gap = std::numeric_limits<double>::infinity();
                for (std::size_t i = 1; i < it.data.size(); ++i)
                    gap = std::min(gap, std::abs(it.data[i].first - it.data[i - 1].first));
                w = std::min(w, gap / (xr.hi - xr.lo) * plot_w() * 0.8);
            }
            w = std::max(w, 1.0);
            o << "<g class=\"series bars\" data-name=\"" << detail::xml_escape(it.name) << "\" data-min=\""
              << fmt(dr.lo) << "\" data-max=\"" << fmt(dr.hi) << "\" fill=\"" << it.color << "\">\n";
            for (const auto& [x, y] : it.data) {
                if (!std::isfinite(y)) continue;
                const double y0 = Y(0.0, yr), y1 = Y(y, yr);
                o << "<rect x=\"" << px(X(x) - w / 2) << "\" y=\"" << px(std::min(y0, y1)) << "\" width=\""
                  << px(w) << "\" height=\"" << px(std::abs(y1 - y0)) << "\"/>\n";
            }
            o << "</g>\n";
        }
        for (const auto& it : items_) {
            if (it.kind != Kind::line) continue;
            const detail::Range& r = it.right ? y2r : yr;
            const detail::Range dr = data_range(it.data);
            o << "<g class=\"series line\" data-name=\"" << detail::xml_escape(it.name) << "\" data-axis=\""
              << (it.right ? "right" : "left") << "\" data-min=\"" << fmt(dr.lo) << "\" data-max=\""
              << fmt(dr.hi) << "\">\n<polyline fill=\"none\" stroke=\"" << it.color
              << "\" stroke-width=\"1.5\" points=\"";
            bool first = true;
            for (const auto& [x, y] : it.data) {
                if (!std::isfinite(y)) continue;
                if (!first) o << ' ';
                first = false;
                o << px(X(x)) << ',' << px(Y(y, r));
            }
            o << "\"/>\n</g>\n";
        }
        if (baseline_) {
            const double y = Y(baseline_->first, yr);
            o << "<line class=\"baseline\" data-y=\"" << fmt(baseline_->first) << "\" x1=\"" << kLeft
              << "\" y1=\"" << px(y) << "\" x2=\"" << kLeft + plot_w() << "\" y2=\"" << px(y) << "\" stroke=\""
              << baseline_->second << "\" stroke-width=\"1\"/>\n";
        }

        // Legend.
        int row = 0;
        for (const auto& it : items_) {
            const double ly = kTop + 14 + 16 * row++;
            o << "<g class=\"legend\"><rect x=\"" << kLeft + 10 << "\" y=\"" << ly - 9 << "\" width=\"12\" height=\"10\" fill=\""
              << it.color << "\"/><text x=\"" << kLeft + 28 << "\" y=\"" << ly << "\">"
              << detail::xml_escape(it.name) << "</text></g>\n";
        }
        o << "</svg>\n";
        return o.str();
    }

private:
    enum class Kind { line, bars };
    struct Item {
        Kind kind;
        std::string name;
        Series data;
        std::string color;
        bool right;
    };

    static constexpr int kWidth = 720, kHeight = 440, kLeft = 80, kRight = 80, kTop = 40, kBottom = 56;
    static constexpr int kTicks = 5;
    static double plot_w() { return kWidth - kLeft - kRight; }
    static double plot_h() { return kHeight - kTop - kBottom; }

    bool has_right() const { return !y2_.empty(); }

    void include(const Series& s, bool right) {
        for (const auto& [x, y] : s) {
            x_.include(x);
            (right ? y2_ : y_).include(y);
        }
    }

    static detail::Range data_range(const Series& s) {
        detail::Range r;
        for (const auto& p : s) r.include(p.second);
        return r;
    }

    std::string title_, x_label_, y_label_, y2_label_;
    std::vector<Item> items_;
    detail::Range x_, y_, y2_;
    std::optional<detail::Range> y_fixed_;
    std::optional<std::pair<double, std::string>> baseline_;
};

}  // namespace starpath

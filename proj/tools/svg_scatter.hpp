#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace evmtool {

/// Static SVG scatter plot: fixed canvas, linear axes with a handful of round
/// ticks, one dot per point.  A convenience renderer for quick inspection of
/// diagram output, not a plotting library.
class SvgScatter {
public:
    SvgScatter(std::string x_label, std::string y_label)
        : x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

    void add(double x, double y) {
        if (std::isfinite(x) && std::isfinite(y)) pts_.push_back({x, y});
    }

    void write(const std::string& path) const {
        if (pts_.empty()) throw std::runtime_error("svg: no points to draw");
        double x_lo = pts_[0].first, x_hi = x_lo, y_lo = pts_[0].second, y_hi = y_lo;
        for (const auto& [x, y] : pts_) {
            x_lo = std::min(x_lo, x); x_hi = std::max(x_hi, x);
            y_lo = std::min(y_lo, y); y_hi = std::max(y_hi, y);
        }
        pad(x_lo, x_hi);
        pad(y_lo, y_hi);

        const int w = 900, h = 600, ml = 70, mr = 20, mt = 20, mb = 50;
        auto px = [&](double x) { return ml + (x - x_lo) / (x_hi - x_lo) * (w - ml - mr); };
        auto py = [&](double y) { return h - mb - (y - y_lo) / (y_hi - y_lo) * (h - mt - mb); };

        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot open svg file: " + path);
        os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h
           << "' viewBox='0 0 " << w << " " << h << "'>\n"
           << "<rect width='100%' height='100%' fill='white'/>\n"
           << "<rect x='" << ml << "' y='" << mt << "' width='" << w - ml - mr << "' height='"
           << h - mt - mb << "' fill='none' stroke='black'/>\n";
        for (double t : ticks(x_lo, x_hi)) {
            os << "<line x1='" << px(t) << "' y1='" << h - mb << "' x2='" << px(t) << "' y2='"
               << h - mb + 5 << "' stroke='black'/>\n"
               << "<text x='" << px(t) << "' y='" << h - mb + 18
               << "' font-size='11' text-anchor='middle'>" << label(t) << "</text>\n";
        }
        for (double t : ticks(y_lo, y_hi)) {
            os << "<line x1='" << ml - 5 << "' y1='" << py(t) << "' x2='" << ml << "' y2='"
               << py(t) << "' stroke='black'/>\n"
               << "<text x='" << ml - 8 << "' y='" << py(t) + 4
               << "' font-size='11' text-anchor='end'>" << label(t) << "</text>\n";
        }
        os << "<text x='" << (ml + w - mr) / 2 << "' y='" << h - 12
           << "' font-size='13' text-anchor='middle'>" << x_label_ << "</text>\n"
           << "<text x='16' y='" << (mt + h - mb) / 2
           << "' font-size='13' text-anchor='middle' transform='rotate(-90 16 "
           << (mt + h - mb) / 2 << ")'>" << y_label_ << "</text>\n";
        for (const auto& [x, y] : pts_)
            os << "<circle cx='" << px(x) << "' cy='" << py(y) << "' r='1' fill='black'/>\n";
        os << "</svg>\n";
    }

private:
    static void pad(double& lo, double& hi) {
        double d = hi - lo;
        if (d <= 0) d = std::max(1.0, std::abs(lo));
        lo -= 0.03 * d;
        hi += 0.03 * d;
    }

    /// 4-6 round tick values covering [lo, hi].
    static std::vector<double> ticks(double lo, double hi) {
        double raw = (hi - lo) / 5.0;
        double mag = std::pow(10.0, std::floor(std::log10(raw)));
        double step = mag;
        for (double m : {1.0, 2.0, 5.0, 10.0})
            if (m * mag >= raw) { step = m * mag; break; }
        std::vector<double> out;
        for (double t = std::ceil(lo / step) * step; t <= hi + 1e-12 * step; t += step)
            out.push_back(t);
        return out;
    }

    static std::string label(double t) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", t + 0.0);  // normalize -0
        return buf;
    }

    std::string x_label_, y_label_;
    std::vector<std::pair<double, double>> pts_;
};

}  // namespace evmtool

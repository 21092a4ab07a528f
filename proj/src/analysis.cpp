#include "attnres/analysis.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "attnres/csvio.hpp"

namespace attnres {

double PowerLawFit::loss_at(double compute) const {
    return A * std::pow(compute, -alpha);
}

std::string PowerLawFit::to_json() const {
    return std::string("{\"A\": ") + fmt_double(A) + ", \"alpha\": " + fmt_double(alpha) +
           ", \"residual\": " + fmt_double(residual) + "}";
}

PowerLawFit fit_power_law(std::span<const std::pair<double, double>> points) {
    if (points.size() < 2) {
        throw std::invalid_argument("fit_power_law: need at least two points");
    }
    for (const auto& [c, l] : points) {
        if (!(c > 0.0) || !(l > 0.0)) {
            throw std::invalid_argument("fit_power_law: points must be positive");
        }
    }
    const double n = static_cast<double>(points.size());
    double mx = 0.0, my = 0.0;
    for (const auto& [c, l] : points) {
        mx += std::log(c);
        my += std::log(l);
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [c, l] : points) {
        const double dx = std::log(c) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(l) - my);
    }
    if (sxx == 0.0) {
        throw std::invalid_argument("fit_power_law: compute values are all equal");
    }
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;

    PowerLawFit fit;
    fit.A = std::exp(intercept);
    fit.alpha = -slope;
    double ss = 0.0;
    for (const auto& [c, l] : points) {
        const double r = std::log(l) - (intercept + slope * std::log(c));
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / n);
    return fit;
}

double estimate_compute(double active_params, double tokens) {
    if (active_params < 0.0 || tokens < 0.0) {
        throw std::invalid_argument("estimate_compute: counts must be nonnegative");
    }
    return 6.0 * active_params * tokens / (1e15 * 86400.0);
}

double compute_advantage(const PowerLawFit& a, const PowerLawFit& b, double c_ref) {
    if (!(a.A > 0.0) || !(b.A > 0.0)) {
        throw std::invalid_argument("compute_advantage: prefactors must be positive");
    }
    if (a.alpha == 0.0) {
        throw std::invalid_argument("compute_advantage: curve a has zero exponent");
    }
    if (!(c_ref > 0.0)) {
        throw std::invalid_argument("compute_advantage: reference compute must be positive");
    }
    const double target = b.loss_at(c_ref);
    const double c_equiv = std::pow(a.A / target, 1.0 / a.alpha);
    return c_equiv / c_ref;
}

std::vector<std::pair<double, double>> load_scaling_csv(std::istream& in) {
    std::vector<std::pair<double, double>> points;
    std::string line;
    int columns = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream row(line);
        std::vector<std::string> cells;
        std::string cell;
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        if (columns == 0) {
            // header row decides the format
            if (cells.size() == 2) {
                columns = 2;
            } else if (cells.size() == 3) {
                columns = 3;
            } else {
                throw std::runtime_error("scaling csv: expected 2 or 3 columns");
            }
            continue;
        }
        if (static_cast<int>(cells.size()) != columns) {
            throw std::runtime_error("scaling csv: ragged row: " + line);
        }
        if (columns == 2) {
            points.emplace_back(std::stod(cells[0]), std::stod(cells[1]));
        } else {
            points.emplace_back(estimate_compute(std::stod(cells[0]), std::stod(cells[1])),
                                std::stod(cells[2]));
        }
    }
    return points;
}

}  // namespace attnres

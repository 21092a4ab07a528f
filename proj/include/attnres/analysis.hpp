#pragma once

#include <istream>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace attnres {

/// loss = A * C^(-alpha), fit by ordinary least squares in log-log space.
/// residual is the RMS of the log-space residuals.
struct PowerLawFit {
    double A = 0.0;
    double alpha = 0.0;
    double residual = 0.0;

    double loss_at(double compute) const;
    std::string to_json() const;
};

/// points are (compute in PFLOP/s-days, loss); needs >= 2 points, all
/// positive.
PowerLawFit fit_power_law(std::span<const std::pair<double, double>> points);

/// 6 * params * tokens FLOPs expressed in PFLOP/s-days (8.64e19 FLOPs each).
double estimate_compute(double active_params, double tokens);

/// Compute multiplier at which curve a matches curve b's loss at c_ref:
/// solve A_a * C'^(-alpha_a) = A_b * c_ref^(-alpha_b), return C'/c_ref.
double compute_advantage(const PowerLawFit& a, const PowerLawFit& b, double c_ref);

/// Reads scaling points from CSV. Accepts either a (compute,loss) or a
/// (params,tokens,loss) header; the latter is converted via
/// estimate_compute. Lines starting with '#' are skipped.
std::vector<std::pair<double, double>> load_scaling_csv(std::istream& in);

}  // namespace attnres

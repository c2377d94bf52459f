#include "scbcov/covest.hpp"

#include "scbcov/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace scbcov {

FunctionalDataset::FunctionalDataset(Eigen::MatrixXd observations, std::optional<Domain> domain)
    : y_(std::move(observations)), domain_(domain) {
    if (y_.rows() < 2) {
        throw DataError(fmt::format("need at least 2 subjects, got {}", y_.rows()));
    }
    if (y_.cols() < 2) {
        throw DataError(fmt::format("need at least 2 grid points, got {}", y_.cols()));
    }
    for (Eigen::Index i = 0; i < y_.rows(); ++i) {
        for (Eigen::Index j = 0; j < y_.cols(); ++j) {
            if (!std::isfinite(y_(i, j))) {
                throw DataError(fmt::format("non-finite observation at row {}, column {}", i + 1, j + 1));
            }
        }
    }
    if (domain_ && !(domain_->b > domain_->a)) {
        throw DataError(fmt::format("domain [{}, {}] is empty", domain_->a, domain_->b));
    }
}

TrajectoryFits fit_trajectories(const FunctionalDataset& data, const SplineBasis& basis) {
    TrajectoryFits fits{design_matrix(basis, data.grid_size()), {}, {}, {}};
    const LeastSquaresSolver solver(fits.design);
    fits.coeffs = solver.solve_rows(data.observations());

    // Fixed row order keeps the mean independent of how fits were scheduled.
    const Eigen::Index dim = fits.coeffs.cols();
    fits.mean_coeffs = Eigen::VectorXd::Zero(dim);
    for (Eigen::Index i = 0; i < fits.coeffs.rows(); ++i) {
        fits.mean_coeffs += fits.coeffs.row(i).transpose();
    }
    fits.mean_coeffs /= static_cast<double>(fits.coeffs.rows());
    fits.resid_coeffs = fits.coeffs.rowwise() - fits.mean_coeffs.transpose();
    return fits;
}

Eigen::VectorXd eval_fit(const TrajectoryFits& fits, FitComponent which, const std::vector<double>& xs) {
    Eigen::VectorXd coeffs;
    switch (which.kind) {
        case FitComponent::Kind::mean:
            coeffs = fits.mean_coeffs;
            break;
        case FitComponent::Kind::trajectory:
        case FitComponent::Kind::residual:
            if (which.index < 0 || which.index >= fits.subjects()) {
                throw InvalidArgument(
                    fmt::format("trajectory index {} out of range [0, {})", which.index, fits.subjects()));
            }
            coeffs = which.kind == FitComponent::Kind::trajectory ? fits.coeffs.row(which.index).transpose()
                                                                  : fits.resid_coeffs.row(which.index).transpose();
            break;
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(xs.size()));
    for (std::size_t k = 0; k < xs.size(); ++k) {
        out[static_cast<Eigen::Index>(k)] = fits.basis().eval_spline(coeffs, xs[k]);
    }
    return out;
}

std::string to_string(CurveKind kind) {
    switch (kind) {
        case CurveKind::c_hat: return "C_hat";
        case CurveKind::c_tilde: return "C_tilde";
        case CurveKind::xi_hat: return "Xi_hat";
        case CurveKind::model: return "model";
        case CurveKind::band_edge: return "band_edge";
        case CurveKind::truth: return "truth";
    }
    return "C_hat";
}

double CovCurve::at(double h) const {
    if (h_grid.empty()) {
        throw InvalidArgument("cannot interpolate an empty curve");
    }
    const double tol = 1e-12 * std::max(1.0, max_lag());
    if (h < -tol || h > max_lag() + tol) {
        throw InvalidArgument(fmt::format("lag {} outside the curve range [0, {}]", h, max_lag()));
    }
    if (h_grid.size() == 1 || h >= max_lag()) {
        return values[static_cast<Eigen::Index>(h_grid.size() - 1)];
    }
    const auto it = std::upper_bound(h_grid.begin(), h_grid.end(), h);
    const std::size_t hi = std::max<std::size_t>(1, static_cast<std::size_t>(it - h_grid.begin()));
    const std::size_t lo = hi - 1;
    const double t = (h - h_grid[lo]) / (h_grid[hi] - h_grid[lo]);
    return (1.0 - t) * values[static_cast<Eigen::Index>(lo)] + t * values[static_cast<Eigen::Index>(hi)];
}

std::vector<double> default_h_grid(int grid_size, double h0) {
    if (!(h0 > 0.0 && h0 <= 1.0)) {
        throw InvalidArgument(fmt::format("h0 must lie in (0, 1], got {}", h0));
    }
    if (grid_size < 2) {
        throw InvalidArgument(fmt::format("grid size must be >= 2, got {}", grid_size));
    }
    const int last = std::min(grid_size - 1, static_cast<int>(std::floor(h0 * grid_size + 1e-9)));
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(last + 1));
    for (int j = 0; j <= last; ++j) {
        out.push_back(static_cast<double>(j) / grid_size);
    }
    return out;
}

void validate_h_grid(const std::vector<double>& h_grid) {
    if (h_grid.empty()) {
        throw InvalidArgument("lag grid is empty");
    }
    if (h_grid.front() != 0.0) {
        throw InvalidArgument(fmt::format("lag grid must start at 0, starts at {}", h_grid.front()));
    }
    for (std::size_t k = 1; k < h_grid.size(); ++k) {
        if (!(h_grid[k] > h_grid[k - 1])) {
            throw InvalidArgument(fmt::format("lag grid not increasing at position {}", k));
        }
    }
    if (!(h_grid.back() < 1.0)) {
        throw InvalidArgument(fmt::format("lag {} must be below 1", h_grid.back()));
    }
}

QuadratureRule trapezoid_rule(double length, int points) {
    if (points < 2) {
        throw InvalidArgument(fmt::format("trapezoid rule needs at least 2 nodes, got {}", points));
    }
    QuadratureRule rule;
    rule.nodes.resize(static_cast<std::size_t>(points));
    rule.weights.assign(static_cast<std::size_t>(points), length / (points - 1));
    for (int m = 0; m < points; ++m) {
        rule.nodes[static_cast<std::size_t>(m)] = length * m / (points - 1);
    }
    rule.weights.front() *= 0.5;
    rule.weights.back() *= 0.5;
    return rule;
}

double CovSurface::eval(double x, double xp) const {
    return basis.eval(x).dot(beta * basis.eval(xp));
}

Eigen::MatrixXd CovSurface::eval_grid(const std::vector<double>& xs) const {
    const Eigen::MatrixXd b = basis.eval_matrix(xs);
    return b * beta * b.transpose();
}

CovSurface covariance_surface(const TrajectoryFits& fits) {
    const Eigen::MatrixXd& a = fits.resid_coeffs;
    Eigen::MatrixXd beta = a.transpose() * a / static_cast<double>(a.rows());
    beta = 0.5 * (beta + beta.transpose()).eval();
    return CovSurface{fits.basis(), std::move(beta)};
}

namespace {

std::vector<double> shifted(const std::vector<double>& nodes, double h) {
    std::vector<double> out(nodes.size());
    for (std::size_t m = 0; m < nodes.size(); ++m) {
        out[m] = std::min(nodes[m] + h, 1.0);
    }
    return out;
}

}  // namespace

CovCurve covariance_curve(const CovSurface& surface, const std::vector<double>& h_grid, int quad_points) {
    validate_h_grid(h_grid);
    CovCurve curve{h_grid, Eigen::VectorXd(static_cast<Eigen::Index>(h_grid.size())), CurveKind::c_hat};
    for (std::size_t k = 0; k < h_grid.size(); ++k) {
        const double h = h_grid[k];
        const double length = 1.0 - h;
        const auto rule = trapezoid_rule(length, quad_points);
        const Eigen::MatrixXd b0 = surface.basis.eval_matrix(rule.nodes);
        const Eigen::MatrixXd bh = surface.basis.eval_matrix(shifted(rule.nodes, h));
        const Eigen::VectorXd integrand = ((b0 * surface.beta).array() * bh.array()).rowwise().sum();
        const Eigen::Map<const Eigen::VectorXd> w(rule.weights.data(), static_cast<Eigen::Index>(rule.weights.size()));
        curve.values[static_cast<Eigen::Index>(k)] = w.dot(integrand) / length;
    }
    return curve;
}

CovCurve covariance_curve(const TrajectoryFits& fits, const std::vector<double>& h_grid, int quad_points) {
    const int points = quad_points == 0 ? fits.grid_size() : quad_points;
    return covariance_curve(covariance_surface(fits), h_grid, points);
}

double interpolate_on_unit_grid(const Eigen::Ref<const Eigen::VectorXd>& values, double x) {
    const Eigen::Index n = values.size();
    // Grid point j/N is stored at index j-1.
    const double pos = x * static_cast<double>(n) - 1.0;
    Eigen::Index lo = static_cast<Eigen::Index>(std::floor(pos));
    lo = std::clamp<Eigen::Index>(lo, 0, n - 2);
    const double t = pos - static_cast<double>(lo);
    return (1.0 - t) * values[lo] + t * values[lo + 1];
}

CovCurve oracle_covariance(const Eigen::Ref<const Eigen::MatrixXd>& z, const std::vector<double>& h_grid,
                           int quad_points) {
    validate_h_grid(h_grid);
    if (z.cols() < 2 || z.rows() < 1) {
        throw DataError("oracle covariance needs at least one process on at least 2 grid points");
    }
    const int points = quad_points == 0 ? static_cast<int>(z.cols()) : quad_points;
    const Eigen::Index n = z.rows();
    const Eigen::Index grid = z.cols();

    // Each node mixes its two neighbouring grid columns.
    auto interp = [&z, grid, n](const std::vector<double>& xs) {
        Eigen::MatrixXd out(n, static_cast<Eigen::Index>(xs.size()));
        for (std::size_t m = 0; m < xs.size(); ++m) {
            const double pos = xs[m] * static_cast<double>(grid) - 1.0;
            const Eigen::Index lo = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor(pos)), 0, grid - 2);
            const double t = pos - static_cast<double>(lo);
            out.col(static_cast<Eigen::Index>(m)) = (1.0 - t) * z.col(lo) + t * z.col(lo + 1);
        }
        return out;
    };

    CovCurve curve{h_grid, Eigen::VectorXd(static_cast<Eigen::Index>(h_grid.size())), CurveKind::c_tilde};
    for (std::size_t k = 0; k < h_grid.size(); ++k) {
        const double h = h_grid[k];
        const double length = 1.0 - h;
        const auto rule = trapezoid_rule(length, points);
        const Eigen::MatrixXd z0 = interp(rule.nodes);
        const Eigen::MatrixXd zh = interp(shifted(rule.nodes, h));
        const Eigen::VectorXd integrand = (z0.array() * zh.array()).colwise().sum().transpose();
        const Eigen::Map<const Eigen::VectorXd> w(rule.weights.data(), static_cast<Eigen::Index>(rule.weights.size()));
        curve.values[static_cast<Eigen::Index>(k)] = w.dot(integrand) / (static_cast<double>(n) * length);
    }
    return curve;
}

Eigen::MatrixXd stationary_surface(const CovCurve& curve, const std::vector<double>& xs, LagPolicy policy) {
    const auto size = static_cast<Eigen::Index>(xs.size());
    Eigen::MatrixXd out(size, size);
    const double tol = 1e-12 * std::max(1.0, curve.max_lag());
    for (Eigen::Index j = 0; j < size; ++j) {
        for (Eigen::Index jp = 0; jp <= j; ++jp) {
            const double lag = std::abs(xs[static_cast<std::size_t>(j)] - xs[static_cast<std::size_t>(jp)]);
            double value;
            if (lag > curve.max_lag() + tol) {
                if (policy == LagPolicy::reject) {
                    throw InvalidArgument(
                        fmt::format("lag {} between grid points {} and {} exceeds h0 = {}", lag, jp, j, curve.max_lag()));
                }
                value = std::numeric_limits<double>::quiet_NaN();
            } else {
                value = curve.at(std::min(lag, curve.max_lag()));
            }
            out(j, jp) = value;
            out(jp, j) = value;
        }
    }
    return out;
}

}  // namespace scbcov

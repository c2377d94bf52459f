#pragma once

#include "scbcov/bspline.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace scbcov {

/// Original-unit interval [a, b]; grid point j/N on the unit scale sits at
/// a + (b - a) j / N.
struct Domain {
    double a = 0.0;
    double b = 1.0;

    double scale() const { return b - a; }
    double to_original(double u) const { return a + scale() * u; }
    double to_unit(double x) const { return (x - a) / scale(); }
};

/// n trajectories observed on the common grid j/N, j = 1..N.
class FunctionalDataset {
public:
    explicit FunctionalDataset(Eigen::MatrixXd observations, std::optional<Domain> domain = std::nullopt);

    const Eigen::MatrixXd& observations() const { return y_; }
    int subjects() const { return static_cast<int>(y_.rows()); }
    int grid_size() const { return static_cast<int>(y_.cols()); }
    const std::optional<Domain>& domain() const { return domain_; }
    /// Multiplier turning unit-scale lags into original units (1 without a domain).
    double lag_scale() const { return domain_ ? domain_->scale() : 1.0; }
    std::vector<double> grid() const { return unit_grid(grid_size()); }

private:
    Eigen::MatrixXd y_;
    std::optional<Domain> domain_;
};

/// Per-trajectory least-squares spline fits eta_i, their mean m and the
/// residual processes Z_i = eta_i - m, all in coefficient form.
struct TrajectoryFits {
    DesignMatrix design;
    Eigen::MatrixXd coeffs;        // n x (J+p)
    Eigen::VectorXd mean_coeffs;   // J+p
    Eigen::MatrixXd resid_coeffs;  // n x (J+p)

    const SplineBasis& basis() const { return design.basis; }
    int subjects() const { return static_cast<int>(coeffs.rows()); }
    int grid_size() const { return design.rows(); }
};

TrajectoryFits fit_trajectories(const FunctionalDataset& data, const SplineBasis& basis);

struct FitComponent {
    enum class Kind { trajectory, mean, residual };
    Kind kind = Kind::mean;
    int index = 0;

    static FitComponent trajectory(int i) { return {Kind::trajectory, i}; }
    static FitComponent mean() { return {Kind::mean, 0}; }
    static FitComponent residual(int i) { return {Kind::residual, i}; }
};

Eigen::VectorXd eval_fit(const TrajectoryFits& fits, FitComponent which, const std::vector<double>& xs);

enum class CurveKind { c_hat, c_tilde, xi_hat, model, band_edge, truth };

std::string to_string(CurveKind kind);

/// A function of the lag sampled on an increasing grid starting at 0.
struct CovCurve {
    std::vector<double> h_grid;
    Eigen::VectorXd values;
    CurveKind kind = CurveKind::c_hat;

    std::size_t size() const { return h_grid.size(); }
    double max_lag() const { return h_grid.empty() ? 0.0 : h_grid.back(); }
    /// Linear interpolation; throws for lags beyond the last grid point.
    double at(double h) const;
};

/// Lags {0, 1/N, ..., floor(h0 N)/N}, capped at (N-1)/N; h0 = 1 takes every lag.
std::vector<double> default_h_grid(int grid_size, double h0 = 0.5);

/// Checks 0 = h_0 < h_1 < ... < h_last < 1.
void validate_h_grid(const std::vector<double>& h_grid);

/// Composite trapezoid nodes and weights on [0, length].
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

QuadratureRule trapezoid_rule(double length, int points);

/// Spline covariance surface G(x, x') = B(x)^T beta B(x').
struct CovSurface {
    SplineBasis basis{1, 0};
    Eigen::MatrixXd beta;

    double eval(double x, double xp) const;
    /// Surface on every pair of `xs`.
    Eigen::MatrixXd eval_grid(const std::vector<double>& xs) const;
};

CovSurface covariance_surface(const TrajectoryFits& fits);

/// C(h) = (1-h)^{-1} int_0^{1-h} n^{-1} sum_i Z_i(x) Z_i(x+h) dx with the
/// trapezoid rule on `quad_points` nodes (0 selects N).
CovCurve covariance_curve(const TrajectoryFits& fits, const std::vector<double>& h_grid, int quad_points = 0);
CovCurve covariance_curve(const CovSurface& surface, const std::vector<double>& h_grid, int quad_points);

/// The infeasible estimator built from the true processes Z (n x N on the
/// grid j/N), extended piecewise-linearly between grid points.
CovCurve oracle_covariance(const Eigen::Ref<const Eigen::MatrixXd>& z, const std::vector<double>& h_grid,
                           int quad_points = 0);

/// Piecewise-linear interpolant of grid values v_j at j/N, linearly
/// extrapolated on [0, 1/N).
double interpolate_on_unit_grid(const Eigen::Ref<const Eigen::VectorXd>& values, double x);

enum class LagPolicy { reject, nan };

/// Matrix with entries C(|x_j - x_j'|).
Eigen::MatrixXd stationary_surface(const CovCurve& curve, const std::vector<double>& xs,
                                   LagPolicy policy = LagPolicy::reject);

}  // namespace scbcov

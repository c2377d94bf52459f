#pragma once

#include "scbcov/covest.hpp"

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <vector>

namespace scbcov {

/// Spectral decomposition of a spline covariance surface.
///
/// Column k of `psi_coeffs` holds the spline coefficients of the k-th
/// eigenfunction, normalized so that N^{-1} sum_j psi_k(j/N)^2 = 1.
/// `phi_coeffs` are the same columns scaled by sqrt(lambda_k).
struct FpcaResult {
    SplineBasis basis{1, 0};
    int grid_size = 0;
    Eigen::VectorXd lambda;
    Eigen::MatrixXd psi_coeffs;
    Eigen::MatrixXd phi_coeffs;
    int kappa = 0;
    Eigen::MatrixXd scores;          // n x kappa
    Eigen::VectorXd fourth_moments;  // kappa

    /// phi_k on the given abscissae, one column per retained component.
    Eigen::MatrixXd phi_values(const std::vector<double>& xs) const;
    Eigen::MatrixXd psi_values(const std::vector<double>& xs) const;
};

/// Eigenvalues at or below this fraction of the largest one are clipped to 0.
inline constexpr double kEigenClipRatio = 1e-12;

/// Reduces the eigenequation to the symmetric problem N^{-1} L^T beta L v = lambda v
/// with B^T B = L L^T, then maps back gamma = sqrt(N) L^{-T} v. Eigenvalues are
/// sorted descending and each eigenvector's first nonzero coefficient is positive.
FpcaResult eigen_decompose(const CovSurface& surface, const DesignMatrix& design);

/// Smallest kappa whose leading (clipped) eigenvalues explain `fve` of the total.
int select_kappa(const Eigen::Ref<const Eigen::VectorXd>& lambda, double fve = 0.95);

/// xi_ik = N^{-1} sum_j lambda_k^{-1} (Y_ij - m(j/N)) phi_k(j/N) for k <= kappa.
Eigen::MatrixXd fpc_scores(const FunctionalDataset& data, const TrajectoryFits& fits, const FpcaResult& fpca);

/// Runs eigen_decompose, select_kappa, fpc_scores and the fourth moments n^{-1} sum_i xi_ik^4.
FpcaResult run_fpca(const FunctionalDataset& data, const TrajectoryFits& fits, double fve = 0.95);

/// A_kk'(h) = (1-h)^{-1} int_0^{1-h} phi_k(x) phi_k'(x+h) dx for every lag.
struct LagProducts {
    std::vector<double> h_grid;
    std::vector<Eigen::MatrixXd> a;  // kappa x kappa per lag
};

LagProducts lag_products(const FpcaResult& fpca, const std::vector<double>& h_grid, int quad_points = 0);

/// Floor applied to the variance function before inverse square roots.
inline constexpr double kXiFloor = 1e-12;

/// How the second term of the variance function is estimated.
///  - c_hat_squared: C_hat(h)^2, the usual plug-in.
///  - cross_products: sum_kk' A_kk'(h) A_k'k(h), the truncated series of the
///    asymptotic variance; equals Var zeta(h) under symmetric coupling.
enum class XiForm { cross_products, c_hat_squared };

XiForm parse_xi_form(std::string_view name);
std::string to_string(XiForm form);

/// Xi(h) = sum_kk' A_kk'^2 + [second term] + sum_k (m4_k - 3) A_kk^2, floored at kXiFloor.
CovCurve variance_function(const FpcaResult& fpca, const CovCurve& c_hat, const LagProducts& products,
                           XiForm form = XiForm::c_hat_squared);
CovCurve variance_function(const FpcaResult& fpca, const CovCurve& c_hat, const std::vector<double>& h_grid,
                           int quad_points = 0, XiForm form = XiForm::c_hat_squared);

/// Plug-in covariance of the limiting process on the lag grid:
/// sum_kk' A_kk'(h) A_kk'(h') + sum_k (m4_k - 3) A_kk(h) A_kk(h') + C(h) C(h').
/// Diagnostic only; bands are built from the variance function and simulated sups.
Eigen::MatrixXd omega_hat(const FpcaResult& fpca, const CovCurve& c_hat, const LagProducts& products);

}  // namespace scbcov

#include "scbcov/fpca.hpp"

#include "scbcov/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace scbcov {

Eigen::MatrixXd FpcaResult::phi_values(const std::vector<double>& xs) const {
    return basis.eval_matrix(xs) * phi_coeffs.leftCols(kappa);
}

Eigen::MatrixXd FpcaResult::psi_values(const std::vector<double>& xs) const {
    return basis.eval_matrix(xs) * psi_coeffs.leftCols(kappa);
}

FpcaResult eigen_decompose(const CovSurface& surface, const DesignMatrix& design) {
    const Eigen::Index dim = design.cols();
    if (surface.beta.rows() != dim || surface.beta.cols() != dim) {
        throw InvalidArgument(fmt::format("surface coefficients are {}x{} but the design has {} columns",
                                          surface.beta.rows(), surface.beta.cols(), dim));
    }
    const double grid = design.rows();
    const Eigen::LLT<Eigen::MatrixXd> llt(design.matrix.transpose() * design.matrix);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("Cholesky factorization of B^T B failed: rank-deficient design");
    }
    const Eigen::MatrixXd l = llt.matrixL();
    Eigen::MatrixXd reduced = l.transpose() * surface.beta * l / grid;
    reduced = 0.5 * (reduced + reduced.transpose()).eval();

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(reduced);
    if (eig.info() != Eigen::Success) {
        throw NumericalError("symmetric eigensolver did not converge");
    }

    FpcaResult out;
    out.basis = surface.basis;
    out.grid_size = design.rows();
    out.lambda.resize(dim);
    Eigen::MatrixXd vectors(dim, dim);
    for (Eigen::Index k = 0; k < dim; ++k) {
        out.lambda[k] = eig.eigenvalues()[dim - 1 - k];
        vectors.col(k) = eig.eigenvectors().col(dim - 1 - k);
    }
    const double top = out.lambda.size() > 0 ? out.lambda[0] : 0.0;
    for (Eigen::Index k = 0; k < dim; ++k) {
        if (top <= 0.0 || out.lambda[k] <= kEigenClipRatio * top) {
            out.lambda[k] = 0.0;
        }
    }

    out.psi_coeffs = llt.matrixU().solve(vectors) * std::sqrt(grid);
    for (Eigen::Index k = 0; k < dim; ++k) {
        auto col = out.psi_coeffs.col(k);
        const double scale = col.cwiseAbs().maxCoeff();
        for (Eigen::Index r = 0; r < dim; ++r) {
            if (std::abs(col[r]) > 1e-10 * scale) {
                if (col[r] < 0.0) {
                    col = -col;
                }
                break;
            }
        }
    }
    out.phi_coeffs = out.psi_coeffs * out.lambda.cwiseSqrt().asDiagonal();
    return out;
}

int select_kappa(const Eigen::Ref<const Eigen::VectorXd>& lambda, double fve) {
    if (!(fve > 0.0 && fve <= 1.0)) {
        throw InvalidArgument(fmt::format("fraction of variance explained must lie in (0, 1], got {}", fve));
    }
    const Eigen::VectorXd positive = lambda.cwiseMax(0.0);
    const double total = positive.sum();
    if (!(total > 0.0)) {
        throw NumericalError("all eigenvalues are <= 0; the covariance surface is degenerate");
    }
    double running = 0.0;
    for (Eigen::Index k = 0; k < positive.size(); ++k) {
        running += positive[k];
        if (positive[k] > 0.0 && running >= fve * total * (1.0 - 1e-12)) {
            return static_cast<int>(k + 1);
        }
    }
    return static_cast<int>((positive.array() > 0.0).count());
}

Eigen::MatrixXd fpc_scores(const FunctionalDataset& data, const TrajectoryFits& fits, const FpcaResult& fpca) {
    if (fpca.kappa < 1) {
        throw InvalidArgument("FPC scores need at least one retained component");
    }
    for (int k = 0; k < fpca.kappa; ++k) {
        if (!(fpca.lambda[k] > 0.0)) {
            throw NumericalError(fmt::format("eigenvalue {} is zero; its scores are undefined", k + 1));
        }
    }
    const auto& design = fits.design;
    const Eigen::VectorXd mean_on_grid = design.matrix * fits.mean_coeffs;
    const Eigen::MatrixXd centered = data.observations().rowwise() - mean_on_grid.transpose();
    const Eigen::MatrixXd phi = design.matrix * fpca.phi_coeffs.leftCols(fpca.kappa);
    Eigen::MatrixXd scores = centered * phi / static_cast<double>(design.rows());
    for (int k = 0; k < fpca.kappa; ++k) {
        scores.col(k) /= fpca.lambda[k];
    }
    return scores;
}

FpcaResult run_fpca(const FunctionalDataset& data, const TrajectoryFits& fits, double fve) {
    FpcaResult out = eigen_decompose(covariance_surface(fits), fits.design);
    out.kappa = select_kappa(out.lambda, fve);
    out.scores = fpc_scores(data, fits, out);
    out.fourth_moments = out.scores.array().pow(4).colwise().mean().transpose();
    return out;
}

LagProducts lag_products(const FpcaResult& fpca, const std::vector<double>& h_grid, int quad_points) {
    validate_h_grid(h_grid);
    if (fpca.kappa < 1) {
        throw InvalidArgument("lag products need at least one retained component");
    }
    const int points = quad_points == 0 ? fpca.grid_size : quad_points;
    LagProducts out{h_grid, {}};
    out.a.reserve(h_grid.size());
    for (double h : h_grid) {
        const double length = 1.0 - h;
        const auto rule = trapezoid_rule(length, points);
        std::vector<double> ahead(rule.nodes.size());
        std::transform(rule.nodes.begin(), rule.nodes.end(), ahead.begin(),
                       [h](double x) { return std::min(x + h, 1.0); });
        const Eigen::MatrixXd phi0 = fpca.phi_values(rule.nodes);
        const Eigen::MatrixXd phih = fpca.phi_values(ahead);
        const Eigen::Map<const Eigen::VectorXd> w(rule.weights.data(), static_cast<Eigen::Index>(rule.weights.size()));
        out.a.push_back(phi0.transpose() * w.asDiagonal() * phih / length);
    }
    return out;
}

XiForm parse_xi_form(std::string_view name) {
    if (name == "cross_products") {
        return XiForm::cross_products;
    }
    if (name == "c_hat_squared") {
        return XiForm::c_hat_squared;
    }
    throw InvalidArgument(fmt::format("unknown variance form '{}' (expected cross_products or c_hat_squared)", name));
}

std::string to_string(XiForm form) {
    return form == XiForm::cross_products ? "cross_products" : "c_hat_squared";
}

CovCurve variance_function(const FpcaResult& fpca, const CovCurve& c_hat, const LagProducts& products,
                           XiForm form) {
    if (products.h_grid.empty()) {
        throw InvalidArgument("variance function needs a nonempty lag grid");
    }
    if (c_hat.h_grid != products.h_grid) {
        throw InvalidArgument("covariance curve and lag products use different lag grids");
    }
    CovCurve xi{products.h_grid, Eigen::VectorXd(static_cast<Eigen::Index>(products.h_grid.size())),
                CurveKind::xi_hat};
    for (std::size_t t = 0; t < products.a.size(); ++t) {
        const Eigen::MatrixXd& a = products.a[t];
        double value = a.squaredNorm();
        if (form == XiForm::cross_products) {
            value += (a.array() * a.transpose().array()).sum();
        } else {
            const double c = c_hat.values[static_cast<Eigen::Index>(t)];
            value += c * c;
        }
        for (int k = 0; k < fpca.kappa; ++k) {
            value += (fpca.fourth_moments[k] - 3.0) * a(k, k) * a(k, k);
        }
        xi.values[static_cast<Eigen::Index>(t)] = std::max(value, kXiFloor);
    }
    return xi;
}

CovCurve variance_function(const FpcaResult& fpca, const CovCurve& c_hat, const std::vector<double>& h_grid,
                           int quad_points, XiForm form) {
    return variance_function(fpca, c_hat, lag_products(fpca, h_grid, quad_points), form);
}

Eigen::MatrixXd omega_hat(const FpcaResult& fpca, const CovCurve& c_hat, const LagProducts& products) {
    const auto lags = static_cast<Eigen::Index>(products.a.size());
    Eigen::MatrixXd omega(lags, lags);
    for (Eigen::Index s = 0; s < lags; ++s) {
        for (Eigen::Index t = 0; t <= s; ++t) {
            const auto& as = products.a[static_cast<std::size_t>(s)];
            const auto& at = products.a[static_cast<std::size_t>(t)];
            double value = (as.array() * at.array()).sum() + c_hat.values[s] * c_hat.values[t];
            for (int k = 0; k < fpca.kappa; ++k) {
                value += (fpca.fourth_moments[k] - 3.0) * as(k, k) * at(k, k);
            }
            omega(s, t) = value;
            omega(t, s) = value;
        }
    }
    return omega;
}

}  // namespace scbcov

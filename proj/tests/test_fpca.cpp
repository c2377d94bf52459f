#include "oracles.hpp"

#include "scbcov/errors.hpp"
#include "scbcov/fpca.hpp"
#include "scbcov/simharness.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace scbcov;

namespace {

Eigen::MatrixXd random_psd(int dim, int rank, std::mt19937_64& gen) {
    std::normal_distribution<double> normal;
    Eigen::MatrixXd a(dim, rank);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < rank; ++j) {
            a(i, j) = normal(gen);
        }
    }
    return a * a.transpose() / rank;
}

Eigen::VectorXd dense_operator_eigenvalues(const CovSurface& surface, int grid_size) {
    const Eigen::MatrixXd b = oracle::design(surface.basis.order(), surface.basis.interior_knots(), grid_size);
    return oracle::eigenvalues_desc(b * surface.beta * b.transpose() / grid_size);
}

FpcaResult single_component(double m4) {
    FpcaResult f;
    f.kappa = 1;
    f.lambda = Eigen::VectorXd::Ones(1);
    f.fourth_moments = Eigen::VectorXd::Constant(1, m4);
    return f;
}

}  // namespace

TEST_CASE("eigenvalues agree with the discretized operator") {
    std::mt19937_64 gen(99);
    const int combos[][3] = {{4, 3, 50}, {4, 7, 200}, {3, 5, 40}, {2, 10, 30}, {5, 2, 25}};
    for (const auto& c : combos) {
        const auto basis = make_basis(c[0], c[1]);
        const auto design = design_matrix(basis, c[2]);
        for (int rank : {1, 3, basis.dimension()}) {
            const CovSurface surface{basis, random_psd(basis.dimension(), rank, gen)};
            const auto f = eigen_decompose(surface, design);
            const Eigen::VectorXd dense = dense_operator_eigenvalues(surface, c[2]);
            for (Eigen::Index k = 0; k < f.lambda.size(); ++k) {
                if (f.lambda[k] > 1e-8) {
                    CHECK(std::abs(f.lambda[k] - dense[k]) <= 1e-6 * dense[k]);
                }
                if (k > 0) {
                    CHECK(f.lambda[k] <= f.lambda[k - 1]);
                }
            }
        }
    }
}

TEST_CASE("flat spectrum construction") {
    const auto basis = make_basis(4, 4);
    const auto design = design_matrix(basis, 60);
    const Eigen::MatrixXd gram = design.matrix.transpose() * design.matrix;
    const CovSurface surface{basis, 0.7 * 60.0 * gram.inverse()};
    const auto f = eigen_decompose(surface, design);
    for (Eigen::Index k = 0; k < f.lambda.size(); ++k) {
        CHECK(f.lambda[k] == doctest::Approx(0.7).epsilon(1e-10));
    }
    const Eigen::VectorXd dense = dense_operator_eigenvalues(surface, 60);
    CHECK(dense[basis.dimension() - 1] == doctest::Approx(0.7).epsilon(1e-8));
}

TEST_CASE("eigenfunctions are orthonormal on the grid") {
    std::mt19937_64 gen(5);
    const auto basis = make_basis(4, 6);
    const auto design = design_matrix(basis, 80);
    const CovSurface surface{basis, random_psd(basis.dimension(), basis.dimension(), gen)};
    const auto f = eigen_decompose(surface, design);
    const Eigen::MatrixXd psi = design.matrix * f.psi_coeffs;
    const Eigen::MatrixXd inner = psi.transpose() * psi / 80.0;
    CHECK((inner - Eigen::MatrixXd::Identity(inner.rows(), inner.cols())).cwiseAbs().maxCoeff() < 1e-8);
    for (Eigen::Index k = 0; k < f.psi_coeffs.cols(); ++k) {
        CHECK(f.psi_coeffs.col(k)[0] > 0.0);
    }
}

TEST_CASE("zero surface") {
    const auto basis = make_basis(4, 3);
    const auto design = design_matrix(basis, 40);
    const auto f = eigen_decompose(CovSurface{basis, Eigen::MatrixXd::Zero(7, 7)}, design);
    CHECK(f.lambda.isZero());
    CHECK_THROWS_AS(select_kappa(f.lambda), NumericalError);
    CHECK_THROWS_AS(eigen_decompose(CovSurface{basis, Eigen::MatrixXd::Zero(5, 5)}, design), InvalidArgument);
}

TEST_CASE("select_kappa") {
    CHECK(select_kappa(Eigen::Vector3d(1.0, 0.0, 0.0)) == 1);
    CHECK(select_kappa(fourier_eigenvalues(50), 0.95) == 5);
    const Eigen::Vector4d some(2.0, 1.0, 0.5, 0.0);
    CHECK(select_kappa(some, 1.0) == 3);
    CHECK_THROWS_AS(select_kappa(some, 0.0), InvalidArgument);
    CHECK_THROWS_AS(select_kappa(some, 1.5), InvalidArgument);

    // Cumulative-sum oracle on the geometric tail with total 5/3.
    const auto lambda = fourier_eigenvalues(50);
    double running = 0.0;
    int kappa = 0;
    while (running < 0.95 * 5.0 / 3.0) {
        running += lambda[kappa++];
    }
    CHECK(kappa == 5);
}

TEST_CASE("scores of a single known component") {
    const int N = 100;
    const int n = 25;
    const auto basis = make_basis(4, 5);
    Eigen::VectorXd phi_coeffs(basis.dimension());
    phi_coeffs << 0.3, 1.2, -0.4, 0.8, 1.5, -0.9, 0.2, 0.6, -1.1;
    Eigen::VectorXd mean_coeffs = Eigen::VectorXd::LinSpaced(basis.dimension(), -1.0, 2.0);

    std::mt19937_64 gen(8);
    std::normal_distribution<double> normal;
    Eigen::VectorXd xi(n);
    for (auto& v : xi) {
        v = normal(gen);
    }
    xi.array() -= xi.mean();
    xi /= std::sqrt(xi.squaredNorm() / n);

    const auto grid = unit_grid(N);
    Eigen::MatrixXd y(n, N);
    for (int j = 0; j < N; ++j) {
        const double phi = basis.eval_spline(phi_coeffs, grid[j]);
        const double m = basis.eval_spline(mean_coeffs, grid[j]);
        y.col(j) = (m + xi.array() * phi).matrix();
    }
    const FunctionalDataset data(y);
    const auto fits = fit_trajectories(data, basis);
    FpcaResult f = run_fpca(data, fits, 0.95);
    CHECK(f.kappa == 1);
    const double sign = f.scores(0, 0) * xi[0] > 0.0 ? 1.0 : -1.0;
    CHECK((sign * f.scores.col(0) - xi).cwiseAbs().maxCoeff() < 1e-3);

    f.kappa = 3;
    f.lambda.head(3).setConstant(1.0);
    const auto more = fpc_scores(data, fits, f);
    CHECK(more.rightCols(2).cwiseAbs().maxCoeff() < 1e-6);

    Eigen::MatrixXd flat(4, N);
    flat.rowwise() = (fits.design.matrix * fits.mean_coeffs).transpose();
    f.kappa = 1;
    CHECK(fpc_scores(FunctionalDataset(flat), fits, f).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("leading scores have unit variance on simulated data") {
    SimConfig config;
    config.N = 200;
    config.seed = 31;
    int inside = 0;
    const int reps = 100;
    for (int r = 0; r < reps; ++r) {
        const auto sample = gen_fourier_data(config, static_cast<std::uint64_t>(r));
        const auto fits = fit_trajectories(sample.data, make_basis(4, knot_formula(200)));
        const auto f = run_fpca(sample.data, fits);
        const Eigen::VectorXd s = f.scores.col(0);
        const double mean = s.mean();
        const double var = (s.array() - mean).square().sum() / (s.size() - 1);
        inside += (var >= 0.8 && var <= 1.2) ? 1 : 0;
        CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(s.size())));
    }
    CHECK(inside >= 90);
}

TEST_CASE("lag products against direct integration") {
    std::mt19937_64 gen(13);
    const auto basis = make_basis(4, 4);
    const auto design = design_matrix(basis, 50);
    FpcaResult f = eigen_decompose(CovSurface{basis, random_psd(basis.dimension(), 4, gen)}, design);
    f.kappa = 3;
    const std::vector<double> h_grid = {0.0, 0.1, 0.34};
    const auto products = lag_products(f, h_grid, 2001);
    for (std::size_t t = 0; t < h_grid.size(); ++t) {
        const double h = h_grid[t];
        for (int k = 0; k < 3; ++k) {
            for (int kp = 0; kp < 3; ++kp) {
                auto integrand = [&](double x) {
                    const double a = oracle::basis_row(4, 4, x).dot(f.phi_coeffs.col(k));
                    const double b = oracle::basis_row(4, 4, std::min(x + h, 1.0)).dot(f.phi_coeffs.col(kp));
                    return a * b;
                };
                const double ref = oracle::simpson(integrand, 0.0, 1.0 - h, 600) / (1.0 - h);
                CHECK(products.a[t](k, kp) == doctest::Approx(ref).epsilon(1e-5).scale(1.0));
            }
        }
    }
    CHECK_THROWS_AS(lag_products(FpcaResult{}, h_grid), InvalidArgument);
}

TEST_CASE("variance function special cases") {
    const std::vector<double> h_grid = {0.0, 0.2, 0.4};
    LagProducts products{h_grid, {}};
    for (double a : {0.9, 0.5, -0.2}) {
        products.a.push_back(Eigen::MatrixXd::Constant(1, 1, a));
    }
    const CovCurve c_hat{h_grid, Eigen::Vector3d(1.1, 0.6, -0.3), CurveKind::c_hat};

    const auto gaussian = variance_function(single_component(3.0), c_hat, products, XiForm::c_hat_squared);
    for (int t = 0; t < 3; ++t) {
        const double a = products.a[t](0, 0);
        CHECK(gaussian.values[t] == doctest::Approx(a * a + c_hat.values[t] * c_hat.values[t]).epsilon(1e-14));
    }
    const auto heavy = variance_function(single_component(5.0), c_hat, products, XiForm::cross_products);
    for (int t = 0; t < 3; ++t) {
        const double a = products.a[t](0, 0);
        CHECK(heavy.values[t] == doctest::Approx(4.0 * a * a).epsilon(1e-14));
    }

    LagProducts zero = products;
    for (auto& a : zero.a) {
        a.setZero();
    }
    const auto only_c = variance_function(single_component(3.0), c_hat, zero);
    for (int t = 0; t < 3; ++t) {
        CHECK(only_c.values[t] == doctest::Approx(c_hat.values[t] * c_hat.values[t]).epsilon(1e-14));
    }
    const CovCurve flat{h_grid, Eigen::Vector3d::Zero(), CurveKind::c_hat};
    const auto floored = variance_function(single_component(3.0), flat, zero);
    CHECK(floored.values.isConstant(kXiFloor));

    const CovCurve other{{0.0, 0.1, 0.2}, Eigen::Vector3d::Zero(), CurveKind::c_hat};
    CHECK_THROWS_AS(variance_function(single_component(3.0), other, products), InvalidArgument);
    CHECK_THROWS_AS(parse_xi_form("plug_in"), InvalidArgument);
}

TEST_CASE("omega diagonal equals the plug-in variance function") {
    SimConfig config;
    config.seed = 2;
    const auto sample = gen_fourier_data(config, 0);
    const auto fits = fit_trajectories(sample.data, make_basis(4, 3));
    const auto f = run_fpca(sample.data, fits);
    const auto h_grid = default_h_grid(50);
    const auto c_hat = covariance_curve(fits, h_grid);
    const auto products = lag_products(f, h_grid);
    const auto xi = variance_function(f, c_hat, products, XiForm::c_hat_squared);
    const Eigen::MatrixXd omega = omega_hat(f, c_hat, products);
    CHECK(omega.isApprox(omega.transpose(), 0.0));
    for (Eigen::Index t = 0; t < omega.rows(); ++t) {
        CHECK(omega(t, t) == doctest::Approx(xi.values[t]).epsilon(1e-12));
    }
}

TEST_CASE("plug-in variance at lag zero tracks the truncated series") {
    // Gaussian scores: Xi(0) = sum_kk' A_kk'(0)^2 + sum_kk' A_kk'(0) A_k'k(0), with A_kk'(0) = <phi_k, phi_k'>.
    const auto lambda = fourier_eigenvalues(50);
    Eigen::MatrixXd a0(50, 50);
    for (int k = 0; k < 50; ++k) {
        for (int kp = 0; kp <= k; ++kp) {
            auto f = [&](double x) { return fourier_basis(k + 1, x) * fourier_basis(kp + 1, x); };
            const double v = std::sqrt(lambda[k] * lambda[kp]) * oracle::simpson(f, 0.0, 1.0, 400);
            a0(k, kp) = v;
            a0(kp, k) = v;
        }
    }
    const double truth = a0.squaredNorm() + (a0.array() * a0.transpose().array()).sum();
    CHECK(truth == doctest::Approx(2.0 * (1.0 + 2.0 / 15.0)).epsilon(1e-6));

    SimConfig config;
    config.N = 200;
    config.seed = 404;
    double total = 0.0;
    const int reps = 100;
    for (int r = 0; r < reps; ++r) {
        const auto sample = gen_fourier_data(config, static_cast<std::uint64_t>(r));
        const auto fits = fit_trajectories(sample.data, make_basis(4, knot_formula(200)));
        const auto f = run_fpca(sample.data, fits);
        const std::vector<double> zero_lag = {0.0};
        const auto c_hat = covariance_curve(fits, zero_lag);
        total += variance_function(f, c_hat, zero_lag, 0, XiForm::cross_products).values[0];
    }
    CHECK(std::abs(total / reps - truth) <= 0.15 * truth);
}

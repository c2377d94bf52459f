#include "oracles.hpp"

#include "scbcov/bspline.hpp"
#include "scbcov/errors.hpp"
#include "scbcov/simharness.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace scbcov;

TEST_CASE("make_basis knot layout") {
    const auto b = make_basis(4, 3);
    const std::vector<double> expected = {0, 0, 0, 0, 0.25, 0.5, 0.75, 1, 1, 1, 1};
    CHECK(b.knots() == expected);
    CHECK(b.dimension() == 7);

    const auto constant = make_basis(1, 0);
    CHECK(constant.knots() == std::vector<double>{0, 1});
    CHECK(constant.dimension() == 1);

    const auto wide = make_basis(4, 10);
    CHECK(wide.dimension() == 14);
    for (int l = 4; l < 14; ++l) {
        CHECK(std::abs(wide.knots()[l + 1] - wide.knots()[l] - 1.0 / 11.0) < 1e-14);
    }
}

TEST_CASE("make_basis rejects bad arguments") {
    CHECK_THROWS_AS(make_basis(0, 3), InvalidArgument);
    CHECK_THROWS_AS(make_basis(4, -1), InvalidArgument);
    CHECK_THROWS_AS(make_basis(4, 3).eval(1.5), InvalidArgument);
    CHECK_THROWS_AS(make_basis(4, 3).eval(-0.1), InvalidArgument);
}

TEST_CASE("eval_basis on a piecewise constant basis") {
    const auto v = eval_basis(make_basis(1, 1), 0.3);
    CHECK(v.size() == 2);
    CHECK(v[0] == 1.0);
    CHECK(v[1] == 0.0);
    const auto right = eval_basis(make_basis(1, 1), 1.0);
    CHECK(right[1] == 1.0);
}

TEST_CASE("eval_basis matches the recursive definition") {
    const auto at_half = eval_basis(make_basis(4, 3), 0.5);
    const auto ref = oracle::basis_row(4, 3, 0.5);
    for (int i = 0; i < 7; ++i) {
        CHECK(at_half[i] == doctest::Approx(ref[i]).epsilon(1e-14));
    }

    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int order : {1, 2, 3, 4, 5, 6}) {
        for (int interior : {0, 1, 3, 7, 12}) {
            const auto basis = make_basis(order, interior);
            for (int trial = 0; trial < 40; ++trial) {
                const double x = trial == 0 ? 0.0 : trial == 1 ? 1.0 : unif(gen);
                const Eigen::VectorXd got = basis.eval(x);
                const Eigen::VectorXd want = oracle::basis_row(order, interior, x);
                CHECK((got - want).cwiseAbs().maxCoeff() < 1e-13);
            }
        }
    }
}

TEST_CASE("partition of unity, positivity and local support") {
    for (int order : {1, 2, 4, 6}) {
        for (int interior : {0, 2, 9}) {
            const auto basis = make_basis(order, interior);
            for (int i = 0; i <= 1000; ++i) {
                const Eigen::VectorXd v = basis.eval(i / 1000.0);
                CHECK(std::abs(v.sum() - 1.0) < 1e-12);
                CHECK(v.minCoeff() >= 0.0);
                CHECK((v.array() != 0.0).count() <= order);
            }
        }
    }
}

TEST_CASE("design_matrix shape and rows") {
    const auto ones = design_matrix(make_basis(1, 0), 5);
    CHECK(ones.rows() == 5);
    CHECK(ones.cols() == 1);
    CHECK(ones.matrix.isOnes());

    const auto d = design_matrix(make_basis(4, 5), 200);
    for (int j = 0; j < d.rows(); ++j) {
        CHECK(std::abs(d.matrix.row(j).sum() - 1.0) < 1e-12);
    }
    CHECK((d.matrix - oracle::design(4, 5, 200)).cwiseAbs().maxCoeff() < 1e-13);

    CHECK_THROWS_AS(design_matrix(make_basis(4, 5), 8), DataError);
}

TEST_CASE("Gram matrix spectrum scales like 1/J") {
    const int interior = 5;
    const auto d = design_matrix(make_basis(4, interior), 200);
    const Eigen::MatrixXd gram = d.matrix.transpose() * d.matrix / 200.0;
    const Eigen::VectorXd ev = oracle::eigenvalues_desc(gram);
    CHECK(gram.rowwise().sum().maxCoeff() <= 1.0 + 1e-12);
    const double smallest = ev[ev.size() - 1] * (interior + 1);
    CHECK(smallest > 0.01);
    CHECK(smallest < 1.0);
}

TEST_CASE("least squares reproduces polynomials and constants") {
    for (int order : {1, 2, 3, 4, 5}) {
        const auto d = design_matrix(make_basis(order, 4), 60);
        Eigen::VectorXd y(60);
        for (int j = 0; j < 60; ++j) {
            const double x = d.grid[j];
            double v = 0.0;
            for (int k = 0; k < order; ++k) {
                v += (k % 2 == 0 ? 1.5 : -2.0) * std::pow(x, k);
            }
            y[j] = v;
        }
        const Eigen::VectorXd fitted = d.matrix * lsq_fit(d, y);
        CHECK((fitted - y).norm() / y.norm() < 1e-8);

        const Eigen::VectorXd c = Eigen::VectorXd::Constant(60, 3.25);
        CHECK((d.matrix * lsq_fit(d, c) - c).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("least squares matches the pseudo-inverse") {
    std::mt19937_64 gen(11);
    std::normal_distribution<double> normal;
    const Eigen::MatrixXd b = oracle::design(4, 3, 50);
    Eigen::VectorXd y(50);
    for (auto& v : y) {
        v = normal(gen);
    }
    const Eigen::MatrixXd pinv = b.completeOrthogonalDecomposition().pseudoInverse();
    const Eigen::VectorXd want = pinv * y;
    const Eigen::VectorXd got = lsq_fit(design_matrix(make_basis(4, 3), 50), y);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("ill-conditioned designs fall back to QR") {
    // A nearly vanishing column pushes the Gram condition past the Cholesky threshold.
    auto d = design_matrix(make_basis(4, 5), 60);
    d.matrix.col(0) *= 1e-6;
    const LeastSquaresSolver solver(d);
    CHECK(solver.gram_condition() > 1e10);
    CHECK(solver.uses_qr());
    CHECK(!LeastSquaresSolver(design_matrix(make_basis(4, 5), 60)).uses_qr());
    Eigen::VectorXd y(60);
    for (int j = 0; j < 60; ++j) {
        y[j] = std::sin(6.0 * d.grid[j]) + 0.1 * std::cos(40.0 * d.grid[j]);
    }
    const Eigen::VectorXd want = d.matrix.completeOrthogonalDecomposition().solve(y);
    CHECK((d.matrix * solver.solve(y) - d.matrix * want).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("rank deficient designs raise NumericalError") {
    // Piecewise constants with an empty first span: no grid point lies in [0, 1/4).
    CHECK_THROWS_AS(LeastSquaresSolver(design_matrix(make_basis(1, 3), 4)), NumericalError);
}

TEST_CASE("gcv score") {
    const auto d = design_matrix(make_basis(4, 3), 40);
    Eigen::MatrixXd cubic(1, 40);
    for (int j = 0; j < 40; ++j) {
        const double x = d.grid[j];
        cubic(0, j) = 1.0 - 2.0 * x + 0.5 * x * x * x;
    }
    CHECK(gcv_score(d, cubic) < 1e-20);

    std::mt19937_64 gen(3);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd ys(6, 40);
    for (int i = 0; i < ys.rows(); ++i) {
        for (int j = 0; j < 40; ++j) {
            ys(i, j) = normal(gen);
        }
    }
    Eigen::MatrixXd permuted = ys;
    permuted.row(0).swap(permuted.row(5));
    permuted.row(1).swap(permuted.row(3));
    CHECK(gcv_score(d, ys) == doctest::Approx(gcv_score(d, permuted)).epsilon(1e-12));
    CHECK_THROWS_AS(gcv_score(design_matrix(make_basis(4, 6), 10), ys.leftCols(10)), InvalidArgument);
}

TEST_CASE("knot formula") {
    CHECK(knot_formula(50) == 3);
    const double raw200 = 0.8 * std::pow(200.0, 0.375) * std::pow(std::log(std::log(200.0)), 0.375);
    CHECK(knot_formula(200) == static_cast<int>(std::floor(raw200)));
    CHECK(knot_formula(20) == 2);
    CHECK_THROWS_AS(knot_formula(50, -1.0), InvalidArgument);
    CHECK_THROWS_AS(knot_formula(50, 0.8, 1.5), InvalidArgument);
    CHECK_THROWS_AS(knot_formula(2), DataError);
    CHECK_THROWS_AS(parse_knot_method("aic"), InvalidArgument);
    CHECK(parse_knot_method("bic") == KnotMethod::bic);
}

TEST_CASE("knot candidates follow min(10, n/4)") {
    CHECK(knot_candidates(12, 100, 4) == std::vector<int>{1, 2, 3});
    CHECK(knot_candidates(80, 100, 4).size() == 10);
    CHECK(knot_candidates(80, 8, 4) == std::vector<int>{1, 2, 3});
    CHECK(knot_candidates(3, 100, 4).empty());
}

TEST_CASE("gcv and bic select within the candidate pool") {
    SimConfig config;
    config.N = 100;
    config.seed = 5;
    int near = 0;
    const int formula = knot_formula(100);
    const int trials = 20;
    for (int r = 0; r < trials; ++r) {
        const auto sample = gen_fourier_data(config, static_cast<std::uint64_t>(r));
        const auto& y = sample.data.observations();
        const int gcv = select_knots(y, 4, KnotSelection{KnotMethod::gcv});
        const int bic = select_knots(y, 4, KnotSelection{KnotMethod::bic});
        CHECK(gcv >= 1);
        CHECK(gcv <= 10);
        CHECK(bic >= 1);
        CHECK(bic <= 10);
        // Selection runs at or slightly above the formula count.
        CHECK(gcv >= formula);
        near += gcv - formula <= 5 ? 1 : 0;
    }
    CHECK(near >= trials * 8 / 10);

    const Eigen::MatrixXd tiny = Eigen::MatrixXd::Random(3, 30);
    CHECK_THROWS_AS(select_knots(tiny, 4, KnotSelection{KnotMethod::gcv}), DataError);
}

#include "oracles.hpp"

#include "scbcov/covmodels.hpp"
#include "scbcov/errors.hpp"

#include <boost/math/special_functions/bessel.hpp>
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <string>

using namespace scbcov;

namespace {

// K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt, truncated where the integrand is negligible.
double bessel_k_integral(double nu, double x) {
    const double upper = std::acosh(1.0 + 750.0 / x);
    auto f = [nu, x](double t) { return std::exp(-x * std::cosh(t) + nu * t) * 0.5 * (1.0 + std::exp(-2.0 * nu * t)); };
    return oracle::simpson(f, 0.0, std::min(upper, 40.0), 20000);
}

double bisect(double lo, double hi, auto f) {
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(lo) * f(mid) <= 0.0 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("model values at simple lags") {
    const auto m1 = parse_model_spec("spherical:sill=2,range=1");
    CHECK(eval_model(m1, 0.0) == 2.0);
    CHECK(eval_model(m1, 1.0) == 0.0);
    CHECK(eval_model(m1, 2.5) == 0.0);
    CHECK(eval_model(m1, 0.5) == doctest::Approx(2.0 * (1.0 - 0.75 + 0.0625)));

    const auto m3 = parse_model_spec("gaussian:sill=2,range=3");
    CHECK(eval_model(m3, 3.0) == doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-15));
    CHECK(eval_model(m3, 3.0) == doctest::Approx(0.73576).epsilon(1e-5));

    const auto m2 = parse_model_spec("matern:sill=2,range=1,nu=3");
    CHECK(eval_model(m2, 0.0) == 2.0);
    const double u = 2.0 * std::sqrt(3.0) * 0.5;
    const double ref = 2.0 / std::tgamma(3.0) * std::pow(2.0, -2.0) * std::pow(u, 3.0) * bessel_k_integral(3.0, u);
    CHECK(eval_model(m2, 0.5) == doctest::Approx(ref).epsilon(1e-10));
}

TEST_CASE("sill at lag zero and correlation bounds") {
    const char* specs[] = {"spherical:sill=2,range=1", "matern:sill=2,range=1,nu=3", "gaussian:sill=2,range=3",
                           "matern:sill=3.5,range=0.4,nu=0.7"};
    for (const char* text : specs) {
        const auto m = parse_model_spec(text);
        CHECK(eval_model(m, 0.0) == m.sill);
        const double s = effective_range(m);
        double prev = 1.0;
        for (int i = 0; i <= 200; ++i) {
            const double rho = correlation(m, s * i / 200.0);
            CHECK(rho >= 0.0);
            CHECK(rho <= 1.0);
            CHECK(rho <= prev + 1e-15);
            prev = rho;
        }
    }
}

TEST_CASE("spherical continuity at the range") {
    const auto m = parse_model_spec("spherical:sill=2,range=1.7");
    CHECK(std::abs(eval_model(m, 1.7 - 1e-9)) < 1e-12);
    CHECK(eval_model(m, 1.7) == 0.0);
}

TEST_CASE("Matern with nu = 1/2 is exponential") {
    const auto m = parse_model_spec("matern:sill=1.5,range=0.8,nu=0.5");
    for (double h : {1e-4, 0.01, 0.3, 1.0, 2.5, 7.0}) {
        const double u = 2.0 * std::sqrt(0.5) * h / 0.8;
        CHECK(std::abs(eval_model(m, h) - 1.5 * std::exp(-u)) <= 1e-9 * 1.5);
    }
}

TEST_CASE("Bessel K against closed forms, Boost and the integral representation") {
    CHECK(bessel_k(0.5, 1.0) == doctest::Approx(std::sqrt(std::numbers::pi / 2.0) * std::exp(-1.0)).epsilon(1e-14));
    CHECK(bessel_k(0.5, 1.0) == doctest::Approx(0.4610685).epsilon(1e-7));
    for (double x : {1e-6, 1e-3, 0.1, 0.5, 1.0, 1.9, 2.1, 5.0, 12.0, 30.0, 50.0}) {
        for (double nu : {0.0, 0.2, 0.5, 1.0, 1.2, 1.5, 2.0, 2.5, 3.0, 4.7, 7.3, 10.0}) {
            const double ref = boost::math::cyl_bessel_k(nu, x);
            CHECK(std::abs(bessel_k(nu, x) - ref) <= 1e-10 * ref);
        }
        const double half = std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x);
        CHECK(std::abs(bessel_k(1.5, x) - half * (1.0 + 1.0 / x)) <= 1e-10 * half * (1.0 + 1.0 / x));
    }
    for (double x : {0.1, 1.0, 10.0}) {
        const double ref = bessel_k_integral(3.0, x);
        CHECK(std::abs(bessel_k(3.0, x) - ref) <= 1e-9 * ref);
        // Recurrence from K_1 and K_2 against direct evaluation.
        const double k3 = bessel_k(1.0, x) + 4.0 / x * bessel_k(2.0, x);
        CHECK(std::abs(bessel_k(3.0, x) - k3) <= 1e-9 * k3);
    }
    for (double nu : {0.3, 1.0, 2.5, 6.0}) {
        CHECK(bessel_k(nu, 2.0) < bessel_k(nu, 1.0));
    }
    CHECK_THROWS_AS(bessel_k(1.0, 0.0), InvalidArgument);
    CHECK_THROWS_AS(bessel_k(1.0, -2.0), InvalidArgument);
}

TEST_CASE("effective ranges") {
    const auto m3 = parse_model_spec("gaussian:sill=2,range=3");
    CHECK(std::abs(effective_range(m3) - 3.0 * std::sqrt(std::log(20.0))) < 1e-8);
    CHECK(effective_range(m3) == doctest::Approx(5.1925).epsilon(1e-4));

    const auto m1 = parse_model_spec("spherical:sill=2,range=1");
    const double cubic = bisect(0.0, 1.0, [](double u) { return u * u * u - 3.0 * u + 1.9; });
    CHECK(std::abs(effective_range(m1) - cubic) < 1e-8);
    CHECK(effective_range(m1) == doctest::Approx(0.8114).epsilon(1e-4));

    const auto m2 = parse_model_spec("matern:sill=2,range=1,nu=3");
    const double s2 = effective_range(m2);
    CHECK(std::abs(correlation(m2, s2) - 0.05) < 1e-8);

    CHECK(effective_range(m3, 1.0) == 0.0);
    CHECK_THROWS_AS(effective_range(m3, 0.0), InvalidArgument);
    CHECK_THROWS_AS(effective_range(m3, 1.5), InvalidArgument);
}

TEST_CASE("model spec parsing") {
    const auto m = parse_model_spec("matern:sill=2,range=1,nu=3");
    CHECK(m.family == ModelFamily::matern);
    CHECK(m.smoothness.value() == 3.0);
    CHECK(m.to_string() == "matern:sill=2,range=1,nu=3");
    CHECK(parse_model_spec(m.to_string()).to_string() == m.to_string());
    CHECK(parse_model_spec(" gaussian : sill = 2 , range = 3 ").range == 3.0);

    auto message = [](const std::string& text) {
        try {
            parse_model_spec(text);
        } catch (const InvalidArgument& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(message("spherical:sill=2,rnge=1").find("rnge") != std::string::npos);
    CHECK(message("cubic:sill=2,range=1").find("cubic") != std::string::npos);
    CHECK(message("gaussian:sill=two,range=1").find("two") != std::string::npos);
    CHECK(message("gaussian:sill=2").find("range") != std::string::npos);
    CHECK(message("gaussian:sill=-2,range=1").find("sill") != std::string::npos);
    CHECK(message("matern:sill=2,range=1").find("nu") != std::string::npos);
    CHECK(message("spherical:sill=2,range=1,nu=3").find("nu") != std::string::npos);
    CHECK(message("gaussian").find("gaussian") != std::string::npos);
    CHECK(!message("gaussian:sill=2,range=1,range=2").empty());
}

TEST_CASE("covariance matrices are positive semidefinite before jitter") {
    std::vector<double> grid(50);
    for (int j = 0; j < 50; ++j) {
        grid[j] = 2.0 * j / 49.0;
    }
    for (const char* text : {"spherical:sill=2,range=1", "matern:sill=2,range=1,nu=3", "gaussian:sill=2,range=3"}) {
        const auto m = parse_model_spec(text);
        const Eigen::MatrixXd sigma = model_covariance_matrix(m, grid);
        CHECK(oracle::eigenvalues_desc(sigma).minCoeff() >= -1e-8 * m.sill);
    }
}

TEST_CASE("Gaussian process samples") {
    const auto m3 = parse_model_spec("gaussian:sill=2,range=3");
    std::vector<double> grid(10);
    for (int j = 0; j < 10; ++j) {
        grid[j] = 0.5 * (j + 1);
    }
    const int n = 10000;
    const Eigen::MatrixXd z = sample_gp(m3, grid, n, 7);
    CHECK(z.rows() == n);
    const Eigen::MatrixXd cov = z.transpose() * z / n;
    const Eigen::MatrixXd sigma = model_covariance_matrix(m3, grid);
    for (int j = 0; j < 10; ++j) {
        for (int jp = 0; jp < 10; ++jp) {
            CHECK(std::abs(cov(j, jp) - sigma(j, jp)) <= 0.05 * 2.0);
        }
    }
    const Eigen::MatrixXd one = sample_gp(m3, {1.0}, n, 8);
    CHECK(std::abs(one.squaredNorm() / n - 2.0) <= 0.05 * 2.0);

    CHECK(sample_gp(m3, grid, 30, 99, 4) == sample_gp(m3, grid, 30, 99, 4));
    CHECK(sample_gp(m3, grid, 30, 99, 4) != sample_gp(m3, grid, 30, 99, 5));
    CHECK(sample_gp(m3, grid, 30, 99, 4).topRows(20) == sample_gp(m3, grid, 20, 99, 4));

    // Smooth models on fine grids need the jitter to factor at all.
    std::vector<double> fine(200);
    for (int j = 0; j < 200; ++j) {
        fine[j] = 5.0 * (j + 1) / 200.0;
    }
    CHECK(sample_gp(m3, fine, 3, 1).allFinite());
    CHECK_THROWS_AS(sample_gp(m3, {0.2, 0.1}, 3, 1), InvalidArgument);
    CHECK_THROWS_AS(sample_gp(m3, grid, 0, 1), InvalidArgument);
}

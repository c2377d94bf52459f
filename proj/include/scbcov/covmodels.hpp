#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace scbcov {

enum class ModelFamily { spherical, matern, gaussian };

std::string to_string(ModelFamily family);

/// Parametric stationary covariance: sill sigma^2, range theta and, for
/// Matern only, smoothness nu.
struct CovModelSpec {
    ModelFamily family = ModelFamily::gaussian;
    double sill = 1.0;
    double range = 1.0;
    std::optional<double> smoothness;

    /// Throws InvalidArgument unless all parameters are positive and nu is
    /// present exactly for the Matern family.
    void validate() const;
    /// Canonical text form, e.g. "matern:sill=2,range=1,nu=3".
    std::string to_string() const;
};

/// Parses "spherical:sill=2,range=1", "matern:sill=2,range=1,nu=3" or
/// "gaussian:sill=2,range=3". Errors name the offending token.
CovModelSpec parse_model_spec(std::string_view text);

/// Covariance at lag h >= 0 (model units). The Matern model returns the
/// sill at h = 0 by continuity.
double eval_model(const CovModelSpec& spec, double h);

/// rho(h) = C(h) / C(0).
double correlation(const CovModelSpec& spec, double h);

/// Modified Bessel function of the second kind K_nu(x) for nu >= 0, x > 0.
double bessel_k(double nu, double x);

/// Lag s with rho(s) = rho0, found by bisection. rho0 = 1 gives s = 0.
double effective_range(const CovModelSpec& spec, double rho0 = 0.05);

/// Draws n zero-mean Gaussian-process paths on `grid` (model units).
/// Subject i uses the substream (seed, gp, stream, i). Jitter of
/// 1e-10 C(0) is added when the Cholesky factorization fails and grown
/// tenfold up to three times.
Eigen::MatrixXd sample_gp(const CovModelSpec& spec, const std::vector<double>& grid, int n, std::uint64_t seed,
                          std::uint64_t stream = 0);

/// Covariance matrix C(|x_j - x_j'|) on `grid`.
Eigen::MatrixXd model_covariance_matrix(const CovModelSpec& spec, const std::vector<double>& grid);

}  // namespace scbcov

#pragma once

#include "scbcov/covest.hpp"
#include "scbcov/covmodels.hpp"
#include "scbcov/fpca.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace scbcov {

/// Default number of simulated copies of the limiting process.
inline constexpr int kDefaultZetaReps = 1000;

/// How the off-diagonal multipliers e_kk' are drawn.
///  - independent: a separate draw for every ordered pair k != k'.
///    Var zeta(h) = sum_{k!=k'} A_kk'^2 + sum_k (m4_k - 1) A_kk^2.
///  - symmetric: e_k'k = e_kk', so
///    Var zeta(h) = sum_{k<k'} (A_kk' + A_k'k)^2 + sum_k (m4_k - 1) A_kk^2,
///    which is the variance of the limiting process.
enum class ZetaCoupling { independent, symmetric };

ZetaCoupling parse_zeta_coupling(std::string_view name);
std::string to_string(ZetaCoupling coupling);

/// Gaussian multiplier copies of the limiting process on the lag grid,
/// one row per replicate:
///   zeta(h) = sum_{k!=k'} e_kk' A_kk'(h) + sum_k e_k A_kk(h) sqrt(m4_k - 1).
/// Replicate r draws the off-diagonal multipliers first (k-major), then the
/// diagonal ones, from the substream (seed, zeta, r); `workers` only changes
/// scheduling, never the result.
Eigen::MatrixXd simulate_zeta(const FpcaResult& fpca, const LagProducts& products, int reps, std::uint64_t seed,
                              int workers = 1, ZetaCoupling coupling = ZetaCoupling::independent);
Eigen::MatrixXd simulate_zeta(const FpcaResult& fpca, const std::vector<double>& h_grid, int reps,
                              std::uint64_t seed, int quad_points = 0, int workers = 1,
                              ZetaCoupling coupling = ZetaCoupling::independent);

/// Closed-form variance of the simulated process at every lag.
Eigen::VectorXd zeta_variance(const FpcaResult& fpca, const LagProducts& products,
                              ZetaCoupling coupling = ZetaCoupling::independent);

/// True where the variance function was floored; such lags are left out of sups.
std::vector<bool> floored_lags(const CovCurve& xi);

/// M_r = max_h |zeta_r(h)| / sqrt(Xi(h)) over lags that were not floored.
Eigen::VectorXd sup_statistics(const Eigen::Ref<const Eigen::MatrixXd>& zeta, const CovCurve& xi);

/// Empirical (1 - alpha) quantile: order statistic ceil((1 - alpha) R) of the sups.
double critical_value_from_sups(const Eigen::Ref<const Eigen::VectorXd>& sups, double alpha);
double critical_value(const Eigen::Ref<const Eigen::MatrixXd>& zeta, const CovCurve& xi, double alpha);

enum class BandKind { simultaneous, pointwise };

std::string to_string(BandKind kind);

struct BandResult {
    double level = 0.95;  // 1 - alpha
    double q = 0.0;
    CovCurve lower;
    CovCurve center;
    CovCurve upper;
    int n = 0;
    BandKind kind = BandKind::simultaneous;

    Eigen::VectorXd half_width() const { return upper.values - center.values; }
    double mean_width() const { return 2.0 * half_width().mean(); }
    /// True if `curve` lies inside the band at every lag, up to `slack`.
    bool contains(const Eigen::Ref<const Eigen::VectorXd>& curve, double slack = 0.0) const;
};

/// C(h) +/- n^{-1/2} q Xi(h)^{1/2}.
BandResult scb(const CovCurve& c_hat, const CovCurve& xi, double q, int n, double level);

/// As scb with the normal quantile z_{1-alpha/2}.
BandResult pointwise_band(const CovCurve& c_hat, const CovCurve& xi, double alpha, int n);

/// Lower and upper envelope surfaces L(|x-x'|), U(|x-x'|) induced by a band.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> sce_surface(const BandResult& band, const std::vector<double>& xs);

struct GofDecision {
    double alpha;
    bool reject;
};

struct GofResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::vector<GofDecision> decisions;
    std::vector<double> null_curve;   // C0 on the lag grid
    std::vector<double> lags_original;  // lag grid in the model's units
    int excluded_lags = 0;
    std::string model;
};

/// Conventional levels reported by gof_test.
inline const std::vector<double> kGofLevels = {0.2, 0.1, 0.05, 0.01};

/// Sup-norm test of H0: C = C0. The model is evaluated at h * lag_scale
/// (unit-scale lags mapped to the model's units). The p-value uses the add-one
/// rule (1 + #{M_r >= T}) / (R + 1).
GofResult gof_test(const CovCurve& c_hat, const CovCurve& xi, int n, const CovModelSpec& model,
                   const Eigen::Ref<const Eigen::VectorXd>& sups, double lag_scale = 1.0);
GofResult gof_test_from_zeta(const CovCurve& c_hat, const CovCurve& xi, int n, const CovModelSpec& model,
                             const Eigen::Ref<const Eigen::MatrixXd>& zeta, double lag_scale = 1.0);

}  // namespace scbcov

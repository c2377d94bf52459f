#pragma once

#include "scbcov/band.hpp"
#include "scbcov/bspline.hpp"
#include "scbcov/covest.hpp"
#include "scbcov/fpca.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace scbcov {

struct PipelineOptions {
    int order = 4;
    KnotSelection knots;
    /// Fixes J instead of running the knot selection rule.
    std::optional<int> interior_knots;
    double h0 = 0.5;
    int quad_points = 0;  // 0: N nodes
    double fve = 0.95;
    int zeta_reps = kDefaultZetaReps;
    std::uint64_t seed = 1;
    std::vector<double> alphas = {0.05};
    XiForm xi_form = XiForm::c_hat_squared;
    ZetaCoupling coupling = ZetaCoupling::independent;
    int workers = 1;
};

/// Everything produced on the way from raw curves to bands.
struct PipelineResult {
    int interior_knots = 0;
    TrajectoryFits fits;
    CovSurface surface;
    CovCurve c_hat;
    FpcaResult fpca;
    LagProducts products;
    CovCurve xi;
    Eigen::MatrixXd zeta;
    Eigen::VectorXd sups;
    std::vector<BandResult> simultaneous;  // one per alpha, same order
    std::vector<BandResult> pointwise;
    /// Set when the residual surface vanishes; bands then collapse onto C_hat.
    bool degenerate = false;
};

/// knots -> fits -> C_hat -> FPCA -> Xi -> simulated sups -> bands.
/// Errors are rethrown with the name of the failing stage prefixed.
PipelineResult run_pipeline(const FunctionalDataset& data, const PipelineOptions& options);

}  // namespace scbcov

#include "scbcov/pipeline.hpp"

#include "scbcov/errors.hpp"

#include <string>

namespace scbcov {

namespace {

template <typename F>
auto stage(const char* name, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const InvalidArgument& e) {
        throw InvalidArgument(std::string(name) + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(std::string(name) + ": " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(std::string(name) + ": " + e.what());
    }
}

}  // namespace

PipelineResult run_pipeline(const FunctionalDataset& data, const PipelineOptions& options) {
    PipelineResult out;
    out.interior_knots = stage("knot selection", [&] {
        return options.interior_knots ? *options.interior_knots
                                      : select_knots(data.observations(), options.order, options.knots);
    });
    out.fits = stage("trajectory fit", [&] {
        return fit_trajectories(data, make_basis(options.order, out.interior_knots));
    });
    const int quad = options.quad_points == 0 ? data.grid_size() : options.quad_points;
    const auto h_grid = stage("lag grid", [&] { return default_h_grid(data.grid_size(), options.h0); });
    out.surface = covariance_surface(out.fits);
    out.c_hat = stage("covariance curve", [&] { return covariance_curve(out.surface, h_grid, quad); });

    const double scale = 1.0 + data.observations().squaredNorm() / static_cast<double>(data.observations().size());
    out.degenerate = out.surface.beta.trace() <= 1e-24 * scale;
    if (out.degenerate) {
        out.xi = CovCurve{h_grid, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(h_grid.size()), kXiFloor),
                          CurveKind::xi_hat};
        for (double alpha : options.alphas) {
            out.simultaneous.push_back(stage("band", [&] { return scb(out.c_hat, out.xi, 0.0, data.subjects(), 1.0 - alpha); }));
            out.pointwise.push_back(stage("band", [&] { return pointwise_band(out.c_hat, out.xi, alpha, data.subjects()); }));
        }
        return out;
    }

    out.fpca = stage("fpca", [&] { return run_fpca(data, out.fits, options.fve); });
    out.products = stage("variance function", [&] { return lag_products(out.fpca, h_grid, quad); });
    out.xi = stage("variance function", [&] { return variance_function(out.fpca, out.c_hat, out.products, options.xi_form); });
    out.zeta = stage("simulation", [&] {
        return simulate_zeta(out.fpca, out.products, options.zeta_reps, options.seed, options.workers,
                             options.coupling);
    });
    out.sups = sup_statistics(out.zeta, out.xi);
    for (double alpha : options.alphas) {
        out.simultaneous.push_back(stage("band", [&] {
            return scb(out.c_hat, out.xi, critical_value_from_sups(out.sups, alpha), data.subjects(), 1.0 - alpha);
        }));
        out.pointwise.push_back(stage("band", [&] { return pointwise_band(out.c_hat, out.xi, alpha, data.subjects()); }));
    }
    return out;
}

}  // namespace scbcov

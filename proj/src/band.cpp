#include "scbcov/band.hpp"

#include "scbcov/errors.hpp"
#include "scbcov/normal.hpp"
#include "scbcov/rng.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include <fmt/format.h>

namespace scbcov {

namespace {

// Rows: lags. Columns: the off-diagonal terms (ordered pairs k != k' when
// independent, k < k' when symmetric), then one per diagonal term.
Eigen::MatrixXd zeta_loadings(const FpcaResult& fpca, const LagProducts& products, ZetaCoupling coupling) {
    const int kappa = fpca.kappa;
    const bool symmetric = coupling == ZetaCoupling::symmetric;
    const int pairs = symmetric ? kappa * (kappa - 1) / 2 : kappa * (kappa - 1);
    Eigen::MatrixXd load(static_cast<Eigen::Index>(products.a.size()), pairs + kappa);
    for (std::size_t t = 0; t < products.a.size(); ++t) {
        const auto& a = products.a[t];
        const auto row = static_cast<Eigen::Index>(t);
        int col = 0;
        for (int k = 0; k < kappa; ++k) {
            for (int kp = symmetric ? k + 1 : 0; kp < kappa; ++kp) {
                if (symmetric) {
                    load(row, col++) = a(k, kp) + a(kp, k);
                } else if (kp != k) {
                    load(row, col++) = a(k, kp);
                }
            }
        }
        for (int k = 0; k < kappa; ++k) {
            load(row, col++) = a(k, k) * std::sqrt(std::max(fpca.fourth_moments[k] - 1.0, 0.0));
        }
    }
    return load;
}

}  // namespace

ZetaCoupling parse_zeta_coupling(std::string_view name) {
    if (name == "independent") {
        return ZetaCoupling::independent;
    }
    if (name == "symmetric") {
        return ZetaCoupling::symmetric;
    }
    throw InvalidArgument(fmt::format("unknown coupling '{}' (expected independent or symmetric)", name));
}

std::string to_string(ZetaCoupling coupling) {
    return coupling == ZetaCoupling::independent ? "independent" : "symmetric";
}

Eigen::MatrixXd simulate_zeta(const FpcaResult& fpca, const LagProducts& products, int reps, std::uint64_t seed,
                              int workers, ZetaCoupling coupling) {
    if (reps < 100) {
        throw InvalidArgument(fmt::format("need at least 100 simulated copies, got {}", reps));
    }
    if (fpca.kappa < 1) {
        throw InvalidArgument("simulation needs at least one retained component");
    }
    if (products.a.empty()) {
        throw InvalidArgument("simulation needs a nonempty lag grid");
    }
    const Eigen::MatrixXd load = zeta_loadings(fpca, products, coupling);
    const Eigen::Index terms = load.cols();
    Eigen::MatrixXd draws(reps, terms);

    auto fill = [&](int begin, int end) {
        for (int r = begin; r < end; ++r) {
            auto engine = rng::make_engine(seed, {rng::tag(rng::Stream::zeta), static_cast<std::uint64_t>(r)});
            std::normal_distribution<double> normal;
            for (Eigen::Index c = 0; c < terms; ++c) {
                draws(r, c) = normal(engine);
            }
        }
    };
    workers = std::clamp(workers, 1, reps);
    if (workers == 1) {
        fill(0, reps);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (reps + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const int begin = w * chunk;
            const int end = std::min(reps, begin + chunk);
            if (begin < end) {
                pool.emplace_back(fill, begin, end);
            }
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    return draws * load.transpose();
}

Eigen::MatrixXd simulate_zeta(const FpcaResult& fpca, const std::vector<double>& h_grid, int reps,
                              std::uint64_t seed, int quad_points, int workers, ZetaCoupling coupling) {
    return simulate_zeta(fpca, lag_products(fpca, h_grid, quad_points), reps, seed, workers, coupling);
}

Eigen::VectorXd zeta_variance(const FpcaResult& fpca, const LagProducts& products, ZetaCoupling coupling) {
    return zeta_loadings(fpca, products, coupling).rowwise().squaredNorm();
}

std::vector<bool> floored_lags(const CovCurve& xi) {
    std::vector<bool> out(xi.size());
    for (std::size_t t = 0; t < xi.size(); ++t) {
        out[t] = xi.values[static_cast<Eigen::Index>(t)] <= kXiFloor;
    }
    return out;
}

Eigen::VectorXd sup_statistics(const Eigen::Ref<const Eigen::MatrixXd>& zeta, const CovCurve& xi) {
    if (zeta.cols() != static_cast<Eigen::Index>(xi.size())) {
        throw InvalidArgument(
            fmt::format("simulations have {} lags but the variance function has {}", zeta.cols(), xi.size()));
    }
    const auto floored = floored_lags(xi);
    Eigen::VectorXd inv_sd(zeta.cols());
    for (Eigen::Index t = 0; t < zeta.cols(); ++t) {
        inv_sd[t] = floored[static_cast<std::size_t>(t)] ? 0.0 : 1.0 / std::sqrt(xi.values[t]);
    }
    Eigen::VectorXd sups(zeta.rows());
    for (Eigen::Index r = 0; r < zeta.rows(); ++r) {
        sups[r] = (zeta.row(r).transpose().cwiseAbs().array() * inv_sd.array()).maxCoeff();
    }
    return sups;
}

double critical_value_from_sups(const Eigen::Ref<const Eigen::VectorXd>& sups, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw InvalidArgument(fmt::format("alpha must lie in (0, 1), got {}", alpha));
    }
    if (sups.size() == 0) {
        throw InvalidArgument("no simulated sups to take a quantile of");
    }
    std::vector<double> sorted(sups.data(), sups.data() + sups.size());
    std::sort(sorted.begin(), sorted.end());
    const auto reps = static_cast<double>(sorted.size());
    auto rank = static_cast<std::size_t>(std::ceil((1.0 - alpha) * reps - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

double critical_value(const Eigen::Ref<const Eigen::MatrixXd>& zeta, const CovCurve& xi, double alpha) {
    return critical_value_from_sups(sup_statistics(zeta, xi), alpha);
}

std::string to_string(BandKind kind) { return kind == BandKind::simultaneous ? "simultaneous" : "pointwise"; }

bool BandResult::contains(const Eigen::Ref<const Eigen::VectorXd>& curve, double slack) const {
    if (curve.size() != lower.values.size()) {
        throw InvalidArgument("curve and band have different lengths");
    }
    for (Eigen::Index t = 0; t < curve.size(); ++t) {
        if (curve[t] < lower.values[t] - slack || curve[t] > upper.values[t] + slack) {
            return false;
        }
    }
    return true;
}

BandResult scb(const CovCurve& c_hat, const CovCurve& xi, double q, int n, double level) {
    if (c_hat.h_grid != xi.h_grid) {
        throw InvalidArgument("covariance curve and variance function use different lag grids");
    }
    if (!(q >= 0.0) || !std::isfinite(q)) {
        throw InvalidArgument(fmt::format("critical value must be finite and >= 0, got {}", q));
    }
    if (n < 1) {
        throw InvalidArgument(fmt::format("sample size must be >= 1, got {}", n));
    }
    if (!(level > 0.0 && level < 1.0)) {
        throw InvalidArgument(fmt::format("confidence level must lie in (0, 1), got {}", level));
    }
    if ((xi.values.array() < 0.0).any()) {
        throw InvalidArgument("variance function must be nonnegative");
    }
    const Eigen::VectorXd half = (q / std::sqrt(static_cast<double>(n))) * xi.values.cwiseSqrt();
    BandResult band;
    band.level = level;
    band.q = q;
    band.n = n;
    band.center = c_hat;
    band.lower = CovCurve{c_hat.h_grid, c_hat.values - half, CurveKind::band_edge};
    band.upper = CovCurve{c_hat.h_grid, c_hat.values + half, CurveKind::band_edge};
    return band;
}

BandResult pointwise_band(const CovCurve& c_hat, const CovCurve& xi, double alpha, int n) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw InvalidArgument(fmt::format("alpha must lie in (0, 1), got {}", alpha));
    }
    BandResult band = scb(c_hat, xi, normal_quantile(1.0 - alpha / 2.0), n, 1.0 - alpha);
    band.kind = BandKind::pointwise;
    return band;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> sce_surface(const BandResult& band, const std::vector<double>& xs) {
    return {stationary_surface(band.lower, xs), stationary_surface(band.upper, xs)};
}

GofResult gof_test(const CovCurve& c_hat, const CovCurve& xi, int n, const CovModelSpec& model,
                   const Eigen::Ref<const Eigen::VectorXd>& sups, double lag_scale) {
    model.validate();
    if (c_hat.h_grid != xi.h_grid) {
        throw InvalidArgument("covariance curve and variance function use different lag grids");
    }
    if (n < 1) {
        throw InvalidArgument(fmt::format("sample size must be >= 1, got {}", n));
    }
    if (!(lag_scale > 0.0)) {
        throw InvalidArgument(fmt::format("lag scale must be positive, got {}", lag_scale));
    }
    if (sups.size() == 0) {
        throw InvalidArgument("goodness-of-fit test needs simulated sups");
    }
    GofResult out;
    out.model = model.to_string();
    const auto floored = floored_lags(xi);
    const double root_n = std::sqrt(static_cast<double>(n));
    for (std::size_t t = 0; t < c_hat.size(); ++t) {
        const double lag = c_hat.h_grid[t] * lag_scale;
        const double null_value = eval_model(model, lag);
        if (!std::isfinite(null_value)) {
            throw InvalidArgument(fmt::format("model {} is undefined at lag {}", out.model, lag));
        }
        out.lags_original.push_back(lag);
        out.null_curve.push_back(null_value);
        if (floored[t]) {
            ++out.excluded_lags;
            continue;
        }
        const auto idx = static_cast<Eigen::Index>(t);
        const double z = root_n * std::abs(c_hat.values[idx] - null_value) / std::sqrt(xi.values[idx]);
        out.statistic = std::max(out.statistic, z);
    }
    const auto exceed = (sups.array() >= out.statistic).count();
    out.p_value = (1.0 + static_cast<double>(exceed)) / (static_cast<double>(sups.size()) + 1.0);
    for (double alpha : kGofLevels) {
        out.decisions.push_back({alpha, out.p_value < alpha});
    }
    return out;
}

GofResult gof_test_from_zeta(const CovCurve& c_hat, const CovCurve& xi, int n, const CovModelSpec& model,
                             const Eigen::Ref<const Eigen::MatrixXd>& zeta, double lag_scale) {
    return gof_test(c_hat, xi, n, model, sup_statistics(zeta, xi), lag_scale);
}

}  // namespace scbcov

#include "scbcov/covmodels.hpp"

#include "scbcov/errors.hpp"
#include "scbcov/rng.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <fmt/format.h>

namespace scbcov {

std::string to_string(ModelFamily family) {
    switch (family) {
        case ModelFamily::spherical: return "spherical";
        case ModelFamily::matern: return "matern";
        case ModelFamily::gaussian: return "gaussian";
    }
    return "gaussian";
}

void CovModelSpec::validate() const {
    if (!(sill > 0.0) || !std::isfinite(sill)) {
        throw InvalidArgument(fmt::format("sill must be positive, got {}", sill));
    }
    if (!(range > 0.0) || !std::isfinite(range)) {
        throw InvalidArgument(fmt::format("range must be positive, got {}", range));
    }
    if (family == ModelFamily::matern) {
        if (!smoothness) {
            throw InvalidArgument("matern model requires the smoothness parameter nu");
        }
        if (!(*smoothness > 0.0) || !std::isfinite(*smoothness)) {
            throw InvalidArgument(fmt::format("smoothness nu must be positive, got {}", *smoothness));
        }
    } else if (smoothness) {
        throw InvalidArgument(fmt::format("{} model does not take a smoothness parameter nu", scbcov::to_string(family)));
    }
}

std::string CovModelSpec::to_string() const {
    std::string out = fmt::format("{}:sill={},range={}", scbcov::to_string(family), sill, range);
    if (smoothness) {
        out += fmt::format(",nu={}", *smoothness);
    }
    return out;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) {
        s.remove_suffix(1);
    }
    return s;
}

double parse_number(std::string_view token, std::string_view key) {
    double value = 0.0;
    const auto* first = token.data();
    const auto* last = token.data() + token.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (token.empty() || ec != std::errc() || ptr != last) {
        throw InvalidArgument(fmt::format("bad value '{}' for model parameter '{}'", token, key));
    }
    return value;
}

}  // namespace

CovModelSpec parse_model_spec(std::string_view text) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) {
        throw InvalidArgument(fmt::format("model spec '{}' lacks 'family:' prefix", text));
    }
    const auto family_token = trim(text.substr(0, colon));
    CovModelSpec spec;
    if (family_token == "spherical") {
        spec.family = ModelFamily::spherical;
    } else if (family_token == "matern") {
        spec.family = ModelFamily::matern;
    } else if (family_token == "gaussian") {
        spec.family = ModelFamily::gaussian;
    } else {
        throw InvalidArgument(fmt::format("unknown model family '{}' (expected spherical, matern or gaussian)",
                                          family_token));
    }

    bool have_sill = false;
    bool have_range = false;
    std::string_view rest = text.substr(colon + 1);
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        const auto item = trim(rest.substr(0, comma));
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
        const auto eq = item.find('=');
        if (eq == std::string_view::npos) {
            throw InvalidArgument(fmt::format("model parameter '{}' is not of the form key=value", item));
        }
        const auto key = trim(item.substr(0, eq));
        const auto value_token = trim(item.substr(eq + 1));
        const double value = parse_number(value_token, key);
        if (key == "sill") {
            if (have_sill) {
                throw InvalidArgument("duplicate model parameter 'sill'");
            }
            spec.sill = value;
            have_sill = true;
        } else if (key == "range") {
            if (have_range) {
                throw InvalidArgument("duplicate model parameter 'range'");
            }
            spec.range = value;
            have_range = true;
        } else if (key == "nu" || key == "smoothness") {
            if (spec.smoothness) {
                throw InvalidArgument(fmt::format("duplicate model parameter '{}'", key));
            }
            spec.smoothness = value;
        } else {
            throw InvalidArgument(fmt::format("unknown model parameter '{}'", key));
        }
    }
    if (!have_sill) {
        throw InvalidArgument(fmt::format("model spec '{}' is missing 'sill'", text));
    }
    if (!have_range) {
        throw InvalidArgument(fmt::format("model spec '{}' is missing 'range'", text));
    }
    spec.validate();
    return spec;
}

namespace {

// Coefficients of 1/Gamma(z) = sum_k c_k z^k (Abramowitz & Stegun 6.1.34).
constexpr std::array<double, 26> kRecipGamma = {
    1.0,
    0.5772156649015329,
    -0.6558780715202538,
    -0.0420026350340952,
    0.1665386113822915,
    -0.0421977345555443,
    -0.0096219715278770,
    0.0072189432466630,
    -0.0011651675918591,
    -0.0002152416741149,
    0.0001280502823882,
    -0.0000201348547807,
    -0.0000012504934821,
    0.0000011330272320,
    -0.0000002056338417,
    0.0000000061160950,
    0.0000000050020075,
    -0.0000000011812746,
    0.0000000001043427,
    0.0000000000077823,
    -0.0000000000036968,
    0.0000000000005100,
    -0.0000000000000206,
    -0.0000000000000054,
    0.0000000000000014,
    0.0000000000000001,
};

// For |mu| <= 1/2: gam1 = (1/G(1-mu) - 1/G(1+mu)) / (2 mu),
// gam2 = (1/G(1-mu) + 1/G(1+mu)) / 2, plus the two reciprocals themselves.
struct TemmeGammas {
    double gam1;
    double gam2;
    double recip_plus;
    double recip_minus;
};

TemmeGammas temme_gammas(double mu) {
    const double mu2 = mu * mu;
    double odd = 0.0;   // sum over even k of c_k mu^(k-2)
    double even = 0.0;  // sum over odd k of c_k mu^(k-1)
    double pw = 1.0;
    for (std::size_t k = 0; k < kRecipGamma.size(); k += 2) {
        even += kRecipGamma[k] * pw;
        odd += kRecipGamma[k + 1] * pw;
        pw *= mu2;
    }
    TemmeGammas g{};
    g.gam1 = -odd;
    g.gam2 = even;
    g.recip_plus = even + mu * odd;
    g.recip_minus = even - mu * odd;
    return g;
}

constexpr double kEps = 1e-16;
constexpr int kMaxIter = 10000;

}  // namespace

double bessel_k(double nu, double x) {
    if (!(x > 0.0)) {
        throw InvalidArgument(fmt::format("bessel_k needs x > 0, got {}", x));
    }
    nu = std::abs(nu);
    if (!std::isfinite(nu) || !std::isfinite(x)) {
        throw InvalidArgument("bessel_k arguments must be finite");
    }
    const int steps = static_cast<int>(nu + 0.5);
    const double mu = nu - steps;
    const double mu2 = mu * mu;
    const double xi = 1.0 / x;
    const double xi2 = 2.0 * xi;
    double k_mu;
    double k_mu1;

    if (x < 2.0) {
        // Temme's series for K_mu and K_{mu+1}.
        const double x2 = 0.5 * x;
        const double pimu = std::numbers::pi * mu;
        const double fact = std::abs(pimu) < kEps ? 1.0 : pimu / std::sin(pimu);
        double d = -std::log(x2);
        double e = mu * d;
        const double fact2 = std::abs(e) < kEps ? 1.0 : std::sinh(e) / e;
        const auto g = temme_gammas(mu);
        double ff = fact * (g.gam1 * std::cosh(e) + g.gam2 * fact2 * d);
        double sum = ff;
        e = std::exp(e);
        double p = 0.5 * e / g.recip_plus;
        double q = 0.5 / (e * g.recip_minus);
        double c = 1.0;
        d = x2 * x2;
        double sum1 = p;
        for (int i = 1; i <= kMaxIter; ++i) {
            ff = (i * ff + p + q) / (i * i - mu2);
            c *= d / i;
            p /= i - mu;
            q /= i + mu;
            const double del = c * ff;
            sum += del;
            sum1 += c * p - i * del;
            if (std::abs(del) < std::abs(sum) * kEps) {
                break;
            }
        }
        k_mu = sum;
        k_mu1 = sum1 * xi2;
    } else {
        // Steed's continued fraction CF2 with Temme's normalization.
        double b = 2.0 * (1.0 + x);
        double d = 1.0 / b;
        double h = d;
        double delh = d;
        double q1 = 0.0;
        double q2 = 1.0;
        const double a1 = 0.25 - mu2;
        double q = a1;
        double c = a1;
        double a = -a1;
        double s = 1.0 + q * delh;
        for (int i = 2; i <= kMaxIter; ++i) {
            a -= 2 * (i - 1);
            c = -a * c / i;
            const double qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh = (b * d - 1.0) * delh;
            h += delh;
            const double dels = q * delh;
            s += dels;
            if (std::abs(dels / s) < kEps) {
                break;
            }
        }
        k_mu = std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x) / s;
        k_mu1 = k_mu * (mu + x + 0.5 - a1 * h) * xi;
    }

    // Upward recurrence K_{v+1} = K_{v-1} + (2v/x) K_v.
    for (int i = 1; i <= steps; ++i) {
        const double next = (mu + i) * xi2 * k_mu1 + k_mu;
        k_mu = k_mu1;
        k_mu1 = next;
    }
    return k_mu;
}

double eval_model(const CovModelSpec& spec, double h) {
    if (!(h >= 0.0)) {
        throw InvalidArgument(fmt::format("covariance lag must be >= 0, got {}", h));
    }
    switch (spec.family) {
        case ModelFamily::spherical: {
            if (h >= spec.range) {
                return 0.0;
            }
            const double u = h / spec.range;
            return spec.sill * (1.0 - 1.5 * u + 0.5 * u * u * u);
        }
        case ModelFamily::matern: {
            if (h == 0.0) {
                return spec.sill;
            }
            const double nu = *spec.smoothness;
            const double u = 2.0 * std::sqrt(nu) * h / spec.range;
            if (u > 700.0) {
                return 0.0;
            }
            const double log_scale = (1.0 - nu) * std::numbers::ln2 - std::lgamma(nu) + nu * std::log(u);
            return spec.sill * std::exp(log_scale) * bessel_k(nu, u);
        }
        case ModelFamily::gaussian: {
            const double u = h / spec.range;
            return spec.sill * std::exp(-u * u);
        }
    }
    return 0.0;
}

double correlation(const CovModelSpec& spec, double h) { return eval_model(spec, h) / spec.sill; }

double effective_range(const CovModelSpec& spec, double rho0) {
    spec.validate();
    if (!(rho0 > 0.0 && rho0 <= 1.0)) {
        throw InvalidArgument(fmt::format("correlation threshold must lie in (0, 1], got {}", rho0));
    }
    if (rho0 == 1.0) {
        return 0.0;
    }
    double lo = 0.0;
    double hi = spec.range;
    int doublings = 0;
    while (correlation(spec, hi) > rho0) {
        lo = hi;
        hi *= 2.0;
        if (++doublings > 200) {
            throw NumericalError("effective range search did not bracket the threshold");
        }
    }
    while (hi - lo > 1e-14 * std::max(1.0, hi)) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) {
            break;
        }
        if (correlation(spec, mid) > rho0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

Eigen::MatrixXd model_covariance_matrix(const CovModelSpec& spec, const std::vector<double>& grid) {
    const auto size = static_cast<Eigen::Index>(grid.size());
    Eigen::MatrixXd sigma(size, size);
    for (Eigen::Index j = 0; j < size; ++j) {
        for (Eigen::Index jp = 0; jp <= j; ++jp) {
            const double v =
                eval_model(spec, std::abs(grid[static_cast<std::size_t>(j)] - grid[static_cast<std::size_t>(jp)]));
            sigma(j, jp) = v;
            sigma(jp, j) = v;
        }
    }
    return sigma;
}

Eigen::MatrixXd sample_gp(const CovModelSpec& spec, const std::vector<double>& grid, int n, std::uint64_t seed,
                          std::uint64_t stream) {
    spec.validate();
    if (n < 1) {
        throw InvalidArgument(fmt::format("need at least one sample path, got n = {}", n));
    }
    if (grid.empty()) {
        throw InvalidArgument("sampling grid is empty");
    }
    for (std::size_t j = 1; j < grid.size(); ++j) {
        if (!(grid[j] > grid[j - 1])) {
            throw InvalidArgument(fmt::format("sampling grid not strictly increasing at position {}", j));
        }
    }
    Eigen::MatrixXd sigma = model_covariance_matrix(spec, grid);
    const auto size = sigma.rows();
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    double jitter = 1e-10 * spec.sill;
    for (int retry = 0; llt.info() != Eigen::Success; ++retry) {
        if (retry == 3) {
            throw NumericalError(fmt::format("{} covariance matrix is not positive definite even with jitter {}",
                                             spec.to_string(), jitter / 10.0));
        }
        llt.compute(sigma + jitter * Eigen::MatrixXd::Identity(size, size));
        jitter *= 10.0;
    }
    const Eigen::MatrixXd lower = llt.matrixL();

    Eigen::MatrixXd w(n, size);
    for (int i = 0; i < n; ++i) {
        auto engine = rng::make_engine(seed, {rng::tag(rng::Stream::gp), stream, static_cast<std::uint64_t>(i)});
        std::normal_distribution<double> normal;
        for (Eigen::Index j = 0; j < size; ++j) {
            w(i, j) = normal(engine);
        }
    }
    return w * lower.transpose();
}

}  // namespace scbcov

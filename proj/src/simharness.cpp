#include "scbcov/simharness.hpp"

#include "scbcov/band.hpp"
#include "scbcov/errors.hpp"
#include "scbcov/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include <fmt/format.h>

namespace scbcov {

using nlohmann::json;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kTruthTerms = 50;
constexpr double kCoverSlack = 1e-10;

double noise_shape_value(NoiseShape shape, double x) {
    switch (shape) {
    case NoiseShape::ratio5_x:
        return (5.0 - std::exp(x)) / (5.0 + std::exp(x));
    case NoiseShape::ratio5_half:
        return (5.0 - std::exp(x / 2.0)) / (5.0 + std::exp(x / 2.0));
    case NoiseShape::ratio30_half:
        return (30.0 - std::exp(x / 2.0)) / (30.0 + std::exp(x / 2.0));
    case NoiseShape::automatic:
        break;
    }
    return 1.0;
}

NoiseShape resolve_shape(const SimConfig& config) {
    if (config.hetero_shape != NoiseShape::automatic) {
        return config.hetero_shape;
    }
    if (config.generator == GeneratorKind::fourier) {
        return NoiseShape::ratio5_x;
    }
    return config.model && config.model->family == ModelFamily::spherical ? NoiseShape::ratio5_x
                                                                          : NoiseShape::ratio30_half;
}

// Adds m(j/N) and sigma(x_j) eps_ij to the latent processes.
Eigen::MatrixXd observe(const SimConfig& config, const Eigen::MatrixXd& z, const Eigen::VectorXd& mean,
                        const std::vector<double>& original_grid, std::uint64_t replicate) {
    const NoiseShape shape = resolve_shape(config);
    Eigen::MatrixXd y = z;
    y.rowwise() += mean.transpose();
    if (config.sigma_eps == 0.0) {
        return y;
    }
    Eigen::VectorXd sd(static_cast<Eigen::Index>(original_grid.size()));
    for (std::size_t j = 0; j < original_grid.size(); ++j) {
        sd[static_cast<Eigen::Index>(j)] =
            config.sigma_eps * (config.hetero ? noise_shape_value(shape, original_grid[j]) : 1.0);
    }
    auto engine = rng::make_engine(config.seed, {replicate, rng::tag(rng::Stream::noise)});
    std::normal_distribution<double> normal;
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        for (Eigen::Index j = 0; j < y.cols(); ++j) {
            y(i, j) += sd[j] * normal(engine);
        }
    }
    return y;
}

Eigen::VectorXd mean_curve(int grid_size) {
    Eigen::VectorXd m(grid_size);
    for (int j = 0; j < grid_size; ++j) {
        const double x = static_cast<double>(j + 1) / grid_size;
        m[j] = std::sin(kTwoPi * (x - 0.5));
    }
    return m;
}

double mean_square(const Eigen::Ref<const Eigen::VectorXd>& d) { return d.squaredNorm() / static_cast<double>(d.size()); }

// ---- config parsing ----

int as_int(const json& v) {
    if (v.is_number_integer() || v.is_number_unsigned()) {
        return v.get<int>();
    }
    if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>()) {
        return static_cast<int>(v.get<double>());
    }
    throw InvalidArgument(fmt::format("expected an integer, got {}", v.dump()));
}

double as_double(const json& v) {
    if (!v.is_number()) {
        throw InvalidArgument(fmt::format("expected a number, got {}", v.dump()));
    }
    return v.get<double>();
}

bool as_bool(const json& v) {
    if (!v.is_boolean()) {
        throw InvalidArgument(fmt::format("expected true or false, got {}", v.dump()));
    }
    return v.get<bool>();
}

std::string as_string(const json& v) {
    if (!v.is_string()) {
        throw InvalidArgument(fmt::format("expected a string, got {}", v.dump()));
    }
    return v.get<std::string>();
}

std::uint64_t as_seed(const json& v) {
    if (v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        return v.get<std::uint64_t>();
    }
    throw InvalidArgument(fmt::format("expected a nonnegative integer, got {}", v.dump()));
}

GeneratorKind parse_generator(const std::string& s) {
    if (s == "fourier") {
        return GeneratorKind::fourier;
    }
    if (s == "spatial") {
        return GeneratorKind::spatial;
    }
    throw InvalidArgument(fmt::format("unknown generator '{}' (expected fourier or spatial)", s));
}

NoiseShape parse_shape(const std::string& s) {
    for (auto shape : {NoiseShape::automatic, NoiseShape::ratio5_x, NoiseShape::ratio5_half, NoiseShape::ratio30_half}) {
        if (s == to_string(shape)) {
            return shape;
        }
    }
    throw InvalidArgument(fmt::format("unknown hetero_shape '{}'", s));
}

void assign(SimConfig& c, const std::string& key, const json& v) {
    if (key == "generator") {
        c.generator = parse_generator(as_string(v));
    } else if (key == "model") {
        if (v.is_null()) {
            c.model.reset();
        } else {
            c.model = parse_model_spec(as_string(v));
        }
    } else if (key == "n") {
        c.n = as_int(v);
    } else if (key == "N") {
        c.N = as_int(v);
    } else if (key == "paper_default_n") {
        c.paper_default_n = as_bool(v);
    } else if (key == "sigma_eps") {
        c.sigma_eps = as_double(v);
    } else if (key == "process_scale") {
        c.process_scale = as_double(v);
    } else if (key == "hetero") {
        c.hetero = as_bool(v);
    } else if (key == "hetero_shape") {
        c.hetero_shape = parse_shape(as_string(v));
    } else if (key == "knots") {
        c.knots = parse_knot_method(as_string(v));
    } else if (key == "knot_c") {
        c.knot_c = as_double(v);
    } else if (key == "knot_gamma") {
        c.knot_gamma = as_double(v);
    } else if (key == "order") {
        c.order = as_int(v);
    } else if (key == "h0") {
        c.h0 = as_double(v);
    } else if (key == "reps") {
        c.reps = as_int(v);
    } else if (key == "alpha") {
        c.alpha.clear();
        if (v.is_array()) {
            for (const auto& a : v) {
                c.alpha.push_back(as_double(a));
            }
        } else {
            c.alpha.push_back(as_double(v));
        }
    } else if (key == "seed") {
        c.seed = as_seed(v);
    } else if (key == "zeta_reps") {
        c.zeta_reps = as_int(v);
    } else if (key == "fve") {
        c.fve = as_double(v);
    } else if (key == "workers") {
        c.workers = as_int(v);
    } else if (key == "fourier_terms") {
        c.fourier_terms = as_int(v);
    } else if (key == "xi_form") {
        c.xi_form = parse_xi_form(as_string(v));
    } else if (key == "coupling") {
        c.coupling = parse_zeta_coupling(as_string(v));
    } else if (key == "quad_points") {
        c.quad_points = as_int(v);
    } else {
        throw InvalidArgument("unknown key");
    }
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') {
            quoted = !quoted;
        } else if (line[i] == '#' && !quoted) {
            return line.substr(0, i);
        }
    }
    return line;
}

json parse_key_values(std::string_view text, std::vector<std::string>& errors) {
    json out = json::object();
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(strip_comment(raw));
        if (line.empty() || line.front() == '[') {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            errors.push_back(fmt::format("line {}: expected key = value", line_no));
            continue;
        }
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) {
            errors.push_back(fmt::format("line {}: missing key", line_no));
            continue;
        }
        if (out.contains(key)) {
            errors.push_back(fmt::format("line {}: duplicate key '{}'", line_no, key));
            continue;
        }
        try {
            out[key] = json::parse(value);
        } catch (const json::parse_error&) {
            out[key] = value;
        }
    }
    return out;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string csv_number(double v) { return std::isfinite(v) ? fmt::format("{}", v) : "NA"; }

int level_percent(double alpha) { return static_cast<int>(std::lround(100.0 * (1.0 - alpha))); }

}  // namespace

std::string to_string(GeneratorKind kind) { return kind == GeneratorKind::fourier ? "fourier" : "spatial"; }

std::string to_string(NoiseShape shape) {
    switch (shape) {
    case NoiseShape::automatic:
        return "auto";
    case NoiseShape::ratio5_x:
        return "ratio5_x";
    case NoiseShape::ratio5_half:
        return "ratio5_half";
    case NoiseShape::ratio30_half:
        return "ratio30_half";
    }
    return "auto";
}

int SimConfig::subjects() const {
    return paper_default_n ? static_cast<int>(std::floor(0.8 * N)) : n;
}

std::vector<std::string> SimConfig::problems() const {
    std::vector<std::string> out;
    if (generator == GeneratorKind::spatial && !model) {
        out.emplace_back("spatial generator needs a model");
    }
    if (generator == GeneratorKind::fourier && model) {
        out.emplace_back("model is only used by the spatial generator");
    }
    if (model) {
        try {
            model->validate();
        } catch (const std::exception& e) {
            out.emplace_back(fmt::format("model: {}", e.what()));
        }
    }
    if (N < 4) {
        out.push_back(fmt::format("N must be >= 4, got {}", N));
    }
    if (subjects() < 2) {
        out.push_back(fmt::format("need at least 2 subjects, got {}", subjects()));
    }
    if (!(sigma_eps >= 0.0) || !std::isfinite(sigma_eps)) {
        out.push_back(fmt::format("sigma_eps must be finite and >= 0, got {}", sigma_eps));
    }
    if (!(process_scale >= 0.0) || !std::isfinite(process_scale)) {
        out.push_back(fmt::format("process_scale must be finite and >= 0, got {}", process_scale));
    }
    if (!(knot_c > 0.0)) {
        out.push_back(fmt::format("knot_c must be positive, got {}", knot_c));
    }
    if (!(knot_gamma > 0.0 && knot_gamma < 1.0)) {
        out.push_back(fmt::format("knot_gamma must lie in (0, 1), got {}", knot_gamma));
    }
    if (order < 1 || order > 30) {
        out.push_back(fmt::format("order must lie in [1, 30], got {}", order));
    }
    if (!(h0 > 0.0 && h0 <= 1.0)) {
        out.push_back(fmt::format("h0 must lie in (0, 1], got {}", h0));
    }
    if (reps < 1) {
        out.push_back(fmt::format("reps must be >= 1, got {}", reps));
    }
    if (alpha.empty()) {
        out.emplace_back("alpha needs at least one level");
    }
    for (double a : alpha) {
        if (!(a > 0.0 && a < 1.0)) {
            out.push_back(fmt::format("alpha levels must lie in (0, 1), got {}", a));
        }
    }
    if (zeta_reps < 100) {
        out.push_back(fmt::format("zeta_reps must be >= 100, got {}", zeta_reps));
    }
    if (!(fve > 0.0 && fve <= 1.0)) {
        out.push_back(fmt::format("fve must lie in (0, 1], got {}", fve));
    }
    if (workers < 1) {
        out.push_back(fmt::format("workers must be >= 1, got {}", workers));
    }
    if (fourier_terms < 1) {
        out.push_back(fmt::format("fourier_terms must be >= 1, got {}", fourier_terms));
    }
    if (quad_points != 0 && quad_points < 2) {
        out.push_back(fmt::format("quad_points must be 0 or >= 2, got {}", quad_points));
    }
    return out;
}

void SimConfig::validate() const {
    const auto p = problems();
    if (!p.empty()) {
        std::string msg = "invalid simulation config:";
        for (const auto& s : p) {
            msg += "\n  " + s;
        }
        throw InvalidArgument(msg);
    }
}

PipelineOptions SimConfig::pipeline_options(std::uint64_t replicate) const {
    PipelineOptions o;
    o.order = order;
    o.knots = KnotSelection{knots, knot_c, knot_gamma};
    o.h0 = h0;
    o.quad_points = quad_points;
    o.fve = fve;
    o.zeta_reps = zeta_reps;
    o.seed = rng::make_engine(seed, {replicate, rng::tag(rng::Stream::zeta)})();
    o.alphas = alpha;
    o.xi_form = xi_form;
    o.coupling = coupling;
    o.workers = 1;
    return o;
}

SimConfig parse_sim_config(std::string_view text) {
    std::vector<std::string> errors;
    json j;
    const std::string body = trim(text);
    if (!body.empty() && body.front() == '{') {
        try {
            j = json::parse(body);
        } catch (const json::parse_error& e) {
            throw InvalidArgument(fmt::format("config is not valid JSON: {}", e.what()));
        }
    } else {
        j = parse_key_values(text, errors);
    }
    SimConfig c;
    for (const auto& [key, value] : j.items()) {
        try {
            assign(c, key, value);
        } catch (const std::exception& e) {
            errors.push_back(fmt::format("{}: {}", key, e.what()));
        }
    }
    for (auto& p : c.problems()) {
        errors.push_back(std::move(p));
    }
    if (!errors.empty()) {
        std::string msg = "invalid simulation config:";
        for (const auto& s : errors) {
            msg += "\n  " + s;
        }
        throw InvalidArgument(msg);
    }
    return c;
}

json to_json(const SimConfig& c) {
    json alphas = json::array();
    for (double a : c.alpha) {
        alphas.push_back(a);
    }
    return json{{"generator", to_string(c.generator)},
                {"model", c.model ? json(c.model->to_string()) : json(nullptr)},
                {"n", c.n},
                {"N", c.N},
                {"paper_default_n", c.paper_default_n},
                {"sigma_eps", c.sigma_eps},
                {"process_scale", c.process_scale},
                {"hetero", c.hetero},
                {"hetero_shape", to_string(c.hetero_shape)},
                {"knots", to_string(c.knots)},
                {"knot_c", c.knot_c},
                {"knot_gamma", c.knot_gamma},
                {"order", c.order},
                {"h0", c.h0},
                {"reps", c.reps},
                {"alpha", alphas},
                {"seed", c.seed},
                {"zeta_reps", c.zeta_reps},
                {"fve", c.fve},
                {"workers", c.workers},
                {"fourier_terms", c.fourier_terms},
                {"xi_form", to_string(c.xi_form)},
                {"coupling", to_string(c.coupling)},
                {"quad_points", c.quad_points}};
}

// ---- generators ----

namespace {

void scale_truth(SimTruth& truth, double scale) {
    if (scale == 1.0) {
        return;
    }
    truth.z *= scale;
    truth.covariance.values *= scale * scale;
    truth.lambda *= scale * scale;
    truth.phi *= scale;
    truth.surface *= scale * scale;
}

}  // namespace

Eigen::VectorXd fourier_eigenvalues(int terms) {
    Eigen::VectorXd lambda(terms);
    for (int k = 1; k <= terms; ++k) {
        lambda[k - 1] = std::pow(0.25, k / 2);
    }
    return lambda;
}

double fourier_basis(int index, double x) {
    const int freq = (index + 1) / 2;
    const double arg = kTwoPi * freq * x;
    return std::numbers::sqrt2 * (index % 2 == 1 ? std::cos(arg) : std::sin(arg));
}

double fourier_covariance(double h, int terms) {
    if (!(h >= 0.0 && h < 1.0)) {
        throw InvalidArgument(fmt::format("lag must lie in [0, 1), got {}", h));
    }
    const Eigen::VectorXd lambda = fourier_eigenvalues(terms);
    double c = 0.0;
    for (int index = 1; index <= terms; ++index) {
        const double omega = kTwoPi * ((index + 1) / 2);
        const double tail = h == 0.0 ? 0.0 : std::sin(omega * h) / (omega * (1.0 - h));
        const double sign = index % 2 == 1 ? -1.0 : 1.0;
        c += lambda[index - 1] * (std::cos(omega * h) + sign * tail);
    }
    return c;
}

SimSample gen_fourier_data(const SimConfig& config, std::uint64_t replicate) {
    config.validate();
    if (config.generator != GeneratorKind::fourier) {
        throw InvalidArgument("gen_fourier_data needs the fourier generator");
    }
    const int N = config.N;
    const int n = config.subjects();
    const int K = config.fourier_terms;
    const auto grid = unit_grid(N);
    const Eigen::VectorXd lambda = fourier_eigenvalues(std::max(K, kTruthTerms));

    Eigen::MatrixXd phi(K, N);
    for (int k = 0; k < K; ++k) {
        const double root = std::sqrt(lambda[k]);
        for (int j = 0; j < N; ++j) {
            phi(k, j) = root * fourier_basis(k + 1, grid[static_cast<std::size_t>(j)]);
        }
    }
    Eigen::MatrixXd xi(n, K);
    auto engine = rng::make_engine(config.seed, {replicate, rng::tag(rng::Stream::scores)});
    std::normal_distribution<double> normal;
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < K; ++k) {
            xi(i, k) = normal(engine);
        }
    }
    SimTruth truth;
    truth.z = xi * phi;
    truth.mean = mean_curve(N);
    const auto h_grid = default_h_grid(N, config.h0);
    Eigen::VectorXd c(static_cast<Eigen::Index>(h_grid.size()));
    for (std::size_t t = 0; t < h_grid.size(); ++t) {
        c[static_cast<Eigen::Index>(t)] = fourier_covariance(h_grid[t], kTruthTerms);
    }
    truth.covariance = CovCurve{h_grid, c, CurveKind::truth};
    truth.lambda = lambda.head(kTruthTerms);
    truth.phi.resize(N, kTruthTerms);
    for (int k = 0; k < kTruthTerms; ++k) {
        for (int j = 0; j < N; ++j) {
            truth.phi(j, k) = std::sqrt(lambda[k]) * fourier_basis(k + 1, grid[static_cast<std::size_t>(j)]);
        }
    }
    truth.surface = truth.phi * truth.phi.transpose();
    truth.lag_scale = 1.0;
    scale_truth(truth, config.process_scale);

    Eigen::MatrixXd y = observe(config, truth.z, truth.mean, grid, replicate);
    return SimSample{FunctionalDataset(std::move(y)), std::move(truth)};
}

SimSample gen_spatial_data(const SimConfig& config, std::uint64_t replicate) {
    config.validate();
    if (config.generator != GeneratorKind::spatial) {
        throw InvalidArgument("gen_spatial_data needs the spatial generator");
    }
    const CovModelSpec& model = *config.model;
    const int N = config.N;
    const double s = effective_range(model);
    const auto unit = unit_grid(N);
    std::vector<double> grid(unit.size());
    std::transform(unit.begin(), unit.end(), grid.begin(), [s](double u) { return s * u; });

    SimTruth truth;
    truth.z = sample_gp(model, grid, config.subjects(), config.seed, replicate);
    truth.mean = mean_curve(N);
    const auto h_grid = default_h_grid(N, config.h0);
    Eigen::VectorXd c(static_cast<Eigen::Index>(h_grid.size()));
    for (std::size_t t = 0; t < h_grid.size(); ++t) {
        c[static_cast<Eigen::Index>(t)] = eval_model(model, h_grid[t] * s);
    }
    truth.covariance = CovCurve{h_grid, c, CurveKind::truth};
    truth.surface = model_covariance_matrix(model, grid);
    truth.lag_scale = s;
    scale_truth(truth, config.process_scale);

    Eigen::MatrixXd y = observe(config, truth.z, truth.mean, grid, replicate);
    return SimSample{FunctionalDataset(std::move(y), Domain{0.0, s}), std::move(truth)};
}

SimSample generate(const SimConfig& config, std::uint64_t replicate) {
    return config.generator == GeneratorKind::fourier ? gen_fourier_data(config, replicate)
                                                      : gen_spatial_data(config, replicate);
}

// ---- replications ----

ReplicateOutcome run_replicate(const SimConfig& config, std::uint64_t replicate) {
    ReplicateOutcome out;
    const SimSample sample = generate(config, replicate);
    const PipelineOptions options = config.pipeline_options(replicate);
    const PipelineResult res = run_pipeline(sample.data, options);
    const SimTruth& truth = sample.truth;
    const auto& h_grid = res.c_hat.h_grid;
    const int N = sample.data.grid_size();

    const CovCurve c_tilde = oracle_covariance(truth.z, h_grid, options.quad_points);
    out.amse_c = mean_square(res.c_hat.values - truth.covariance.values);
    out.amse_c_tilde = mean_square(c_tilde.values - truth.covariance.values);
    const auto grid = unit_grid(N);
    out.amse_g = (res.surface.eval_grid(grid) - truth.surface).squaredNorm() / (static_cast<double>(N) * N);
    out.interior_knots = res.interior_knots;
    out.kappa = res.fpca.kappa;

    const int kappa = std::min<int>(res.fpca.kappa, static_cast<int>(truth.lambda.size()));
    if (kappa >= 1) {
        out.amse_lambda = mean_square(res.fpca.lambda.head(kappa) - truth.lambda.head(kappa));
        const Eigen::MatrixXd phi_hat = res.fpca.phi_values(grid);
        double aligned = 0.0;
        double raw = 0.0;
        for (int k = 0; k < kappa; ++k) {
            const auto est = phi_hat.col(k);
            const auto tru = truth.phi.col(k);
            const double sign = est.dot(tru) < 0.0 ? -1.0 : 1.0;
            aligned += (sign * est - tru).squaredNorm();
            raw += (est - tru).squaredNorm();
        }
        out.amse_phi = aligned / (static_cast<double>(N) * kappa);
        out.amse_phi_unaligned = raw / (static_cast<double>(N) * kappa);
    } else {
        out.amse_lambda = std::numeric_limits<double>::quiet_NaN();
        out.amse_phi = std::numeric_limits<double>::quiet_NaN();
        out.amse_phi_unaligned = std::numeric_limits<double>::quiet_NaN();
    }

    for (const auto& band : res.simultaneous) {
        out.covered.push_back(band.contains(truth.covariance.values, kCoverSlack));
        const Eigen::VectorXd half = band.half_width();
        const Eigen::VectorXd d = (truth.covariance.values - c_tilde.values).cwiseAbs();
        out.covered_tilde.push_back(((d - half).array() <= kCoverSlack).all());
        out.width.push_back(band.mean_width());
    }
    out.ok = true;
    return out;
}

SimReport run_replications(const SimConfig& config) {
    config.validate();
    std::vector<ReplicateOutcome> outcomes(static_cast<std::size_t>(config.reps));
    std::atomic<int> next{0};
    auto work = [&] {
        for (int r = next++; r < config.reps; r = next++) {
            auto& slot = outcomes[static_cast<std::size_t>(r)];
            try {
                slot = run_replicate(config, static_cast<std::uint64_t>(r));
            } catch (const std::exception& e) {
                slot = ReplicateOutcome{};
                slot.error = e.what();
            }
        }
    };
    const int workers = std::clamp(config.workers, 1, config.reps);
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back(work);
        }
        for (auto& t : pool) {
            t.join();
        }
    }

    SimReport report;
    report.config = config;
    report.seed = config.seed;
    const std::size_t levels = config.alpha.size();
    std::vector<double> cr(levels, 0.0), cr_tilde(levels, 0.0), wd(levels, 0.0);
    int lambda_count = 0;
    for (std::size_t r = 0; r < outcomes.size(); ++r) {
        const auto& o = outcomes[r];
        if (!o.ok) {
            ++report.failures;
            report.failure_messages.push_back(fmt::format("replicate {}: {}", r, o.error));
            continue;
        }
        ++report.reps_done;
        report.amse_C += o.amse_c;
        report.amse_Ctilde += o.amse_c_tilde;
        report.amse_G += o.amse_g;
        report.mean_knots += o.interior_knots;
        report.mean_kappa += o.kappa;
        if (std::isfinite(o.amse_lambda)) {
            ++lambda_count;
            report.amse_lambda += o.amse_lambda;
            report.amse_phi += o.amse_phi;
            report.amse_phi_unaligned += o.amse_phi_unaligned;
        }
        for (std::size_t l = 0; l < levels; ++l) {
            cr[l] += o.covered[l] ? 1.0 : 0.0;
            cr_tilde[l] += o.covered_tilde[l] ? 1.0 : 0.0;
            wd[l] += o.width[l];
        }
    }
    if (static_cast<double>(report.failures) > 0.05 * config.reps) {
        std::string msg = fmt::format("{} of {} replicates failed", report.failures, config.reps);
        for (std::size_t i = 0; i < std::min<std::size_t>(3, report.failure_messages.size()); ++i) {
            msg += "\n  " + report.failure_messages[i];
        }
        throw NumericalError(msg);
    }
    const double done = report.reps_done;
    report.amse_C /= done;
    report.amse_Ctilde /= done;
    report.amse_G /= done;
    report.mean_knots /= done;
    report.mean_kappa /= done;
    if (lambda_count > 0) {
        report.amse_lambda /= lambda_count;
        report.amse_phi /= lambda_count;
        report.amse_phi_unaligned /= lambda_count;
    } else {
        report.amse_lambda = report.amse_phi = report.amse_phi_unaligned = std::numeric_limits<double>::quiet_NaN();
    }
    for (std::size_t l = 0; l < levels; ++l) {
        report.levels.push_back({config.alpha[l], cr[l] / done, cr_tilde[l] / done, wd[l] / done});
    }
    return report;
}

json to_json(const SimReport& report) {
    json cr = json::object();
    json wd = json::object();
    for (const auto& l : report.levels) {
        const std::string key = fmt::format("{}", 1.0 - l.alpha);
        cr[key] = {{"c_hat", l.cr}, {"c_tilde", l.cr_tilde}};
        wd[key] = l.wd;
    }
    json config = to_json(report.config);
    config.erase("workers");
    return json{{"config", config},
                {"seed", report.seed},
                {"reps_done", report.reps_done},
                {"failures", report.failures},
                {"failure_messages", report.failure_messages},
                {"amse_C", report.amse_C},
                {"amse_Ctilde", report.amse_Ctilde},
                {"amse_lambda", number_or_null(report.amse_lambda)},
                {"amse_G", report.amse_G},
                {"amse_phi", number_or_null(report.amse_phi)},
                {"amse_phi_unaligned", number_or_null(report.amse_phi_unaligned)},
                {"mean_knots", report.mean_knots},
                {"mean_kappa", report.mean_kappa},
                {"cr", cr},
                {"wd", wd}};
}

std::string report_csv(const SimReport& report) {
    const SimConfig& c = report.config;
    std::string header = "generator,model,sigma_eps,hetero,knots,N,n,reps_done,AMSE_Chat,AMSE_Ctilde";
    std::string row = fmt::format("{},{},{},{},{},{},{},{},{},{}", to_string(c.generator),
                                  c.model ? c.model->to_string() : "", csv_number(c.sigma_eps),
                                  c.hetero ? "true" : "false", to_string(c.knots), c.N, c.subjects(),
                                  report.reps_done, csv_number(report.amse_C), csv_number(report.amse_Ctilde));
    for (const auto& l : report.levels) {
        const int pct = level_percent(l.alpha);
        header += fmt::format(",CR{0},WD{0}", pct);
        row += fmt::format(",{},{}", csv_number(l.cr), csv_number(l.wd));
    }
    for (const auto& l : report.levels) {
        header += fmt::format(",CR{}_tilde", level_percent(l.alpha));
        row += fmt::format(",{}", csv_number(l.cr_tilde));
    }
    header += ",AMSE_lambda,AMSE_G,AMSE_phi,AMSE_phi_unaligned";
    row += fmt::format(",{},{},{},{}", csv_number(report.amse_lambda), csv_number(report.amse_G),
                       csv_number(report.amse_phi), csv_number(report.amse_phi_unaligned));
    return header + "\n" + row + "\n";
}

}  // namespace scbcov

#include "scbcov/band.hpp"
#include "scbcov/covmodels.hpp"
#include "scbcov/errors.hpp"
#include "scbcov/io.hpp"
#include "scbcov/pipeline.hpp"
#include "scbcov/simharness.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#ifndef SCBCOV_VERSION
#define SCBCOV_VERSION "0.0.0"
#endif

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

// Everything a data command needs; serialized verbatim into the manifest.
struct DataSettings {
    std::string input;
    bool header = false;
    std::string out;
    bool curves = false;
    std::optional<std::string> model;
    std::optional<double> lag_scale;
    scbcov::PipelineOptions pipeline;
};

json to_json(const DataSettings& s) {
    return json{{"input", s.input},
                {"header", s.header},
                {"out", s.out},
                {"curves", s.curves},
                {"model", s.model ? json(*s.model) : json(nullptr)},
                {"lag_scale", s.lag_scale ? json(*s.lag_scale) : json(nullptr)},
                {"pipeline", scbcov::to_json(s.pipeline)}};
}

DataSettings data_settings_from_json(const json& j) {
    DataSettings s;
    s.input = j.at("input").get<std::string>();
    s.header = j.at("header").get<bool>();
    s.out = j.at("out").get<std::string>();
    s.curves = j.value("curves", false);
    if (j.contains("model") && !j["model"].is_null()) {
        s.model = j["model"].get<std::string>();
    }
    if (j.contains("lag_scale") && !j["lag_scale"].is_null()) {
        s.lag_scale = j["lag_scale"].get<double>();
    }
    s.pipeline = scbcov::pipeline_options_from_json(j.at("pipeline"));
    return s;
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

class Manifest {
public:
    explicit Manifest(std::string command) : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {
        started_ = utc_now();
    }

    void add_input(const std::string& path) {
        const std::string bytes = scbcov::read_text_file(path);
        inputs_.push_back({{"path", path}, {"bytes", bytes.size()}, {"fnv1a64", fmt::format("{:016x}", fnv1a(bytes))}});
    }
    void add_output(const std::string& path) { outputs_.push_back(path); }

    void write(const std::string& path, const json& config, std::uint64_t seed) const {
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        const json j{{"command", command_},
                     {"tool_version", SCBCOV_VERSION},
                     {"inputs", inputs_},
                     {"config", config},
                     {"seed", seed},
                     {"outputs", outputs_},
                     {"started_utc", started_},
                     {"wall_clock_seconds", elapsed}};
        scbcov::write_text_file(path, j.dump(2) + "\n");
    }

private:
    std::string command_;
    std::chrono::steady_clock::time_point start_;
    std::string started_;
    json inputs_ = json::array();
    std::vector<std::string> outputs_;
};

std::string default_prefix(const std::string& path) {
    fs::path p(path);
    return (p.parent_path() / p.stem()).string();
}

void emit(Manifest& manifest, const std::string& path, const std::string& text) {
    scbcov::write_text_file(path, text);
    manifest.add_output(path);
    std::cout << path << "\n";
}

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

void run_fit(const DataSettings& s) {
    Manifest manifest("fit");
    manifest.add_input(s.input);
    const auto loaded = scbcov::load_dataset_csv(s.input, s.header);
    const auto& data = loaded.data;
    const auto& o = s.pipeline;
    const int knots = o.interior_knots ? *o.interior_knots
                                       : scbcov::select_knots(data.observations(), o.order, o.knots);
    const auto fits = scbcov::fit_trajectories(data, scbcov::make_basis(o.order, knots));
    const auto grid = data.grid();
    const Eigen::VectorXd mean = scbcov::eval_fit(fits, scbcov::FitComponent::mean(), grid);

    std::string csv = "x,x_original,mean\n";
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double x = grid[j];
        const double xo = data.domain() ? data.domain()->to_original(x) : x;
        csv += fmt::format("{},{},{}\n", x, xo, mean[static_cast<Eigen::Index>(j)]);
    }
    emit(manifest, s.out + "_mean.csv", csv);
    if (s.curves) {
        std::string curves;
        for (int i = 0; i < data.subjects(); ++i) {
            const Eigen::VectorXd fit = scbcov::eval_fit(fits, scbcov::FitComponent::trajectory(i), grid);
            for (Eigen::Index j = 0; j < fit.size(); ++j) {
                curves += fmt::format("{}{}", j == 0 ? "" : ",", fit[j]);
            }
            curves += "\n";
        }
        emit(manifest, s.out + "_fitted.csv", curves);
    }
    json config = to_json(s);
    config["interior_knots_used"] = knots;
    if (data.domain()) {
        config["rescale"] = {{"a", data.domain()->a}, {"b", data.domain()->b}, {"scale", data.domain()->scale()}};
    }
    manifest.write(s.out + "_manifest.json", config, o.seed);
}

double resolve_lag_scale(const DataSettings& s, const scbcov::FunctionalDataset& data) {
    if (!s.lag_scale) {
        return data.lag_scale();
    }
    if (!(*s.lag_scale > 0.0)) {
        throw scbcov::InvalidArgument(fmt::format("--lag-scale must be positive, got {}", *s.lag_scale));
    }
    if (data.domain() && std::abs(*s.lag_scale - data.lag_scale()) > 1e-9 * data.lag_scale()) {
        throw scbcov::InvalidArgument(fmt::format(
            "lag range mismatch: the grid header implies a lag scale of {} but --lag-scale is {}", data.lag_scale(),
            *s.lag_scale));
    }
    return *s.lag_scale;
}

json pipeline_summary(const scbcov::PipelineResult& res, const scbcov::FunctionalDataset& data, double scale) {
    std::vector<double> original(res.c_hat.h_grid.size());
    for (std::size_t t = 0; t < original.size(); ++t) {
        original[t] = res.c_hat.h_grid[t] * scale;
    }
    return json{{"n", data.subjects()},
                {"N", data.grid_size()},
                {"interior_knots", res.interior_knots},
                {"kappa", res.fpca.kappa},
                {"lambda", vec(res.fpca.lambda.head(res.fpca.kappa))},
                {"fourth_moments", vec(res.fpca.fourth_moments)},
                {"degenerate", res.degenerate},
                {"lag_scale", scale},
                {"h_grid", res.c_hat.h_grid},
                {"h_original", original},
                {"c_hat", vec(res.c_hat.values)},
                {"xi", vec(res.xi.values)}};
}

void run_band(const DataSettings& s) {
    Manifest manifest("band");
    manifest.add_input(s.input);
    const auto loaded = scbcov::load_dataset_csv(s.input, s.header);
    const double scale = resolve_lag_scale(s, loaded.data);
    const auto res = scbcov::run_pipeline(loaded.data, s.pipeline);

    json out = pipeline_summary(res, loaded.data, scale);
    json bands = json::array();
    for (std::size_t l = 0; l < res.simultaneous.size(); ++l) {
        bands.push_back(scbcov::band_to_json(res.simultaneous[l], res.xi, scale));
        bands.push_back(scbcov::band_to_json(res.pointwise[l], res.xi, scale));
    }
    out["bands"] = bands;
    std::vector<scbcov::BandResult> all = res.simultaneous;
    all.insert(all.end(), res.pointwise.begin(), res.pointwise.end());
    emit(manifest, s.out + "_band.json", out.dump(2) + "\n");
    emit(manifest, s.out + "_band.csv", scbcov::bands_csv(all, res.xi, scale));
    manifest.write(s.out + "_manifest.json", to_json(s), s.pipeline.seed);
}

void run_test(const DataSettings& s) {
    Manifest manifest("test");
    manifest.add_input(s.input);
    const auto model = scbcov::parse_model_spec(*s.model);
    const auto loaded = scbcov::load_dataset_csv(s.input, s.header);
    const double scale = resolve_lag_scale(s, loaded.data);
    const auto res = scbcov::run_pipeline(loaded.data, s.pipeline);
    if (res.degenerate) {
        throw scbcov::NumericalError("test: the estimated covariance surface vanishes; no null distribution available");
    }
    const double max_lag = res.c_hat.max_lag() * scale;
    const double step = scale / loaded.data.grid_size();
    const double reach = scbcov::effective_range(model);
    if (reach < step) {
        throw scbcov::DataError(fmt::format(
            "lag range mismatch: model {} decorrelates by lag {} but the data resolve lags only in steps of {} "
            "(maximum lag {}); pass --header or --lag-scale to give lags in model units",
            model.to_string(), reach, step, max_lag));
    }
    if (reach > 1000.0 * max_lag) {
        throw scbcov::DataError(fmt::format(
            "lag range mismatch: model {} decorrelates by lag {} but the data only reach lag {}; "
            "pass --header or --lag-scale to give lags in model units",
            model.to_string(), reach, max_lag));
    }
    const auto gof = scbcov::gof_test(res.c_hat, res.xi, loaded.data.subjects(), model, res.sups, scale);

    json out = pipeline_summary(res, loaded.data, scale);
    out["test"] = scbcov::gof_to_json(gof);
    out["test"]["model_parameters"] = {{"family", scbcov::to_string(model.family)},
                                       {"sill", model.sill},
                                       {"range", model.range},
                                       {"smoothness", model.smoothness ? json(*model.smoothness) : json(nullptr)}};
    out["test"]["model_effective_range"] = reach;
    out["test"]["data_max_lag"] = max_lag;
    emit(manifest, s.out + "_gof.json", out.dump(2) + "\n");
    manifest.write(s.out + "_manifest.json", to_json(s), s.pipeline.seed);
}

struct SimulateSettings {
    std::string config_path;
    std::string out;
    scbcov::SimConfig config;
};

void run_simulate(const SimulateSettings& s, const std::string& input_for_manifest) {
    Manifest manifest("simulate");
    if (!input_for_manifest.empty()) {
        manifest.add_input(input_for_manifest);
    }
    const auto report = scbcov::run_replications(s.config);
    emit(manifest, s.out + "_report.json", scbcov::to_json(report).dump(2) + "\n");
    emit(manifest, s.out + "_table.csv", scbcov::report_csv(report));
    json config = scbcov::to_json(s.config);
    config["out"] = s.out;
    config["config_path"] = s.config_path;
    manifest.write(s.out + "_manifest.json", config, s.config.seed);
}

void run_replay(const std::string& manifest_path, const std::optional<std::string>& out_override) {
    const json m = json::parse(scbcov::read_text_file(manifest_path));
    const std::string command = m.at("command").get<std::string>();
    json config = m.at("config");
    if (command == "simulate") {
        SimulateSettings s;
        s.out = out_override.value_or(config.at("out").get<std::string>());
        s.config_path = config.value("config_path", "");
        config.erase("out");
        config.erase("config_path");
        s.config = scbcov::parse_sim_config(config.dump());
        run_simulate(s, "");
        return;
    }
    DataSettings s = data_settings_from_json(config);
    if (out_override) {
        s.out = *out_override;
    }
    if (command == "fit") {
        run_fit(s);
    } else if (command == "band") {
        run_band(s);
    } else if (command == "test") {
        run_test(s);
    } else {
        throw scbcov::InvalidArgument(fmt::format("manifest names unknown command '{}'", command));
    }
}

// Flags shared by fit, band and test.
struct DataFlags {
    std::string input;
    bool header = false;
    std::string out;
    int order = 4;
    std::string knots = "formula";
    double knot_c = 0.8;
    double knot_gamma = 0.375;
    std::optional<int> num_knots;
    double h0 = 0.5;
    std::vector<double> alpha;
    int reps = scbcov::kDefaultZetaReps;
    std::uint64_t seed = 1;
    double fve = 0.95;
    std::string xi_form = "c_hat_squared";
    std::string coupling = "independent";
    int quad_points = 0;
    int workers = 1;
    bool curves = false;
    std::optional<std::string> model;
    std::optional<double> lag_scale;

    DataSettings resolve() const {
        DataSettings s;
        s.input = input;
        s.header = header;
        s.out = out.empty() ? default_prefix(input) : out;
        s.curves = curves;
        s.model = model;
        s.lag_scale = lag_scale;
        auto& o = s.pipeline;
        o.order = order;
        o.knots = scbcov::KnotSelection{scbcov::parse_knot_method(knots), knot_c, knot_gamma};
        o.interior_knots = num_knots;
        o.h0 = h0;
        o.alphas = alpha.empty() ? std::vector<double>{0.05} : alpha;
        o.zeta_reps = reps;
        o.seed = seed;
        o.fve = fve;
        o.xi_form = scbcov::parse_xi_form(xi_form);
        o.coupling = scbcov::parse_zeta_coupling(coupling);
        o.quad_points = quad_points;
        o.workers = workers;
        return s;
    }
};

void add_data_flags(CLI::App* cmd, DataFlags& f, bool estimation) {
    cmd->add_option("input", f.input, "CSV file, one subject per row")->required()->check(CLI::ExistingFile);
    cmd->add_flag("--header", f.header, "First row holds the grid x_1..x_N in original units");
    cmd->add_option("-o,--out", f.out, "Output prefix (default: input path without extension)");
    cmd->add_option("--order", f.order, "Spline order p")->capture_default_str();
    cmd->add_option("--knots", f.knots, "Knot rule: formula, gcv or bic")->capture_default_str();
    cmd->add_option("--knot-c", f.knot_c, "Constant c of the knot formula")->capture_default_str();
    cmd->add_option("--knot-gamma", f.knot_gamma, "Exponent gamma of the knot formula")->capture_default_str();
    cmd->add_option("--num-knots", f.num_knots, "Fix the number of interior knots");
    if (!estimation) {
        return;
    }
    cmd->add_option("--h0", f.h0, "Largest lag on the unit scale, in (0, 1]")->capture_default_str();
    cmd->add_option("--alpha", f.alpha, "Significance level; repeat for several bands");
    cmd->add_option("--reps", f.reps, "Simulated copies of the limiting process")->capture_default_str();
    cmd->add_option("--seed", f.seed, "Seed of the multiplier simulation")->capture_default_str();
    cmd->add_option("--fve", f.fve, "Fraction of variance explained by the retained components")->capture_default_str();
    cmd->add_option("--xi-form", f.xi_form, "Variance function: c_hat_squared or cross_products")->capture_default_str();
    cmd->add_option("--coupling", f.coupling, "Multiplier coupling: independent or symmetric")->capture_default_str();
    cmd->add_option("--quad-points", f.quad_points, "Trapezoid nodes per lag (0: N)")->capture_default_str();
    cmd->add_option("--workers", f.workers, "Threads for the multiplier simulation")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simultaneous confidence bands and tests for stationary covariance functions of dense functional data"};
    app.set_version_flag("--version", SCBCOV_VERSION);
    app.require_subcommand(1);

    DataFlags fit_flags;
    auto* fit = app.add_subcommand("fit", "Fit spline trajectories and write the mean curve");
    add_data_flags(fit, fit_flags, false);
    fit->add_flag("--curves", fit_flags.curves, "Also write every fitted trajectory");

    DataFlags band_flags;
    auto* band = app.add_subcommand("band", "Estimate C(h) with simultaneous and pointwise bands");
    add_data_flags(band, band_flags, true);
    band->add_option("--lag-scale", band_flags.lag_scale, "Original-unit length of the unit lag");

    DataFlags test_flags;
    auto* test = app.add_subcommand("test", "Test a parametric covariance model");
    add_data_flags(test, test_flags, true);
    test->add_option("--model", test_flags.model, "e.g. gaussian:sill=2,range=3")->required();
    test->add_option("--lag-scale", test_flags.lag_scale, "Original-unit length of the unit lag");

    std::string sim_config;
    std::optional<std::uint64_t> sim_seed;
    std::optional<int> sim_reps;
    std::optional<int> sim_workers;
    std::string sim_out;
    auto* simulate = app.add_subcommand("simulate", "Run a Monte-Carlo experiment from a config file");
    simulate->add_option("--config", sim_config, "JSON or key = value config")->required()->check(CLI::ExistingFile);
    simulate->add_option("--seed", sim_seed, "Master seed")->required();
    simulate->add_option("--reps", sim_reps, "Override the number of replications");
    simulate->add_option("--workers", sim_workers, "Worker threads");
    simulate->add_option("-o,--out", sim_out, "Output prefix (default: config path without extension)");

    std::string replay_manifest;
    std::optional<std::string> replay_out;
    auto* replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
    replay->add_option("manifest", replay_manifest, "Manifest JSON")->required()->check(CLI::ExistingFile);
    replay->add_option("-o,--out", replay_out, "Output prefix (default: the recorded one)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*fit) {
            run_fit(fit_flags.resolve());
        } else if (*band) {
            run_band(band_flags.resolve());
        } else if (*test) {
            run_test(test_flags.resolve());
        } else if (*simulate) {
            SimulateSettings s;
            s.config_path = sim_config;
            s.config = scbcov::parse_sim_config(scbcov::read_text_file(sim_config));
            s.config.seed = *sim_seed;
            if (sim_reps) {
                s.config.reps = *sim_reps;
            }
            if (sim_workers) {
                s.config.workers = *sim_workers;
            }
            s.config.validate();
            s.out = sim_out.empty() ? default_prefix(sim_config) : sim_out;
            run_simulate(s, sim_config);
        } else if (*replay) {
            run_replay(replay_manifest, replay_out);
        }
    } catch (const scbcov::InvalidArgument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const scbcov::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const scbcov::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const json::exception& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return 0;
}

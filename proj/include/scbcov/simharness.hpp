#pragma once

#include "scbcov/covest.hpp"
#include "scbcov/covmodels.hpp"
#include "scbcov/fpca.hpp"
#include "scbcov/pipeline.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace scbcov {

enum class GeneratorKind { fourier, spatial };

/// Heteroscedastic noise shapes sigma(x) / sigma_eps.
///  ratio5_x:     (5 - e^x) / (5 + e^x)
///  ratio5_half:  (5 - e^{x/2}) / (5 + e^{x/2})
///  ratio30_half: (30 - e^{x/2}) / (30 + e^{x/2})
/// `automatic` picks ratio5_x for the Fourier generator and the spherical
/// model, ratio30_half otherwise. x is in original units.
enum class NoiseShape { automatic, ratio5_x, ratio5_half, ratio30_half };

std::string to_string(GeneratorKind kind);
std::string to_string(NoiseShape shape);

struct SimConfig {
    GeneratorKind generator = GeneratorKind::fourier;
    std::optional<CovModelSpec> model;  // spatial only
    int n = 40;
    int N = 50;
    /// Overrides n with floor(0.8 N).
    bool paper_default_n = true;
    double sigma_eps = 0.1;
    /// Multiplies the latent process Z (and so its covariance by the square).
    double process_scale = 1.0;
    bool hetero = false;
    NoiseShape hetero_shape = NoiseShape::automatic;
    KnotMethod knots = KnotMethod::formula;
    double knot_c = 0.8;
    double knot_gamma = 0.375;
    int order = 4;
    double h0 = 0.5;
    int reps = 200;
    std::vector<double> alpha = {0.05, 0.01};
    std::uint64_t seed = 0;
    int zeta_reps = 1000;
    double fve = 0.95;
    int workers = 1;
    int fourier_terms = 1000;
    XiForm xi_form = XiForm::c_hat_squared;
    ZetaCoupling coupling = ZetaCoupling::independent;
    int quad_points = 0;

    int subjects() const;
    /// Every problem with the configuration, empty when valid.
    std::vector<std::string> problems() const;
    /// Throws InvalidArgument listing all problems at once.
    void validate() const;
    PipelineOptions pipeline_options(std::uint64_t replicate) const;
};

/// Reads a JSON object or TOML-style `key = value` lines. Keys mirror the
/// SimConfig field names; unknown keys and bad values are all reported together.
SimConfig parse_sim_config(std::string_view text);
nlohmann::json to_json(const SimConfig& config);

/// Quantities known only inside a simulation.
struct SimTruth {
    Eigen::VectorXd mean;        // m on the grid
    CovCurve covariance;         // C on the unit-scale lag grid
    Eigen::VectorXd lambda;      // empty for spatial models
    Eigen::MatrixXd phi;         // N x K, empty for spatial models
    Eigen::MatrixXd surface;     // G on the N x N grid
    Eigen::MatrixXd z;           // realized processes, n x N
    double lag_scale = 1.0;      // unit lag h corresponds to h * lag_scale
};

struct SimSample {
    FunctionalDataset data;
    SimTruth truth;
};

/// Closed-form stationary covariance of the Fourier generator at unit-scale
/// lag h, truncated after `terms` eigenpairs.
double fourier_covariance(double h, int terms = 50);
/// lambda_k = (1/4)^{floor(k/2)}, k = 1..terms.
Eigen::VectorXd fourier_eigenvalues(int terms);
/// sqrt(2) cos(2 k pi x) for odd index 2k-1, sqrt(2) sin(2 k pi x) for 2k (1-based).
double fourier_basis(int index, double x);

SimSample gen_fourier_data(const SimConfig& config, std::uint64_t replicate);
SimSample gen_spatial_data(const SimConfig& config, std::uint64_t replicate);
SimSample generate(const SimConfig& config, std::uint64_t replicate);

struct LevelSummary {
    double alpha = 0.05;
    double cr = 0.0;        // band centered at C_hat
    double cr_tilde = 0.0;  // same half-width centered at C_tilde
    double wd = 0.0;
};

struct ReplicateOutcome {
    bool ok = false;
    std::string error;
    double amse_c = 0.0;
    double amse_c_tilde = 0.0;
    double amse_lambda = 0.0;
    double amse_g = 0.0;
    double amse_phi = 0.0;
    double amse_phi_unaligned = 0.0;
    int interior_knots = 0;
    int kappa = 0;
    std::vector<bool> covered;
    std::vector<bool> covered_tilde;
    std::vector<double> width;
};

/// Generates replicate r and runs the full pipeline on it.
ReplicateOutcome run_replicate(const SimConfig& config, std::uint64_t replicate);

struct SimReport {
    SimConfig config;
    int reps_done = 0;
    int failures = 0;
    std::vector<std::string> failure_messages;
    double amse_C = 0.0;
    double amse_Ctilde = 0.0;
    double amse_lambda = 0.0;
    double amse_G = 0.0;
    double amse_phi = 0.0;
    double amse_phi_unaligned = 0.0;
    double mean_knots = 0.0;
    double mean_kappa = 0.0;
    std::vector<LevelSummary> levels;
    std::uint64_t seed = 0;
};

/// Runs all replicates on `config.workers` threads and averages in replicate
/// order, so the report does not depend on the worker count. Throws
/// NumericalError when more than 5% of the replicates fail.
SimReport run_replications(const SimConfig& config);

nlohmann::json to_json(const SimReport& report);
/// One header line and one data row in the paper's table layout.
std::string report_csv(const SimReport& report);

}  // namespace scbcov

#pragma once

#include "scbcov/band.hpp"
#include "scbcov/covest.hpp"
#include "scbcov/pipeline.hpp"

#include <json.hpp>

#include <istream>
#include <string>
#include <vector>

namespace scbcov {

/// Parsed dataset plus the original-unit grid when the file carried one.
struct LoadedDataset {
    FunctionalDataset data;
    std::vector<double> original_grid;  // empty without a header row
};

/// Reads one subject per row, N numeric columns. With `header` the first row
/// holds the equally spaced grid x_1..x_N, which fixes the domain so that
/// x_j sits at unit position j/N. `source` names the input in error messages.
LoadedDataset read_dataset_csv(std::istream& in, bool header, const std::string& source = "input");
LoadedDataset load_dataset_csv(const std::string& path, bool header);

/// Domain [a, b] with a + (b - a) j / N = x_j. Throws DataError unless the
/// grid is increasing and equally spaced.
Domain domain_from_grid(const std::vector<double>& xs);

nlohmann::json curve_to_json(const CovCurve& curve);
nlohmann::json band_to_json(const BandResult& band, const CovCurve& xi, double lag_scale);
/// One row per band and lag: kind, level, h, h_original, center, lower, upper, xi.
std::string bands_csv(const std::vector<BandResult>& bands, const CovCurve& xi, double lag_scale);
nlohmann::json gof_to_json(const GofResult& result);

/// Every pipeline setting, with defaults materialized.
nlohmann::json to_json(const PipelineOptions& options);
/// Inverse of to_json; missing keys keep their defaults, unknown keys throw.
PipelineOptions pipeline_options_from_json(const nlohmann::json& j);

/// Throws DataError when the file cannot be opened.
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace scbcov

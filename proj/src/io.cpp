#include "scbcov/io.hpp"

#include "scbcov/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace scbcov {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return cells;
}

double parse_cell(std::string_view cell, const std::string& source, int row, std::size_t col) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (!cell.empty() && *first == '+') {
        ++first;
    }
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (cell.empty() || ec != std::errc() || ptr != last) {
        throw DataError(fmt::format("{}: row {}, column {}: '{}' is not a number", source, row, col + 1, cell));
    }
    if (!std::isfinite(v)) {
        throw DataError(fmt::format("{}: row {}, column {}: value '{}' is not finite", source, row, col + 1, cell));
    }
    return v;
}

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

Domain domain_from_grid(const std::vector<double>& xs) {
    const std::size_t N = xs.size();
    if (N < 2) {
        throw DataError("grid header needs at least 2 points");
    }
    const double step = (xs.back() - xs.front()) / static_cast<double>(N - 1);
    if (!(step > 0.0)) {
        throw DataError("grid header must be increasing");
    }
    for (std::size_t j = 0; j < N; ++j) {
        const double expected = xs.front() + step * static_cast<double>(j);
        if (std::abs(xs[j] - expected) > 1e-3 * step) {
            throw DataError(fmt::format("grid header is not equally spaced at column {} ({} vs {})", j + 1, xs[j],
                                        expected));
        }
    }
    return Domain{xs.front() - step, xs.back()};
}

LoadedDataset read_dataset_csv(std::istream& in, bool header, const std::string& source) {
    std::vector<std::vector<double>> rows;
    std::vector<double> grid;
    std::string line;
    int line_no = 0;
    std::size_t width = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto cells = split(line);
        if (first) {
            width = cells.size();
        } else if (cells.size() != width) {
            throw DataError(fmt::format("{}: row {} has {} columns, expected {}", source, line_no, cells.size(), width));
        }
        std::vector<double> values(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            values[c] = parse_cell(cells[c], source, line_no, c);
        }
        if (first && header) {
            grid = std::move(values);
        } else {
            rows.push_back(std::move(values));
        }
        first = false;
    }
    if (rows.empty()) {
        throw DataError(fmt::format("{}: no data rows", source));
    }
    Eigen::MatrixXd y(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < width; ++j) {
            y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    std::optional<Domain> domain;
    if (header) {
        try {
            domain = domain_from_grid(grid);
        } catch (const DataError& e) {
            throw DataError(fmt::format("{}: {}", source, e.what()));
        }
    }
    return LoadedDataset{FunctionalDataset(std::move(y), domain), std::move(grid)};
}

LoadedDataset load_dataset_csv(const std::string& path, bool header) {
    std::ifstream in(path);
    if (!in) {
        throw DataError(fmt::format("cannot open {}", path));
    }
    return read_dataset_csv(in, header, path);
}

json curve_to_json(const CovCurve& curve) {
    return json{{"kind", to_string(curve.kind)}, {"h_grid", curve.h_grid}, {"values", vec(curve.values)}};
}

json band_to_json(const BandResult& band, const CovCurve& xi, double lag_scale) {
    std::vector<double> original(band.center.h_grid.size());
    for (std::size_t t = 0; t < original.size(); ++t) {
        original[t] = band.center.h_grid[t] * lag_scale;
    }
    std::vector<std::size_t> floored;
    const auto mask = floored_lags(xi);
    for (std::size_t t = 0; t < mask.size(); ++t) {
        if (mask[t]) {
            floored.push_back(t);
        }
    }
    return json{{"kind", to_string(band.kind)},
                {"level", band.level},
                {"q", band.q},
                {"n", band.n},
                {"h_grid", band.center.h_grid},
                {"h_original", original},
                {"center", vec(band.center.values)},
                {"lower", vec(band.lower.values)},
                {"upper", vec(band.upper.values)},
                {"xi", vec(xi.values)},
                {"floored_lags", floored},
                {"mean_width", band.mean_width()}};
}

std::string bands_csv(const std::vector<BandResult>& bands, const CovCurve& xi, double lag_scale) {
    std::string out = "kind,level,h,h_original,center,lower,upper,xi\n";
    for (const auto& band : bands) {
        for (std::size_t t = 0; t < band.center.h_grid.size(); ++t) {
            const auto i = static_cast<Eigen::Index>(t);
            const double h = band.center.h_grid[t];
            out += fmt::format("{},{},{},{},{},{},{},{}\n", to_string(band.kind), band.level, h, h * lag_scale,
                               band.center.values[i], band.lower.values[i], band.upper.values[i], xi.values[i]);
        }
    }
    return out;
}

json gof_to_json(const GofResult& result) {
    json decisions = json::array();
    for (const auto& d : result.decisions) {
        decisions.push_back({{"alpha", d.alpha}, {"reject", d.reject}});
    }
    return json{{"model", result.model},
                {"statistic", result.statistic},
                {"p_value", result.p_value},
                {"decisions", decisions},
                {"h_original", result.lags_original},
                {"null_curve", result.null_curve},
                {"excluded_lags", result.excluded_lags}};
}

json to_json(const PipelineOptions& o) {
    return json{{"order", o.order},
                {"knots", to_string(o.knots.method)},
                {"knot_c", o.knots.c},
                {"knot_gamma", o.knots.gamma},
                {"interior_knots", o.interior_knots ? json(*o.interior_knots) : json(nullptr)},
                {"h0", o.h0},
                {"quad_points", o.quad_points},
                {"fve", o.fve},
                {"zeta_reps", o.zeta_reps},
                {"seed", o.seed},
                {"alpha", o.alphas},
                {"xi_form", to_string(o.xi_form)},
                {"coupling", to_string(o.coupling)},
                {"workers", o.workers}};
}

PipelineOptions pipeline_options_from_json(const json& j) {
    PipelineOptions o;
    for (const auto& [key, v] : j.items()) {
        if (key == "order") {
            o.order = v.get<int>();
        } else if (key == "knots") {
            o.knots.method = parse_knot_method(v.get<std::string>());
        } else if (key == "knot_c") {
            o.knots.c = v.get<double>();
        } else if (key == "knot_gamma") {
            o.knots.gamma = v.get<double>();
        } else if (key == "interior_knots") {
            o.interior_knots = v.is_null() ? std::nullopt : std::optional<int>(v.get<int>());
        } else if (key == "h0") {
            o.h0 = v.get<double>();
        } else if (key == "quad_points") {
            o.quad_points = v.get<int>();
        } else if (key == "fve") {
            o.fve = v.get<double>();
        } else if (key == "zeta_reps") {
            o.zeta_reps = v.get<int>();
        } else if (key == "seed") {
            o.seed = v.get<std::uint64_t>();
        } else if (key == "alpha") {
            o.alphas = v.get<std::vector<double>>();
        } else if (key == "xi_form") {
            o.xi_form = parse_xi_form(v.get<std::string>());
        } else if (key == "coupling") {
            o.coupling = parse_zeta_coupling(v.get<std::string>());
        } else if (key == "workers") {
            o.workers = v.get<int>();
        } else {
            throw InvalidArgument(fmt::format("unknown pipeline setting '{}'", key));
        }
    }
    return o;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError(fmt::format("cannot write {}", path));
    }
    out << text;
    if (!out) {
        throw DataError(fmt::format("failed writing {}", path));
    }
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError(fmt::format("cannot open {}", path));
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace scbcov

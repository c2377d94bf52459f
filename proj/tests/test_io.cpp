#include "scbcov/errors.hpp"
#include "scbcov/io.hpp"

#include <doctest.h>

#include <sstream>
#include <string>

using namespace scbcov;

namespace {

LoadedDataset read(const std::string& text, bool header = false) {
    std::istringstream in(text);
    return read_dataset_csv(in, header, "data.csv");
}

std::string read_error(const std::string& text, bool header = false) {
    try {
        read(text, header);
    } catch (const DataError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("csv reading") {
    const auto d = read("1,2,3\n4, 5 ,6\n\n+7,8e-1,-9\n");
    CHECK(d.data.subjects() == 3);
    CHECK(d.data.grid_size() == 3);
    CHECK(d.data.observations()(2, 1) == 0.8);
    CHECK(d.original_grid.empty());
    CHECK(!d.data.domain());
}

TEST_CASE("csv errors name the row and column") {
    CHECK(read_error("1,2,3\n4,5\n") == "data.csv: row 2 has 2 columns, expected 3");
    CHECK(read_error("1,2,3\n4,x,6\n") == "data.csv: row 2, column 2: 'x' is not a number");
    CHECK(read_error("1,2,3\n4,,6\n").find("column 2") != std::string::npos);
    CHECK(read_error("1,2,3\n4,inf,6\n").find("not finite") != std::string::npos);
    CHECK(read_error("") == "data.csv: no data rows");
    CHECK(read_error("1,2,3\n", true) == "data.csv: no data rows");
    CHECK(read_error("1,2\n3,4\n5,6\n").empty());
    CHECK(read_error("1\n2\n").find("grid points") != std::string::npos);
}

TEST_CASE("header grid fixes the domain") {
    std::string text = "1100";
    for (int j = 1; j < 20; ++j) {
        text += "," + std::to_string(1100 + 73.578947368 * j);
    }
    text += "\n";
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 20; ++j) {
            text += (j ? "," : "") + std::to_string(i + j);
        }
        text += "\n";
    }
    const auto d = read(text, true);
    REQUIRE(d.data.domain());
    const Domain dom = *d.data.domain();
    CHECK(dom.b == doctest::Approx(2498.0).epsilon(1e-9));
    CHECK(dom.to_original(1.0 / 20.0) == doctest::Approx(1100.0).epsilon(1e-9));
    CHECK(dom.to_original(1.0) == doctest::Approx(2498.0).epsilon(1e-9));
    CHECK(d.data.lag_scale() == doctest::Approx(20.0 * 1398.0 / 19.0).epsilon(1e-9));
    CHECK(d.original_grid.size() == 20);

    CHECK(read_error("0,1,3\n1,2,3\n", true).find("equally spaced") != std::string::npos);
    CHECK(read_error("3,2,1\n1,2,3\n", true).find("increasing") != std::string::npos);
    CHECK_THROWS_AS(domain_from_grid({1.0}), DataError);
}

TEST_CASE("pipeline options round trip") {
    PipelineOptions o;
    o.order = 3;
    o.interior_knots = 5;
    o.alphas = {0.1, 0.01};
    o.xi_form = XiForm::cross_products;
    o.coupling = ZetaCoupling::symmetric;
    o.seed = 123456789012345ULL;
    const auto j = to_json(o);
    const auto back = pipeline_options_from_json(j);
    CHECK(to_json(back) == j);
    CHECK(back.interior_knots.value() == 5);
    CHECK(back.seed == o.seed);
    CHECK(!pipeline_options_from_json(to_json(PipelineOptions{})).interior_knots);
    CHECK_THROWS_AS(pipeline_options_from_json(nlohmann::json{{"colour", 1}}), InvalidArgument);
}

TEST_CASE("band serialization") {
    const std::vector<double> h = {0.0, 0.5};
    const CovCurve c{h, Eigen::Vector2d(1.0, 0.25), CurveKind::c_hat};
    const CovCurve xi{h, Eigen::Vector2d(4.0, kXiFloor), CurveKind::xi_hat};
    const auto band = scb(c, xi, 2.0, 16, 0.95);
    const auto j = band_to_json(band, xi, 10.0);
    for (const char* key : {"level", "q", "h_grid", "center", "lower", "upper", "kind", "floored_lags"}) {
        CHECK(j.contains(key));
    }
    CHECK(j["h_original"][1] == 5.0);
    CHECK(j["lower"][0] == 0.0);
    CHECK(j["floored_lags"] == nlohmann::json::array({1}));
    const std::string csv = bands_csv({band}, xi, 10.0);
    CHECK(csv.rfind("kind,level,h,h_original,center,lower,upper,xi\n", 0) == 0);
    CHECK(csv.find("simultaneous,0.95,0.5,5,0.25,") != std::string::npos);

    // Shortest round-trip form of doubles.
    const double third = 1.0 / 3.0;
    CHECK(nlohmann::json::parse(nlohmann::json(third).dump()).get<double>() == third);
}

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "catch_amalgamated.hpp"
#include "charn/io.hpp"
#include "charn/noise.hpp"

using namespace charn;
using namespace charn::io;
using Catch::Approx;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("charn_test_io_" + name);
}

}  // namespace

TEST_CASE("CSV parsing accepts the documented layouts", "[io]") {
    CHECK(parse_csv("1.0\n2.0\n3.0\n").size() == 3);
    const auto with_header = parse_csv("value\n1.5\n-2\n");
    CHECK(with_header.size() == 2);
    CHECK(with_header[1] == -2.0);
    CHECK_FALSE(with_header.origin_label());

    const auto labelled = parse_csv("t,value\n1913,0.25\n1914,0.5\n\n\n");
    CHECK(labelled.size() == 2);
    CHECK(labelled.origin_label() == 1913);

    const auto swapped = parse_csv("value,t\n7,2000\n8,2001\n");
    CHECK(swapped[0] == 7.0);
    CHECK(swapped.origin_label() == 2000);

    const auto bare = parse_csv("10,3.5\n11,4.5\n");
    CHECK(bare.origin_label() == 10);
    CHECK(bare[1] == 4.5);
}

TEST_CASE("CSV parsing reports the offending row", "[io]") {
    try {
        (void)parse_csv("value\n1\n2\n3\n4\n5\n\n7\n");
        FAIL("expected a ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("row 7") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_csv(""), ParseError);
    CHECK_THROWS_AS(parse_csv("value\n"), ParseError);
    CHECK_THROWS_AS(parse_csv("value\n1\nnan\n"), ParseError);
    CHECK_THROWS_AS(parse_csv("value\n1\nabc\n"), ParseError);
    CHECK_THROWS_AS(parse_csv("a,b\n1,2\n"), ParseError);
    CHECK_THROWS_AS(parse_csv("1,2,3\n"), ParseError);
}

TEST_CASE("CSV round trip is bit exact", "[io]") {
    const auto values = NoiseDensity::gaussian().sample(500, 1);
    std::vector<double> xs(values);
    xs.push_back(1e-300);
    xs.push_back(-0.1);
    xs.push_back(1.0 / 3.0);
    const TimeSeries x(xs, 1950);
    const auto path = temp_file("roundtrip.csv");
    save_csv(path.string(), x);
    const auto y = load_csv(path.string());
    std::filesystem::remove(path);
    REQUIRE(y.size() == x.size());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
    CHECK(y.origin_label() == 1950);
    CHECK_THROWS_AS(load_csv(temp_file("missing.csv").string()), ConfigError);
}

TEST_CASE("moving average of a line is exact", "[io]") {
    std::vector<double> xs;
    for (int t = 1; t <= 50; ++t) xs.push_back(2.5 + 0.75 * t);
    const auto d = detrend_ma(TimeSeries(xs), 5);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        CHECK(std::abs(d.residual[i]) <= 1e-12);
        CHECK(d.trend[i] == Approx(xs[i]).epsilon(1e-14));
    }
}

TEST_CASE("moving average of a constant is the constant", "[io]") {
    const auto d = detrend_ma(TimeSeries(std::vector<double>(20, 0.1)), 7);
    for (std::size_t i = 0; i < 20; ++i) {
        CHECK(d.trend[i] == 0.1);
        CHECK(d.residual[i] == 0.0);
    }
}

TEST_CASE("order one returns the series as its trend", "[io]") {
    const auto x = TimeSeries(NoiseDensity::gaussian().sample(30, 2));
    const auto d = detrend_ma(x, 1);
    for (std::size_t i = 0; i < 30; ++i) {
        CHECK(d.trend[i] == x[i]);
        CHECK(d.residual[i] == 0.0);
    }
}

TEST_CASE("moving average endpoints and errors", "[io]") {
    const TimeSeries x({1.0, 2.0, 6.0, 4.0, 5.0, 9.0, 7.0});
    const auto shrink = detrend_ma(x, 5);
    CHECK(shrink.trend.size() == 7);
    CHECK(shrink.trend[0] == 1.0);
    CHECK(shrink.trend[1] == Approx(3.0));
    CHECK(shrink.trend[3] == Approx(26.0 / 5.0));
    const auto drop = detrend_ma(TimeSeries({1.0, 2.0, 6.0, 4.0, 5.0, 9.0, 7.0}, 1900), 5, EndpointMode::Drop);
    CHECK(drop.trend.size() == 3);
    CHECK(drop.offset == 2);
    CHECK(drop.trend.origin_label() == 1902);
    CHECK(drop.trend[0] == Approx(18.0 / 5.0));
    CHECK_THROWS_AS(detrend_ma(x, 4), ConfigError);
    CHECK_THROWS_AS(detrend_ma(x, 7), ConfigError);
}

TEST_CASE("moving-average residual of white noise is centred", "[io]") {
    const auto x = TimeSeries(NoiseDensity::gaussian().sample(500, 3));
    const auto d = detrend_ma(x, 5);
    double mean = 0.0;
    for (double v : d.residual.values()) mean += v;
    mean /= 500.0;
    CHECK(std::abs(mean) <= 3.0 / std::sqrt(500.0));
}

TEST_CASE("flat configuration files", "[io]") {
    const std::set<std::string> allowed{"n", "alpha", "priors", "circular", "beta", "name"};
    const auto c = Config::parse("# comment\nn = 200\nalpha=0.05  # level\npriors = 50, 140\ncircular = true\nbeta=0,1.5\n",
                                 allowed);
    CHECK(c.get_size("n", 0) == 200);
    CHECK(c.get_double("alpha", 0.1) == 0.05);
    CHECK(c.get_sizes("priors") == std::vector<std::size_t>{50, 140});
    CHECK(c.get_bool("circular", false));
    CHECK(c.get_doubles("beta") == std::vector<double>{0.0, 1.5});
    CHECK(c.get("name", "x") == "x");
    CHECK_THROWS_AS(Config::parse("bogus = 1\n", allowed), ConfigError);
    CHECK_THROWS_AS(Config::parse("n = 1\nn = 2\n", allowed), ConfigError);
    CHECK_THROWS_AS(Config::parse("n 1\n", allowed), ConfigError);
    CHECK_THROWS_AS(Config::parse("n = -1\n", allowed).get_size("n", 0), ConfigError);
    CHECK_THROWS_AS(Config::parse("alpha = x\n", allowed).get_double("alpha", 0), ConfigError);
    CHECK_THROWS_AS(Config::parse("circular = maybe\n", allowed).get_bool("circular", false), ConfigError);
}

TEST_CASE("tables render as CSV", "[io]") {
    Table t{{"a", "b"}, {}};
    t.add({"1", "x"});
    t.add({"2", "y"});
    CHECK(t.to_csv() == "a,b\n1,x\n2,y\n");
    CHECK_THROWS_AS(t.add({"3"}), ConfigError);
    CHECK(format_double(0.1) == "0.10000000000000001");
}

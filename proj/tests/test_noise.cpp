#include <algorithm>
#include <cmath>
#include <vector>

#include "catch_amalgamated.hpp"
#include "charn/noise.hpp"

using namespace charn;
using Catch::Approx;

namespace {

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double var_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST_CASE("gaussian score and Fisher information are exact", "[noise]") {
    const auto g = NoiseDensity::gaussian();
    CHECK(score(g, 0.0) == 0.0);
    CHECK(score(g, 2.5) == -2.5);
    for (double x : {-7.3, -1.0, 0.25, 3.0}) CHECK(score(g, x) + x == 0.0);
    CHECK(fisher_info(g) == 1.0);
}

TEST_CASE("gaussian sampler is standardized and reproducible", "[noise]") {
    const auto g = NoiseDensity::gaussian();
    const auto a = sample(g, 100000, 3);
    CHECK(std::abs(mean_of(a)) < 0.02);
    CHECK(std::abs(var_of(a) - 1.0) < 0.02);
    CHECK(sample(g, 1000, 9) == sample(g, 1000, 9));
    CHECK(sample(g, 1000, 9) != sample(g, 1000, 10));
}

TEST_CASE("shifted exponential sampler lives on (-1, inf) with mean 0", "[noise]") {
    for (double rate : {1.0, 1.25, 3.0}) {
        const auto e = NoiseDensity::shifted_exponential(rate);
        const auto a = sample(e, 100000, 5);
        CHECK(*std::min_element(a.begin(), a.end()) >= -1.0);
        CHECK(std::abs(mean_of(a)) < 0.02);
        CHECK(std::abs(var_of(a) - 1.0) < 0.03);
    }
}

TEST_CASE("shifted exponential has a degenerate centred score", "[noise]") {
    const auto e = NoiseDensity::shifted_exponential(1.25);
    CHECK(fisher_info(e) == 0.0);
    CHECK_FALSE(e.has_usable_score());
    CHECK(score(e, 0.5) == 0.0);
    CHECK_THROWS_AS(score(e, -1.5), DomainError);
    CHECK(e.density(-2.0) == 0.0);
    CHECK(e.density(0.0) == Approx(std::exp(-1.0)));
    CHECK_THROWS_AS(e.log_density(-2.0), LogDomainError);
    CHECK(e.with_fisher_override(1.5625).fisher() == 1.5625);
    CHECK_THROWS_AS(e.with_fisher_override(0.0), ConfigError);
    CHECK_THROWS_AS(NoiseDensity::shifted_exponential(0.0), ConfigError);
}

TEST_CASE("kernel estimate on standard normal draws", "[noise]") {
    const auto draws = sample(NoiseDensity::gaussian(), 10000, 17);
    const auto f = kde_fit(draws);
    CHECK(f.kind() == NoiseKind::KernelEstimate);
    CHECK(f.fisher() == Approx(1.0).margin(0.2));
    CHECK(score(f, 1.0) == Approx(-1.0).margin(0.15));
    CHECK(f.table()->mass == Approx(1.0).margin(0.02));
    CHECK(f.table()->bandwidth == Approx(std::pow(10000.0, -0.2)));
}

TEST_CASE("kernel estimate keeps the scale of its input", "[noise]") {
    auto draws = sample(NoiseDensity::gaussian(), 10000, 19);
    for (double& v : draws) v *= 2.0;
    const auto f = kde_fit(draws);
    const auto* t = f.table();
    double m1 = 0.0;
    double m2 = 0.0;
    double mass = 0.0;
    for (std::size_t i = 0; i < t->density.size(); ++i) {
        const double x = t->lo + t->step * static_cast<double>(i);
        m1 += x * t->density[i] * t->step;
        m2 += x * x * t->density[i] * t->step;
        mass += t->density[i] * t->step;
    }
    const double var = m2 / mass - (m1 / mass) * (m1 / mass);
    CHECK(var == Approx(4.0).margin(0.3));
}

TEST_CASE("kernel estimate is translation equivariant", "[noise]") {
    const auto draws = sample(NoiseDensity::gaussian(), 2000, 23);
    std::vector<double> moved(draws);
    for (double& v : moved) v += 3.0;
    KdeConfig cfg;
    cfg.grid_points = 4096;
    const auto f = kde_fit(draws, cfg);
    const auto g = kde_fit(moved, cfg);
    // The grids are shifted copies of each other, so grid nodes line up exactly.
    const auto* t = f.table();
    for (std::size_t i = 100; i < t->density.size(); i += 397) {
        const double x = t->lo + t->step * static_cast<double>(i);
        CHECK(std::abs(f.score(x) - g.score(x + 3.0)) <= 1e-6);
    }
    CHECK(f.fisher() == Approx(g.fisher()).epsilon(1e-9));
}

TEST_CASE("kernel estimate preconditions", "[noise]") {
    const auto draws = sample(NoiseDensity::gaussian(), 10, 1);
    CHECK_THROWS_AS(kde_fit(draws), DegenerateError);
    const std::vector<double> flat(50, 1.0);
    CHECK_THROWS_AS(kde_fit(flat), DegenerateError);
    KdeConfig bad;
    bad.bandwidth = -1.0;
    CHECK_THROWS_AS(kde_fit(sample(NoiseDensity::gaussian(), 50, 1), bad), ConfigError);
}

TEST_CASE("kernel sampler resamples the fitted density", "[noise]") {
    const auto f = kde_fit(sample(NoiseDensity::gaussian(), 5000, 29));
    const auto a = sample(f, 50000, 31);
    CHECK(std::abs(mean_of(a)) < 0.05);
    const double h = f.table()->bandwidth;
    CHECK(var_of(a) == Approx(1.0 + h * h).margin(0.08));
    CHECK(a == sample(f, 50000, 31));
}

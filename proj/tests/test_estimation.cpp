#include <algorithm>
#include <cmath>
#include <vector>

#include "catch_amalgamated.hpp"
#include "charn/estimation.hpp"
#include "charn/simulate.hpp"

using namespace charn;
using Catch::Approx;

TEST_CASE("QMLE recovers an AR(1) coefficient", "[estimation]") {
    const std::size_t n = 2000;
    const Segmentation seg(n, {});
    const auto x = simulate(CharnSpec::ar1(0.5), seg, MeanShiftParams::null(1), NoiseDensity::gaussian(), n, 12);
    const std::vector<double> g{0.0};
    const CharnSpec start = CharnSpec::ar1(0.0);
    const auto fit = fit_psi(x, start, seg, g, ParamBounds::defaults_for(start));
    CHECK(fit.converged);
    CHECK(fit.psi_hat[0] >= 0.45);
    CHECK(fit.psi_hat[0] <= 0.55);

    // Least-squares closed form over the same index set.
    double num = 0.0;
    double den = 0.0;
    for (std::size_t t = 2; t <= n; ++t) {
        num += x.at(t) * x.at(t - 1);
        den += x.at(t - 1) * x.at(t - 1);
    }
    CHECK(fit.psi_hat[0] == Approx(num / den).margin(1e-4));
    CHECK(fit.psi_hat[1] == Approx(1.0).margin(0.05));
}

TEST_CASE("QMLE is deterministic and no worse than the truth", "[estimation]") {
    const std::size_t n = 600;
    const Segmentation seg(n, {});
    const CharnSpec truth = CharnSpec::expar({0.5, 0.2, 50}, {0.1, 0.0025, 1});
    const auto x = simulate(truth, seg, MeanShiftParams::null(1), NoiseDensity::gaussian(), n, 13);
    const std::vector<double> g{0.0};
    FitOptions opt;
    opt.seed = 99;
    opt.extra_starts = {pack_psi(truth)};
    const CharnSpec start = CharnSpec::expar({0.3, 0.0, 10}, {0.2, 0.01, 1});
    const auto a = fit_psi(x, start, seg, g, ParamBounds::defaults_for(start), opt);
    const auto b = fit_psi(x, start, seg, g, ParamBounds::defaults_for(start), opt);
    CHECK(a.psi_hat == b.psi_hat);
    CHECK(a.neg_loglik == b.neg_loglik);
    CHECK(a.iterations == b.iterations);
    CHECK(a.neg_loglik <= gaussian_neg_loglik(x, truth, g, seg) + 1e-6);
}

TEST_CASE("constant series is flagged degenerate", "[estimation]") {
    const std::size_t n = 50;
    const Segmentation seg(n, {});
    const TimeSeries x(std::vector<double>(n, 0.0));
    const std::vector<double> g{0.0};
    const CharnSpec start = CharnSpec::ar1(0.2);
    const auto fit = fit_psi(x, start, seg, g, ParamBounds::defaults_for(start));
    CHECK(fit.degenerate);
    CHECK(std::isfinite(fit.neg_loglik));
}

TEST_CASE("fit_psi preconditions", "[estimation]") {
    const Segmentation seg(15, {});
    const auto x = simulate(CharnSpec::ar1(0.5), seg, MeanShiftParams::null(1), NoiseDensity::gaussian(), 15, 1);
    const std::vector<double> g{0.0};
    const CharnSpec start = CharnSpec::ar1(0.0);
    CHECK_THROWS_AS(fit_psi(x, start, seg, g, ParamBounds::defaults_for(start)), ConfigError);
    ParamBounds wrong;
    wrong.lower = {0.0};
    wrong.upper = {1.0};
    const Segmentation big(100, {});
    const auto y = simulate(CharnSpec::ar1(0.5), big, MeanShiftParams::null(1), NoiseDensity::gaussian(), 100, 1);
    CHECK_THROWS_AS(fit_psi(y, start, big, g, wrong), ConfigError);
}

TEST_CASE("bounds are respected", "[estimation]") {
    const std::size_t n = 500;
    const Segmentation seg(n, {});
    const auto x = simulate(CharnSpec::ar1(0.8), seg, MeanShiftParams::null(1), NoiseDensity::gaussian(), n, 14);
    const std::vector<double> g{0.0};
    const CharnSpec start = CharnSpec::ar1(0.0);
    ParamBounds b = ParamBounds::defaults_for(start);
    b.upper[0] = 0.3;
    const auto fit = fit_psi(x, start, seg, g, b);
    CHECK(fit.psi_hat[0] <= 0.3);
    CHECK(fit.psi_hat[0] == Approx(0.3).margin(1e-3));
}

TEST_CASE("fit_gamma0 with constant trend and volatility", "[estimation]") {
    const auto wn = CharnSpec::white_noise();
    CHECK(fit_gamma0(TimeSeries({1.0, 2.0, 3.0}), Segmentation(3, {}), wn) == std::vector<double>{2.0});

    std::vector<double> xs(20, 1.5);
    for (std::size_t i = 8; i < 20; ++i) xs[i] = -0.25;
    const auto two = fit_gamma0(TimeSeries(xs), Segmentation(20, {9}), wn);
    CHECK(two[0] == Approx(1.5).epsilon(1e-12));
    CHECK(two[1] == Approx(-0.25).epsilon(1e-12));

    const auto x = simulate(wn, Segmentation(90, {30, 60}), {{0, 1, 2}, {0, 0, 0}}, NoiseDensity::gaussian(), 90, 3);
    const auto g = fit_gamma0(x, Segmentation(90, {30, 60}), wn);
    for (std::size_t j = 0; j < 3; ++j) {
        double s = 0.0;
        const std::size_t lo = j == 0 ? 1 : j == 1 ? 30 : 60;
        const std::size_t hi = j == 0 ? 30 : j == 1 ? 60 : 91;
        for (std::size_t t = lo; t < hi; ++t) s += x.at(t);
        CHECK(std::abs(g[j] - s / static_cast<double>(hi - lo)) <= 1e-12);
    }
}

TEST_CASE("fit_gamma0 with non-constant volatility matches a grid search", "[estimation]") {
    const std::size_t n = 300;
    const CharnSpec spec = CharnSpec::expar({0.5, 0.2, 50}, {0.1, 0.0025, 1});
    const Segmentation seg(n, {150});
    const auto x = simulate(spec, seg, {{0.2, -0.1}, {0, 0}}, NoiseDensity::gaussian(), n, 15);
    const auto got = fit_gamma0(x, seg, spec);
    const double step = 1e-4;
    for (std::size_t j = 0; j < 2; ++j) {
        double best = 0.0;
        double best_val = INFINITY;
        for (double c = -1.0; c <= 1.0; c += step) {
            std::vector<double> gamma = got;
            gamma[j] = c;
            const double v = gaussian_neg_loglik(x, spec, gamma, seg);
            if (v < best_val) best_val = v, best = c;
        }
        CHECK(std::abs(got[j] - best) <= step);
    }
}

TEST_CASE("QMLE error shrinks with n", "[estimation]") {
    const CharnSpec truth = CharnSpec::ar1(0.5);
    const CharnSpec start = CharnSpec::ar1(0.0);
    std::vector<double> medians;
    for (std::size_t n : {500, 1000, 2000}) {
        const Segmentation seg(n, {});
        const std::vector<double> g{0.0};
        std::vector<double> err;
        for (std::uint64_t r = 0; r < 200; ++r) {
            const auto x = simulate(truth, seg, MeanShiftParams::null(1), NoiseDensity::gaussian(), n, 7000 + r);
            FitOptions opt;
            opt.restarts = 0;
            const auto fit = fit_psi(x, start, seg, g, ParamBounds::defaults_for(start), opt);
            err.push_back(std::hypot(fit.psi_hat[0] - 0.5, fit.psi_hat[1] - 1.0));
        }
        std::nth_element(err.begin(), err.begin() + 100, err.end());
        medians.push_back(err[100]);
    }
    CHECK(medians[1] <= medians[0]);
    CHECK(medians[2] <= medians[1]);
}

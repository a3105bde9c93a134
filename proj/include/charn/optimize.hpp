#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace charn::optimize {

struct NelderMeadOptions {
    double f_tol = 1e-8;         // spread of objective values over the simplex
    double x_tol = 1e-6;         // simplex diameter
    std::size_t max_iter = 2000;
    double initial_step = 0.1;   // relative step for the initial simplex
};

struct NelderMeadResult {
    std::vector<double> x;
    double value = std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;
    bool converged = false;
};

/// Derivative-free simplex minimization (standard reflection/expansion/contraction/shrink).
/// Non-finite objective values are treated as +infinity.
inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& objective,
                                    std::vector<double> x0, const NelderMeadOptions& opt = {}) {
    const std::size_t d = x0.size();
    auto f = [&](const std::vector<double>& x) {
        const double v = objective(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };
    if (d == 0) return {x0, f(x0), 0, true};

    std::vector<std::vector<double>> simplex(d + 1, x0);
    for (std::size_t i = 0; i < d; ++i) {
        const double step = x0[i] != 0.0 ? opt.initial_step * std::abs(x0[i]) : opt.initial_step;
        simplex[i + 1][i] += step;
    }
    std::vector<double> values(d + 1);
    for (std::size_t i = 0; i <= d; ++i) values[i] = f(simplex[i]);

    std::vector<std::size_t> order(d + 1);
    NelderMeadResult result;
    for (result.iterations = 0; result.iterations < opt.max_iter; ++result.iterations) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second = order[d - 1];

        double diameter = 0.0;
        for (std::size_t i = 0; i <= d; ++i) {
            double dist = 0.0;
            for (std::size_t k = 0; k < d; ++k) dist = std::max(dist, std::abs(simplex[i][k] - simplex[best][k]));
            diameter = std::max(diameter, dist);
        }
        const double spread = values[worst] - values[best];
        if (diameter < opt.x_tol && (spread < opt.f_tol || !std::isfinite(spread))) {
            result.converged = true;
            break;
        }

        std::vector<double> centroid(d, 0.0);
        for (std::size_t i = 0; i <= d; ++i) {
            if (i == worst) continue;
            for (std::size_t k = 0; k < d; ++k) centroid[k] += simplex[i][k] / static_cast<double>(d);
        }
        auto along = [&](double coef) {
            std::vector<double> p(d);
            for (std::size_t k = 0; k < d; ++k) p[k] = centroid[k] + coef * (simplex[worst][k] - centroid[k]);
            return p;
        };

        auto reflected = along(-1.0);
        const double fr = f(reflected);
        if (fr < values[best]) {
            auto expanded = along(-2.0);
            const double fe = f(expanded);
            if (fe < fr) {
                simplex[worst] = std::move(expanded);
                values[worst] = fe;
            } else {
                simplex[worst] = std::move(reflected);
                values[worst] = fr;
            }
            continue;
        }
        if (fr < values[second]) {
            simplex[worst] = std::move(reflected);
            values[worst] = fr;
            continue;
        }
        const bool outside = fr < values[worst];
        auto contracted = along(outside ? -0.5 : 0.5);
        const double fc = f(contracted);
        if (fc < (outside ? fr : values[worst])) {
            simplex[worst] = std::move(contracted);
            values[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i <= d; ++i) {
            if (i == best) continue;
            for (std::size_t k = 0; k < d; ++k) simplex[i][k] = simplex[best][k] + 0.5 * (simplex[i][k] - simplex[best][k]);
            values[i] = f(simplex[i]);
        }
    }
    const auto best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
    result.x = simplex[best];
    result.value = values[best];
    return result;
}

}  // namespace charn::optimize

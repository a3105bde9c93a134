#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "charn/error.hpp"
#include "charn/model.hpp"
#include "charn/normal.hpp"

namespace charn {

struct CusumOutcome {
    double statistic = 0.0;
    std::size_t location = 1;  // last index before the estimated change, in [1, n-1]
    bool reject = false;
    double sigma = 0.0;        // long-run standard deviation used for scaling
    double critical = 0.0;
};

/// Bartlett-kernel long-run variance with lag floor(n^(1/3)).
inline double bartlett_long_run_variance(std::span<const double> x) {
    const std::size_t n = x.size();
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    auto autocov = [&](std::size_t lag) {
        double s = 0.0;
        for (std::size_t t = lag; t < n; ++t) s += (x[t] - mean) * (x[t - lag] - mean);
        return s / static_cast<double>(n);
    };
    const auto lag = static_cast<std::size_t>(std::floor(std::cbrt(static_cast<double>(n))));
    double lrv = autocov(0);
    for (std::size_t l = 1; l <= lag && l < n; ++l)
        lrv += 2.0 * (1.0 - static_cast<double>(l) / static_cast<double>(lag + 1)) * autocov(l);
    return lrv;
}

/// Standard CUSUM: max_j |S_j - (j/n) S_n| / (sigma sqrt(n)), compared with the
/// Kolmogorov 1 - alpha quantile.
inline CusumOutcome cusum_statistic(const TimeSeries& series, double alpha = 0.05) {
    const std::size_t n = series.size();
    if (n < 4) throw ConfigError("cusum_statistic needs n >= 4");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    const auto x = series.values();
    const double lrv = bartlett_long_run_variance(x);
    if (!(lrv > 0.0)) throw DegenerateError("cusum_statistic: zero long-run variance");

    double total = 0.0;
    for (double v : x) total += v;
    CusumOutcome out;
    out.sigma = std::sqrt(lrv);
    double partial = 0.0;
    double best = -1.0;
    const double nd = static_cast<double>(n);
    for (std::size_t j = 1; j < n; ++j) {
        partial += x[j - 1];
        const double d = std::abs(partial - static_cast<double>(j) / nd * total);
        if (d > best) {
            best = d;
            out.location = j;
        }
    }
    out.statistic = best / (out.sigma * std::sqrt(nd));
    out.critical = stats::kolmogorov_quantile(alpha);
    out.reject = out.statistic > out.critical;
    return out;
}

}  // namespace charn

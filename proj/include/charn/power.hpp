#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "charn/error.hpp"
#include "charn/model.hpp"
#include "charn/noise.hpp"
#include "charn/normal.hpp"

namespace charn {

/// Local power at a candidate break vector.
struct PowerResult {
    std::vector<std::size_t> locations;
    std::vector<double> beta_hat;
    double varpi_hat = 0.0;
    double power = 0.0;
};

/// 1 - Phi(z_alpha - varpi). Equals alpha exactly at varpi = 0.
inline double theoretical_power(double varpi, double alpha) {
    if (varpi < 0.0 || std::isnan(varpi)) throw DomainError("theoretical_power: varpi must be >= 0");
    const double z = stats::z_alpha(alpha);
    if (varpi == 0.0) return alpha;
    return stats::norm_cdf(varpi - z);
}

/// Reference level gamma_hat_{0j} used to turn segment means into break magnitudes.
enum class ReferenceLevel {
    PreviousSegment,  // gamma_hat_{0j} = mean of segment j-1
    Historical,       // gamma_hat_{0j} = mean of segment 1 for every j
};

struct BetaOptions {
    ReferenceLevel reference = ReferenceLevel::PreviousSegment;
    std::optional<std::vector<double>> gamma0;  // overrides `reference` when set
};

namespace detail {

inline double reference_level(const BetaOptions& opt, std::span<const double> means, std::size_t j) {
    if (opt.gamma0) return (*opt.gamma0)[j];
    return opt.reference == ReferenceLevel::Historical ? means[0] : means[j - 1];
}

}  // namespace detail

/// beta_hat_1 = 0 and beta_hat_j = sqrt(n) (mean_j - gamma_hat_{0j}) for j >= 2,
/// with segment means taken over [t_{j-1}, t_j) (last segment closed).
inline std::vector<double> estimate_beta(const TimeSeries& x, const Segmentation& seg, const BetaOptions& opt = {}) {
    if (seg.n() != x.size()) throw ConfigError("estimate_beta: segmentation n does not match");
    const std::size_t segments = seg.segment_count();
    if (opt.gamma0 && opt.gamma0->size() != segments) throw ConfigError("estimate_beta: gamma0 must have length k+1");
    std::vector<double> means(segments, 0.0);
    for (std::size_t j = 1; j <= segments; ++j) {
        if (seg.length(j) == 0) throw DegenerateError("estimate_beta: empty segment");
        double s = 0.0;
        for (std::size_t t = seg.begin(j); t < seg.end(j); ++t) s += x.at(t);
        means[j - 1] = s / static_cast<double>(seg.length(j));
    }
    const double root_n = std::sqrt(static_cast<double>(x.size()));
    std::vector<double> beta(segments, 0.0);
    for (std::size_t j = 1; j < segments; ++j) beta[j] = root_n * (means[j] - detail::reference_level(opt, means, j));
    return beta;
}

/// Estimated local power over many candidate break vectors of one series.
///
/// Precomputes the trend-adjusted series Y_t = X_t - T(Z_{t-1}) and the weights
/// V^-2(Z_{t-1}) as prefix sums, so each candidate costs O(k). I(f) is fixed at
/// construction. For a Constant trend the segment means of Y are those of X.
class PowerEvaluator {
public:
    PowerEvaluator(const TimeSeries& x, const CharnSpec& spec, const NoiseDensity& noise, double alpha,
                   BetaOptions beta_options = {}, std::optional<LagState> init = std::nullopt)
        : n_(x.size()), alpha_(alpha), fisher_(noise.fisher()), options_(std::move(beta_options)) {
        spec.validate();
        (void)stats::z_alpha(alpha);
        if (!(fisher_ > 0.0)) throw UnusableScoreError("power evaluation needs I(f) > 0");
        sum_y_.assign(n_ + 1, 0.0);
        sum_w_.assign(n_ + 1, 0.0);
        count_.assign(n_ + 1, 0);
        std::vector<double> y(n_ + 1, 0.0);
        std::vector<double> w(n_ + 1, 0.0);
        std::vector<char> used(n_ + 1, 0);
        detail::walk_lags(x, spec, init, [&](std::size_t t, std::span<const double>, double trend, double vol) {
            y[t] = x.at(t) - trend;
            w[t] = 1.0 / (vol * vol);
            used[t] = 1;
        });
        for (std::size_t t = 1; t <= n_; ++t) {
            sum_y_[t] = sum_y_[t - 1] + y[t];
            sum_w_[t] = sum_w_[t - 1] + w[t];
            count_[t] = count_[t - 1] + used[t];
        }
    }

    [[nodiscard]] std::size_t n() const noexcept { return n_; }
    [[nodiscard]] double alpha() const noexcept { return alpha_; }
    [[nodiscard]] double fisher() const noexcept { return fisher_; }

    /// Power for breaks over the whole series.
    [[nodiscard]] PowerResult evaluate(std::span<const std::size_t> breaks) const { return evaluate_window(1, n_, breaks); }

    /// Power on the sub-series [first, last] (inclusive, 1-based), whose length stands in for n.
    [[nodiscard]] PowerResult evaluate_window(std::size_t first, std::size_t last, std::span<const std::size_t> breaks) const {
        if (first < 1 || last > n_ || first > last) throw RangeError("evaluate_window: bad window");
        std::vector<std::vector<Range>> groups;
        std::size_t start = first;
        for (std::size_t b : breaks) {
            if (b <= start || b > last) throw ConfigError("evaluate_window: breaks must be increasing inside the window");
            groups.push_back({{start, b}});
            start = b;
        }
        groups.push_back({{start, last + 1}});
        PowerResult r = evaluate_groups(groups, last - first + 1);
        r.locations.assign(breaks.begin(), breaks.end());
        return r;
    }

    /// Half-open index range [begin, end).
    struct Range {
        std::size_t begin;
        std::size_t end;
    };

    /// General form: segment j is the union of `groups[j]`; `n_local` is the sample size.
    [[nodiscard]] PowerResult evaluate_groups(const std::vector<std::vector<Range>>& groups, std::size_t n_local) const {
        const std::size_t segments = groups.size();
        if (options_.gamma0 && options_.gamma0->size() != segments)
            throw ConfigError("power: gamma0 must have length k+1");
        std::vector<double> means(segments);
        std::vector<double> mu2(segments);
        std::vector<double> lengths(segments);
        for (std::size_t j = 0; j < segments; ++j) {
            double sy = 0.0;
            double sw = 0.0;
            std::size_t c = 0;
            std::size_t len = 0;
            for (const Range& r : groups[j]) {
                sy += sum_y_[r.end - 1] - sum_y_[r.begin - 1];
                sw += sum_w_[r.end - 1] - sum_w_[r.begin - 1];
                c += count_[r.end - 1] - count_[r.begin - 1];
                len += r.end - r.begin;
            }
            if (c == 0) throw DegenerateError("power: segment " + std::to_string(j + 1) + " has no usable index");
            means[j] = sy / static_cast<double>(c);
            mu2[j] = fisher_ * sw / static_cast<double>(c);
            lengths[j] = static_cast<double>(len);
        }
        const double nl = static_cast<double>(n_local);
        const double root_n = std::sqrt(nl);
        PowerResult out;
        out.beta_hat.assign(segments, 0.0);
        double mu = 0.0;
        for (std::size_t j = 1; j < segments; ++j) {
            const double b = root_n * (means[j] - detail::reference_level(options_, means, j));
            out.beta_hat[j] = b;
            mu += lengths[j] / nl * b * b * mu2[j];
        }
        out.varpi_hat = std::sqrt(mu);
        out.power = theoretical_power(out.varpi_hat, alpha_);
        return out;
    }

private:
    std::size_t n_;
    double alpha_;
    double fisher_;
    BetaOptions options_;
    std::vector<double> sum_y_;
    std::vector<double> sum_w_;
    std::vector<std::size_t> count_;
};

/// P_hat_{k,t^k}: beta_hat from segment means, varpi_hat from the plug-in mu_hat, then the power formula.
inline PowerResult estimated_power(const TimeSeries& x, const CharnSpec& spec, const Segmentation& seg,
                                   const NoiseDensity& noise, double alpha, const BetaOptions& opt = {}) {
    if (seg.n() != x.size()) throw ConfigError("estimated_power: segmentation n does not match");
    return PowerEvaluator(x, spec, noise, alpha, opt).evaluate(seg.breaks());
}

/// One entry of a power surface; `result` is empty when the candidate failed.
struct SurfaceEntry {
    std::optional<PowerResult> result;
    std::string error;
};

using PowerSurface = std::map<std::vector<std::size_t>, SurfaceEntry>;

/// Estimated power for every candidate, keyed (and therefore ordered) lexicographically by break vector.
inline PowerSurface power_surface(const TimeSeries& x, const CharnSpec& spec, std::span<const Segmentation> candidates,
                                  const NoiseDensity& noise, double alpha, const BetaOptions& opt = {}) {
    if (candidates.empty()) throw ConfigError("power_surface: empty candidate list");
    const PowerEvaluator eval(x, spec, noise, alpha, opt);
    PowerSurface surface;
    for (const Segmentation& seg : candidates) {
        std::vector<std::size_t> key(seg.breaks().begin(), seg.breaks().end());
        SurfaceEntry entry;
        try {
            if (seg.n() != x.size()) throw ConfigError("candidate segmentation n does not match");
            entry.result = eval.evaluate(seg.breaks());
        } catch (const Error& e) {
            entry.error = e.what();
        }
        surface.emplace(std::move(key), std::move(entry));
    }
    return surface;
}

}  // namespace charn

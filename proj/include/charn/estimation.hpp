#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "charn/error.hpp"
#include "charn/model.hpp"
#include "charn/optimize.hpp"
#include "charn/rng.hpp"

namespace charn {

/// Box constraints on psi = (rho, theta).
struct ParamBounds {
    std::vector<double> lower;
    std::vector<double> upper;

    /// Defaults per family; they encode V_theta > 0.
    static ParamBounds defaults_for(const CharnSpec& spec) {
        ParamBounds b;
        auto add = [&](double lo, double hi) {
            b.lower.push_back(lo);
            b.upper.push_back(hi);
        };
        switch (spec.trend) {
            case TrendFamily::Constant:
                for (std::size_t i = 0; i < spec.rho.size(); ++i) add(-1e6, 1e6);
                break;
            case TrendFamily::LinearAR:
                for (std::size_t i = 0; i < spec.p; ++i) add(-5.0, 5.0);
                break;
            case TrendFamily::Expar:
                add(-5.0, 5.0);
                add(-50.0, 50.0);
                add(0.0, 1000.0);
                break;
        }
        if (spec.vol == VolFamily::Constant) {
            add(1e-6, 1e6);
        } else {
            add(1e-6, 1e6);
            add(0.0, 1e6);
            add(0.0, 1000.0);
        }
        return b;
    }
};

struct FitOptions {
    std::size_t restarts = 3;
    std::uint64_t seed = 0;
    std::size_t max_iter_per_dim = 2000;
    double f_tol = 1e-8;
    double x_tol = 1e-6;
    /// Additional starting points (full psi vectors), e.g. the generating parameters.
    std::vector<std::vector<double>> extra_starts;
};

struct FitResult {
    std::vector<double> psi_hat;  // (rho, theta)
    std::vector<double> gamma0_hat;
    double neg_loglik = std::numeric_limits<double>::infinity();
    bool converged = false;
    std::size_t iterations = 0;
    bool projected = false;   // some candidate point left the box and was clamped
    bool degenerate = false;  // zero-variance input or volatility pinned at its lower bound
    CharnSpec spec;           // the template with psi_hat filled in
};

/// psi = (rho, theta) of a spec.
inline std::vector<double> pack_psi(const CharnSpec& spec) {
    std::vector<double> psi(spec.rho);
    psi.insert(psi.end(), spec.theta.begin(), spec.theta.end());
    return psi;
}

inline CharnSpec unpack_psi(const CharnSpec& tmpl, std::span<const double> psi) {
    CharnSpec s = tmpl;
    const std::size_t nr = tmpl.trend_arity();
    if (psi.size() != nr + tmpl.vol_arity()) throw ConfigError("psi has the wrong length for this spec");
    s.rho.assign(psi.begin(), psi.begin() + static_cast<std::ptrdiff_t>(nr));
    s.theta.assign(psi.begin() + static_cast<std::ptrdiff_t>(nr), psi.end());
    return s;
}

/// Gaussian conditional negative log-likelihood sum_t [log V + eps^2 / 2] (constants dropped),
/// over t = p+1..n. Returns +inf when the volatility leaves its floor.
inline double gaussian_neg_loglik(const TimeSeries& x, const CharnSpec& spec, std::span<const double> gamma,
                                  const Segmentation& seg) {
    double s = 0.0;
    try {
        detail::walk_lags(x, spec, std::nullopt, [&](std::size_t t, std::span<const double>, double trend, double vol) {
            const double e = (x.at(t) - trend - gamma[seg.segment_of(t) - 1]) / vol;
            s += std::log(vol) + 0.5 * e * e;
        });
    } catch (const VolatilityFloorError&) {
        return std::numeric_limits<double>::infinity();
    }
    return std::isfinite(s) ? s : std::numeric_limits<double>::infinity();
}

/// Gaussian QMLE of psi with gamma held at `gamma`.
///
/// Nelder-Mead from the template's parameters, then `restarts` perturbed starts
/// drawn from `opt.seed`, then any extra starts; the best point is polished by one
/// more simplex run. Trial points are clamped into the bounds.
inline FitResult fit_psi(const TimeSeries& x, const CharnSpec& tmpl, const Segmentation& seg,
                         std::span<const double> gamma, const ParamBounds& bounds, const FitOptions& opt = {}) {
    tmpl.validate();
    detail::check_lengths(seg, x.size(), gamma, "gamma");
    const std::vector<double> psi0 = pack_psi(tmpl);
    const std::size_t dim = psi0.size();
    if (bounds.lower.size() != dim || bounds.upper.size() != dim) throw ConfigError("bounds must match psi length");
    if (x.size() < 10 * std::max<std::size_t>(dim, 1))
        throw ConfigError("fit_psi needs n >= 10 * dim(psi) observations");

    bool projected = false;
    auto clamp = [&](std::vector<double> v, bool record) {
        for (std::size_t i = 0; i < dim; ++i) {
            const double c = std::clamp(v[i], bounds.lower[i], bounds.upper[i]);
            if (record && c != v[i]) projected = true;
            v[i] = c;
        }
        return v;
    };
    auto objective = [&](const std::vector<double>& psi) {
        const auto inside = clamp(psi, true);
        CharnSpec s = unpack_psi(tmpl, inside);
        if (s.vol == VolFamily::ExpArch && !(s.theta[0] > 0.0)) return std::numeric_limits<double>::infinity();
        // Out-of-box points are penalized so the simplex is pulled back into the box.
        double penalty = 0.0;
        for (std::size_t i = 0; i < dim; ++i) penalty += (psi[i] - inside[i]) * (psi[i] - inside[i]);
        return gaussian_neg_loglik(x, s, gamma, seg) + 1e6 * penalty;
    };

    optimize::NelderMeadOptions nm;
    nm.f_tol = opt.f_tol;
    nm.x_tol = opt.x_tol;
    nm.max_iter = opt.max_iter_per_dim * std::max<std::size_t>(dim, 1);

    std::vector<std::vector<double>> starts{clamp(psi0, false)};
    Rng rng(splitmix64(opt.seed) ^ 0x5EEDF17ULL);
    for (std::size_t r = 0; r < opt.restarts; ++r) {
        std::vector<double> s = psi0;
        for (double& v : s) v += (std::abs(v) + 0.1) * 0.5 * rng.normal();
        starts.push_back(clamp(std::move(s), false));
    }
    for (const auto& e : opt.extra_starts) {
        if (e.size() != dim) throw ConfigError("extra start has the wrong length");
        starts.push_back(clamp(e, false));
    }

    FitResult best;
    std::size_t iterations = 0;
    optimize::NelderMeadResult best_run;
    for (const auto& s : starts) {
        auto run = optimize::nelder_mead(objective, s, nm);
        iterations += run.iterations;
        // Starting points count as candidates so a restart can never return something worse.
        const double at_start = objective(s);
        if (at_start < run.value) run = {s, at_start, run.iterations, run.converged};
        if (run.value < best_run.value) best_run = std::move(run);
    }
    auto polish = optimize::nelder_mead(objective, best_run.x, nm);
    iterations += polish.iterations;
    if (polish.value <= best_run.value) best_run = std::move(polish);

    projected = false;
    const auto psi_hat = clamp(best_run.x, true);
    best.psi_hat = psi_hat;
    best.spec = unpack_psi(tmpl, psi_hat);
    best.gamma0_hat.assign(gamma.begin(), gamma.end());
    best.neg_loglik = gaussian_neg_loglik(x, best.spec, gamma, seg);
    best.converged = best_run.converged && std::isfinite(best.neg_loglik);
    best.iterations = iterations;
    best.projected = projected;

    const auto values = x.values();
    const bool constant_input = std::all_of(values.begin(), values.end(), [&](double v) { return v == values[0]; });
    const std::size_t nr = tmpl.trend_arity();
    const bool vol_pinned = psi_hat[nr] <= bounds.lower[nr] * (1.0 + 1e-9);
    best.degenerate = constant_input || vol_pinned;
    return best;
}

/// Per-segment Gaussian MLE of gamma0 with psi fixed.
///
/// The criterion sum_t (X_t - T - gamma_j)^2 / (2 V^2) is quadratic in gamma_j, so
/// the maximizer is the V^-2-weighted mean of X_t - T(Z_{t-1}) over segment j. For
/// Constant trend and volatility this is the plain segment mean over all indices.
inline std::vector<double> fit_gamma0(const TimeSeries& x, const Segmentation& seg, const CharnSpec& spec) {
    spec.validate();
    if (seg.n() != x.size()) throw ConfigError("fit_gamma0: segmentation n does not match");
    const std::size_t segments = seg.segment_count();
    std::vector<double> num(segments, 0.0);
    std::vector<double> den(segments, 0.0);
    detail::walk_lags(x, spec, std::nullopt, [&](std::size_t t, std::span<const double>, double trend, double vol) {
        const std::size_t j = seg.segment_of(t) - 1;
        const double w = 1.0 / (vol * vol);
        num[j] += w * (x.at(t) - trend);
        den[j] += w;
    });
    std::vector<double> gamma(segments);
    for (std::size_t j = 0; j < segments; ++j) {
        if (!(den[j] > 0.0)) throw DegenerateError("fit_gamma0: segment " + std::to_string(j + 1) + " is empty");
        gamma[j] = num[j] / den[j];
    }
    return gamma;
}

}  // namespace charn

#pragma once

#include <cmath>
#include <cstdint>

#include "charn/error.hpp"
#include "charn/model.hpp"
#include "charn/noise.hpp"

namespace charn {

/// Simulates X_t = T(Z_{t-1}) + (gamma + beta/sqrt(n))' omega(t) + V(Z_{t-1}) eps_t.
///
/// The recursion starts from Z = 0 and runs `burn_in` discarded steps at the
/// segment-1 level before the n retained points. All noise (burn-in first) comes
/// from one stream seeded by `seed`.
inline SimulatedPath simulate_path(const CharnSpec& spec, const Segmentation& seg, const MeanShiftParams& shift,
                                   const NoiseDensity& noise, std::size_t n, std::uint64_t seed,
                                   std::size_t burn_in = kDefaultBurnIn) {
    spec.validate();
    if (n == 0) throw ConfigError("simulate: n must be >= 1");
    if (seg.n() != n) throw ConfigError("simulate: segmentation n does not match");
    if (shift.gamma.size() != seg.segment_count() || shift.beta.size() != seg.segment_count())
        throw ConfigError("simulate: gamma and beta must have length k+1");

    const std::vector<double> level = shift.local_level(n);
    const std::vector<double> eps = noise.sample(burn_in + n, seed);

    LagState state = LagState::zeros(spec.p);
    std::vector<double> x(n);
    SimulatedPath path;
    for (std::size_t step = 0; step < burn_in + n; ++step) {
        if (step == burn_in) path.initial_state = state;
        const bool retained = step >= burn_in;
        const std::size_t t = retained ? step - burn_in + 1 : 0;
        const double mean = retained ? level[seg.segment_of(t) - 1] : level[0];
        const double v = spec.volatility_at(state.z);
        if (!(v >= spec.vol_floor)) throw SimulationDivergence(step, "volatility below floor");
        const double value = spec.trend_at(state.z) + mean + v * eps[step];
        if (!std::isfinite(value)) throw SimulationDivergence(step, "non-finite value");
        if (retained) x[t - 1] = value;
        state.push(value);
    }
    path.noise.assign(eps.begin() + static_cast<std::ptrdiff_t>(burn_in), eps.end());
    path.series = TimeSeries(std::move(x));
    return path;
}

inline TimeSeries simulate(const CharnSpec& spec, const Segmentation& seg, const MeanShiftParams& shift,
                           const NoiseDensity& noise, std::size_t n, std::uint64_t seed,
                           std::size_t burn_in = kDefaultBurnIn) {
    return simulate_path(spec, seg, shift, noise, n, seed, burn_in).series;
}

}  // namespace charn

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "charn/error.hpp"

namespace charn {

/// Observations X_1..X_n. Indices in the public API are 1-based.
class TimeSeries {
public:
    TimeSeries() = default;
    explicit TimeSeries(std::vector<double> values, std::optional<long> origin_label = std::nullopt)
        : values_(std::move(values)), origin_label_(origin_label) {
        if (values_.empty()) throw ConfigError("time series must contain at least one observation");
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i]))
                throw ConfigError("non-finite observation at t=" + std::to_string(i + 1));
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    /// X_t for 1 <= t <= n.
    [[nodiscard]] double at(std::size_t t) const { return values_.at(t - 1); }
    [[nodiscard]] double operator[](std::size_t zero_based) const noexcept { return values_[zero_based]; }
    [[nodiscard]] std::optional<long> origin_label() const noexcept { return origin_label_; }

private:
    std::vector<double> values_;
    std::optional<long> origin_label_;
};

inline constexpr std::size_t kDefaultMinSegmentLength = 5;

/// Default minimum segment length for a lag order p: max(p + 1, 5).
constexpr std::size_t default_min_segment_length(std::size_t p) noexcept {
    return std::max<std::size_t>(p + 1, kDefaultMinSegmentLength);
}

/// Break locations 1 = t_0 < t_1 < ... < t_k < t_{k+1} = n.
///
/// Segment j (1-based) is [t_{j-1}, t_j); the last segment is closed at n so that
/// every observation belongs to exactly one segment.
class Segmentation {
public:
    Segmentation() = default;

    Segmentation(std::size_t n, std::vector<std::size_t> breaks,
                 std::size_t min_segment_length = kDefaultMinSegmentLength)
        : n_(n), breaks_(std::move(breaks)) {
        if (n_ == 0) throw ConfigError("segmentation requires n >= 1");
        for (std::size_t j = 0; j < breaks_.size(); ++j) {
            const std::size_t t = breaks_[j];
            if (t <= 1 || t > n_)
                throw ConfigError("break " + std::to_string(t) + " outside (1, n]");
            if (j > 0 && t <= breaks_[j - 1]) throw ConfigError("breaks must be strictly increasing");
        }
        // A single segment spans the whole series regardless of its length.
        if (!breaks_.empty()) {
            for (std::size_t j = 1; j <= segment_count(); ++j) {
                if (length(j) < min_segment_length)
                    throw ConfigError("segment " + std::to_string(j) + " has length " +
                                      std::to_string(length(j)) + " < " + std::to_string(min_segment_length));
            }
        }
    }

    [[nodiscard]] std::size_t n() const noexcept { return n_; }
    [[nodiscard]] std::size_t k() const noexcept { return breaks_.size(); }
    [[nodiscard]] std::size_t segment_count() const noexcept { return breaks_.size() + 1; }
    [[nodiscard]] std::span<const std::size_t> breaks() const noexcept { return breaks_; }

    /// First index of segment j (1-based j).
    [[nodiscard]] std::size_t begin(std::size_t j) const { return j == 1 ? 1 : breaks_.at(j - 2); }
    /// One past the last index of segment j.
    [[nodiscard]] std::size_t end(std::size_t j) const { return j == segment_count() ? n_ + 1 : breaks_.at(j - 1); }
    [[nodiscard]] std::size_t length(std::size_t j) const { return end(j) - begin(j); }

    /// Segment number (1-based) containing index t.
    [[nodiscard]] std::size_t segment_of(std::size_t t) const {
        if (t < 1 || t > n_) throw RangeError("index " + std::to_string(t) + " outside [1, n]");
        return static_cast<std::size_t>(std::upper_bound(breaks_.begin(), breaks_.end(), t) - breaks_.begin()) + 1;
    }

    /// Segment indicator omega(t) as a unit vector of length k+1.
    [[nodiscard]] std::vector<double> omega(std::size_t t) const {
        std::vector<double> w(segment_count(), 0.0);
        w[segment_of(t) - 1] = 1.0;
        return w;
    }

    friend bool operator==(const Segmentation&, const Segmentation&) = default;

private:
    std::size_t n_ = 0;
    std::vector<std::size_t> breaks_;
};

enum class TrendFamily { Constant, LinearAR, Expar };
enum class VolFamily { Constant, ExpArch };

inline const char* to_string(TrendFamily f) noexcept {
    switch (f) {
        case TrendFamily::Constant: return "constant";
        case TrendFamily::LinearAR: return "linear-ar";
        case TrendFamily::Expar: return "expar";
    }
    return "?";
}

inline const char* to_string(VolFamily f) noexcept {
    switch (f) {
        case VolFamily::Constant: return "constant";
        case VolFamily::ExpArch: return "exp-arch";
    }
    return "?";
}

/// Parametric trend/volatility pair (T_rho, V_theta) of a CHARN(p) model.
///
/// Trend families:
///   Constant  T(z) = c, rho = () (c = 0) or rho = (c)
///   LinearAR  T(z) = sum_i rho_i z_i, rho in R^p
///   Expar     T(z) = (rho_1 + rho_2 z_1 exp(-rho_3 z_1^2)) z_1
/// Volatility families:
///   Constant  V(z) = theta_1
///   ExpArch   V(z) = sqrt(theta_1 + theta_2 z_1^2 exp(-theta_3 z_1^2)), theta_1 > 0, theta_2 >= 0
struct CharnSpec {
    std::size_t p = 0;
    TrendFamily trend = TrendFamily::Constant;
    std::vector<double> rho;
    VolFamily vol = VolFamily::Constant;
    std::vector<double> theta{1.0};
    double vol_floor = 1e-8;

    static CharnSpec white_noise(double sigma = 1.0) { return {0, TrendFamily::Constant, {}, VolFamily::Constant, {sigma}}; }

    static CharnSpec ar1(double rho1, double sigma = 1.0) {
        return {1, TrendFamily::LinearAR, {rho1}, VolFamily::Constant, {sigma}};
    }

    static CharnSpec expar(std::vector<double> rho, std::vector<double> theta) {
        return {1, TrendFamily::Expar, std::move(rho), VolFamily::ExpArch, std::move(theta)};
    }

    [[nodiscard]] std::size_t trend_arity() const noexcept {
        switch (trend) {
            case TrendFamily::Constant: return rho.size();
            case TrendFamily::LinearAR: return p;
            case TrendFamily::Expar: return 3;
        }
        return 0;
    }

    [[nodiscard]] std::size_t vol_arity() const noexcept { return vol == VolFamily::Constant ? 1 : 3; }

    /// Throws ConfigError when parameter vectors do not match the families.
    void validate() const {
        if (trend == TrendFamily::Constant && rho.size() > 1)
            throw ConfigError("constant trend takes zero or one parameter");
        if (trend == TrendFamily::LinearAR && (p == 0 || rho.size() != p))
            throw ConfigError("linear-ar trend needs p >= 1 and rho of length p");
        if (trend == TrendFamily::Expar && (p < 1 || rho.size() != 3))
            throw ConfigError("expar trend needs p >= 1 and rho = (rho1, rho2, rho3)");
        if (vol == VolFamily::Constant && theta.size() != 1)
            throw ConfigError("constant volatility takes one parameter");
        if (vol == VolFamily::ExpArch) {
            if (p < 1 || theta.size() != 3) throw ConfigError("exp-arch volatility needs p >= 1 and theta of length 3");
            if (!(theta[0] > 0.0) || theta[1] < 0.0) throw ConfigError("exp-arch needs theta1 > 0 and theta2 >= 0");
        }
        if (!(vol_floor > 0.0)) throw ConfigError("vol_floor must be positive");
        for (double v : rho)
            if (!std::isfinite(v)) throw ConfigError("non-finite trend parameter");
        for (double v : theta)
            if (!std::isfinite(v)) throw ConfigError("non-finite volatility parameter");
    }

    /// T_rho(z) with z = (X_{t-1}, ..., X_{t-p}).
    [[nodiscard]] double trend_at(std::span<const double> z) const noexcept {
        switch (trend) {
            case TrendFamily::Constant: return rho.empty() ? 0.0 : rho[0];
            case TrendFamily::LinearAR: {
                double s = 0.0;
                for (std::size_t i = 0; i < rho.size(); ++i) s += rho[i] * z[i];
                return s;
            }
            case TrendFamily::Expar: {
                const double x = z[0];
                return (rho[0] + rho[1] * x * std::exp(-rho[2] * x * x)) * x;
            }
        }
        return 0.0;
    }

    /// V_theta(z); no floor check.
    [[nodiscard]] double volatility_at(std::span<const double> z) const noexcept {
        if (vol == VolFamily::Constant) return theta[0];
        const double x = z[0];
        return std::sqrt(theta[0] + theta[1] * x * x * std::exp(-theta[2] * x * x));
    }
};

/// Per-segment mean levels gamma and local-alternative magnitudes beta.
struct MeanShiftParams {
    std::vector<double> gamma;
    std::vector<double> beta;

    static MeanShiftParams null(std::size_t segments) {
        return {std::vector<double>(segments, 0.0), std::vector<double>(segments, 0.0)};
    }

    /// gamma + beta / sqrt(n).
    [[nodiscard]] std::vector<double> local_level(std::size_t n) const {
        std::vector<double> g(gamma);
        const double s = std::sqrt(static_cast<double>(n));
        for (std::size_t j = 0; j < g.size(); ++j) g[j] += (j < beta.size() ? beta[j] : 0.0) / s;
        return g;
    }
};

/// Z_t = (X_t, ..., X_{t-p+1}).
struct LagState {
    std::vector<double> z;

    static LagState zeros(std::size_t p) { return {std::vector<double>(p, 0.0)}; }

    /// Pushes a new observation, dropping the oldest.
    void push(double x) noexcept {
        if (z.empty()) return;
        std::copy_backward(z.begin(), z.end() - 1, z.end());
        z.front() = x;
    }
};

namespace detail {

/// Walks t = first..n with the lag state Z_{t-1}, calling fn(t, z, trend, vol).
///
/// With an explicit init, first = 1 and Z_0 = init. Otherwise the first p
/// observations seed the lag state and first = p + 1.
template <class Fn>
void walk_lags(const TimeSeries& x, const CharnSpec& spec, const std::optional<LagState>& init, Fn&& fn) {
    const std::size_t n = x.size();
    const std::size_t p = spec.p;
    LagState state;
    std::size_t first = 1;
    if (init) {
        if (init->z.size() != p) throw ConfigError("initial lag state must have length p");
        state = *init;
    } else {
        state = LagState::zeros(p);
        const std::size_t warm = std::min(p, n);
        for (std::size_t t = 1; t <= warm; ++t) state.push(x.at(t));
        first = warm + 1;
    }
    for (std::size_t t = first; t <= n; ++t) {
        const double v = spec.volatility_at(state.z);
        if (!(v >= spec.vol_floor)) throw VolatilityFloorError(t, v);
        fn(t, std::span<const double>(state.z), spec.trend_at(state.z), v);
        state.push(x[t - 1]);
    }
}

inline void check_lengths(const Segmentation& seg, std::size_t n, std::span<const double> gamma, const char* what) {
    if (seg.n() != n) throw ConfigError("segmentation n does not match series length");
    if (gamma.size() != seg.segment_count())
        throw ConfigError(std::string(what) + " must have length k+1 = " + std::to_string(seg.segment_count()));
}

}  // namespace detail

/// Segment indicator omega(t); free-function form.
inline std::vector<double> omega(std::size_t t, const Segmentation& seg) { return seg.omega(t); }

/// Residuals eps_t = (X_t - T(Z_{t-1}) - gamma' omega(t)) / V(Z_{t-1}) for t = 1..n from Z_0 = init.
inline std::vector<double> residuals(const TimeSeries& x, const CharnSpec& spec, std::span<const double> gamma,
                                     const Segmentation& seg, const LagState& init) {
    spec.validate();
    detail::check_lengths(seg, x.size(), gamma, "gamma");
    std::vector<double> eps;
    eps.reserve(x.size());
    detail::walk_lags(x, spec, init, [&](std::size_t t, std::span<const double>, double trend, double vol) {
        eps.push_back((x.at(t) - trend - gamma[seg.segment_of(t) - 1]) / vol);
    });
    return eps;
}

/// Residuals in warm-up mode: the first p observations seed the lags, values are eps_{p+1..n}.
inline std::vector<double> residuals(const TimeSeries& x, const CharnSpec& spec, std::span<const double> gamma,
                                     const Segmentation& seg) {
    spec.validate();
    detail::check_lengths(seg, x.size(), gamma, "gamma");
    std::vector<double> eps;
    eps.reserve(x.size());
    detail::walk_lags(x, spec, std::nullopt, [&](std::size_t t, std::span<const double>, double trend, double vol) {
        eps.push_back((x.at(t) - trend - gamma[seg.segment_of(t) - 1]) / vol);
    });
    return eps;
}

/// A simulated path with the state needed to reproduce its residuals.
struct SimulatedPath {
    TimeSeries series;
    LagState initial_state;     // Z_0 of the retained sample
    std::vector<double> noise;  // eps_1..eps_n driving the retained sample
};

inline constexpr std::size_t kDefaultBurnIn = 100;

}  // namespace charn

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "charn/error.hpp"
#include "charn/rng.hpp"

namespace charn {

enum class NoiseKind { Gaussian, ShiftedExponential, KernelEstimate };

inline const char* to_string(NoiseKind k) noexcept {
    switch (k) {
        case NoiseKind::Gaussian: return "gaussian";
        case NoiseKind::ShiftedExponential: return "shifted-exponential";
        case NoiseKind::KernelEstimate: return "kde";
    }
    return "?";
}

/// Parzen-Rosenblatt fit settings. The kernel is always Gaussian.
struct KdeConfig {
    std::optional<double> bandwidth;  // default n^(-1/5)
    std::size_t grid_points = 4096;
    double density_floor = 1e-6;      // below this the score is extended from the nearest valid point
    double grid_margin_bandwidths = 4.0;
};

/// Tabulated kernel estimate on a regular grid.
struct KdeTable {
    double lo = 0.0;
    double step = 0.0;
    double bandwidth = 0.0;
    std::vector<double> density;
    std::vector<double> derivative;
    std::vector<double> score;
    std::vector<double> sample;  // sorted residuals, used for tails and resampling
    double fisher = 0.0;
    double mass = 0.0;

    [[nodiscard]] double hi() const noexcept { return lo + step * static_cast<double>(density.size() - 1); }

    [[nodiscard]] double interpolate(const std::vector<double>& table, double x) const noexcept {
        const double pos = (x - lo) / step;
        if (pos <= 0.0) return table.front();
        const auto last = static_cast<double>(table.size() - 1);
        if (pos >= last) return table.back();
        const auto i = static_cast<std::size_t>(pos);
        const double w = pos - static_cast<double>(i);
        return table[i] * (1.0 - w) + table[i + 1] * w;
    }

    /// Exact kernel sum, used outside the grid.
    [[nodiscard]] double direct_density(double x) const noexcept {
        double s = 0.0;
        for (double e : sample) {
            const double u = (x - e) / bandwidth;
            s += std::exp(-0.5 * u * u);
        }
        return s / (static_cast<double>(sample.size()) * bandwidth * std::sqrt(2.0 * std::numbers::pi));
    }
};

/// Noise density triple (f, phi_f = f'/f, I(f)) plus a seeded sampler.
///
/// ShiftedExponential is the standardized exponential e^{-(x+1)} on (-1, inf). Its raw
/// score is the constant -1, so the stored (centered) score is 0 and I(f) = 0; the test
/// statistic refuses to run on it unless the caller goes through a kernel estimate.
class NoiseDensity {
public:
    static NoiseDensity gaussian() { return NoiseDensity(NoiseKind::Gaussian); }

    static NoiseDensity shifted_exponential(double rate = 1.25) {
        if (!(rate > 0.0)) throw ConfigError("exponential rate must be positive");
        NoiseDensity d(NoiseKind::ShiftedExponential);
        d.rate_ = rate;
        return d;
    }

    static NoiseDensity from_table(std::shared_ptr<const KdeTable> table) {
        NoiseDensity d(NoiseKind::KernelEstimate);
        d.table_ = std::move(table);
        return d;
    }

    /// Copy with I(f) replaced; used to study alternative readings of the exponential case.
    [[nodiscard]] NoiseDensity with_fisher_override(double fisher) const {
        if (!(fisher > 0.0) || !std::isfinite(fisher)) throw ConfigError("fisher override must be positive and finite");
        NoiseDensity d(*this);
        d.fisher_override_ = fisher;
        return d;
    }

    [[nodiscard]] NoiseKind kind() const noexcept { return kind_; }
    [[nodiscard]] double rate() const noexcept { return rate_; }
    [[nodiscard]] std::optional<double> fisher_override() const noexcept { return fisher_override_; }
    [[nodiscard]] const KdeTable* table() const noexcept { return table_.get(); }

    [[nodiscard]] double support_lo() const noexcept {
        return kind_ == NoiseKind::ShiftedExponential ? -1.0 : -std::numeric_limits<double>::infinity();
    }
    [[nodiscard]] double support_hi() const noexcept { return std::numeric_limits<double>::infinity(); }

    /// False when the score is identically zero, which makes the central statistic degenerate.
    [[nodiscard]] bool has_usable_score() const noexcept { return kind_ != NoiseKind::ShiftedExponential; }

    [[nodiscard]] double score(double x) const {
        switch (kind_) {
            case NoiseKind::Gaussian: return -x;
            case NoiseKind::ShiftedExponential:
                if (!(x > -1.0)) throw DomainError("score evaluated outside (-1, inf)");
                return 0.0;
            case NoiseKind::KernelEstimate: return table_->interpolate(table_->score, x);
        }
        return 0.0;
    }

    [[nodiscard]] double density(double x) const noexcept {
        switch (kind_) {
            case NoiseKind::Gaussian: return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
            case NoiseKind::ShiftedExponential: return x > -1.0 ? std::exp(-(x + 1.0)) : 0.0;
            case NoiseKind::KernelEstimate:
                if (x < table_->lo || x > table_->hi()) return table_->direct_density(x);
                return table_->interpolate(table_->density, x);
        }
        return 0.0;
    }

    [[nodiscard]] double log_density(double x) const {
        if (kind_ == NoiseKind::Gaussian) return -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi);
        const double f = density(x);
        if (!(f > 0.0)) throw LogDomainError("noise density is zero at " + std::to_string(x));
        return std::log(f);
    }

    /// I(f), or the override when one is set.
    [[nodiscard]] double fisher() const noexcept {
        if (fisher_override_) return *fisher_override_;
        switch (kind_) {
            case NoiseKind::Gaussian: return 1.0;
            case NoiseKind::ShiftedExponential: return 0.0;
            case NoiseKind::KernelEstimate: return table_->fisher;
        }
        return 0.0;
    }

    /// n i.i.d. draws.
    [[nodiscard]] std::vector<double> sample(std::size_t n, std::uint64_t seed) const {
        Rng rng(seed);
        std::vector<double> out(n);
        switch (kind_) {
            case NoiseKind::Gaussian:
                for (auto& v : out) v = rng.normal();
                break;
            case NoiseKind::ShiftedExponential:
                // lambda * (E - 1/lambda) with E ~ Exp(lambda)
                for (auto& v : out) v = rate_ * (rng.exponential(rate_) - 1.0 / rate_);
                break;
            case NoiseKind::KernelEstimate: {
                const auto& s = table_->sample;
                for (auto& v : out) {
                    const auto i = static_cast<std::size_t>(rng.uniform() * static_cast<double>(s.size()));
                    v = s[std::min(i, s.size() - 1)] + table_->bandwidth * rng.normal();
                }
                break;
            }
        }
        return out;
    }

private:
    explicit NoiseDensity(NoiseKind kind) : kind_(kind) {}

    NoiseKind kind_;
    double rate_ = 1.0;
    std::optional<double> fisher_override_;
    std::shared_ptr<const KdeTable> table_;
};

inline constexpr std::size_t kMinKdeSample = 30;

/// Gaussian-kernel density estimate of the residual distribution.
///
/// The density and its derivative are tabulated from the analytic kernel and its
/// derivative; the score is their ratio wherever the density clears the floor.
inline NoiseDensity kde_fit(std::span<const double> residuals, const KdeConfig& cfg = {}) {
    if (residuals.size() < kMinKdeSample)
        throw DegenerateError("kde_fit needs at least " + std::to_string(kMinKdeSample) + " residuals, got " +
                              std::to_string(residuals.size()));
    for (double e : residuals)
        if (!std::isfinite(e)) throw EstimationError("kde_fit: non-finite residual");
    if (cfg.grid_points < 16) throw ConfigError("kde grid needs at least 16 points");

    auto table = std::make_shared<KdeTable>();
    table->sample.assign(residuals.begin(), residuals.end());
    std::sort(table->sample.begin(), table->sample.end());
    const auto& s = table->sample;
    const double n = static_cast<double>(s.size());
    if (s.back() - s.front() == 0.0) throw DegenerateError("kde_fit: all residuals are equal");

    const double h = cfg.bandwidth.value_or(std::pow(n, -0.2));
    if (!(h > 0.0)) throw ConfigError("kde bandwidth must be positive");
    table->bandwidth = h;
    table->lo = s.front() - cfg.grid_margin_bandwidths * h;
    const double hi = s.back() + cfg.grid_margin_bandwidths * h;
    const std::size_t m = cfg.grid_points;
    table->step = (hi - table->lo) / static_cast<double>(m - 1);
    table->density.assign(m, 0.0);
    table->derivative.assign(m, 0.0);

    // Kernel contributions beyond 9 bandwidths are below 1e-17 and skipped.
    const double cutoff = 9.0 * h;
    const double norm = 1.0 / (n * h * std::sqrt(2.0 * std::numbers::pi));
    std::size_t first = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const double x = table->lo + table->step * static_cast<double>(i);
        while (first < s.size() && s[first] < x - cutoff) ++first;
        double f = 0.0;
        double df = 0.0;
        for (std::size_t j = first; j < s.size() && s[j] <= x + cutoff; ++j) {
            const double u = (x - s[j]) / h;
            const double k = std::exp(-0.5 * u * u);
            f += k;
            df -= u * k;
        }
        table->density[i] = f * norm;
        table->derivative[i] = df * norm / h;
    }

    table->score.assign(m, std::numeric_limits<double>::quiet_NaN());
    std::optional<std::size_t> first_valid;
    std::size_t last_valid = 0;
    for (std::size_t i = 0; i < m; ++i) {
        if (table->density[i] >= cfg.density_floor) {
            table->score[i] = table->derivative[i] / table->density[i];
            if (!first_valid) first_valid = i;
            last_valid = i;
        }
    }
    if (!first_valid) throw DegenerateError("kde_fit: density below floor everywhere");
    for (std::size_t i = 0; i < m; ++i) {
        if (!std::isnan(table->score[i])) continue;
        if (i < *first_valid) {
            table->score[i] = table->score[*first_valid];
        } else if (i > last_valid) {
            table->score[i] = table->score[last_valid];
        } else {
            // Interior gap: nearest valid neighbour.
            std::size_t l = i;
            while (std::isnan(table->score[l])) --l;
            std::size_t r = i;
            while (std::isnan(table->score[r])) ++r;
            table->score[i] = (i - l <= r - i) ? table->score[l] : table->score[r];
        }
    }

    double fisher = 0.0;
    double mass = 0.0;
    for (std::size_t i = 0; i + 1 < m; ++i) {
        const double a = table->score[i] * table->score[i] * table->density[i];
        const double b = table->score[i + 1] * table->score[i + 1] * table->density[i + 1];
        fisher += 0.5 * (a + b) * table->step;
        mass += 0.5 * (table->density[i] + table->density[i + 1]) * table->step;
    }
    if (!std::isfinite(fisher) || !(fisher > 0.0)) throw EstimationError("kde_fit: Fisher information is not finite and positive");
    table->fisher = fisher;
    table->mass = mass;
    return NoiseDensity::from_table(std::move(table));
}

/// Free-function forms.
inline double score(const NoiseDensity& f, double x) { return f.score(x); }
inline double fisher_info(const NoiseDensity& f) { return f.fisher(); }
inline std::vector<double> sample(const NoiseDensity& f, std::size_t n, std::uint64_t seed) { return f.sample(n, seed); }

}  // namespace charn

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "charn/error.hpp"
#include "charn/model.hpp"
#include "charn/noise.hpp"
#include "charn/power.hpp"

namespace charn {

struct DetectionConfig {
    std::size_t m = 20;           // historical (change-free) prefix length
    std::size_t h = 20;           // minimum distance between breaks
    double zeta = 0.01;           // decision band on |P_hat - alpha|
    double alpha = 0.05;
    std::size_t max_breaks = 2;   // K
    std::vector<std::size_t> priors;  // tau_j^0, optional for S1/S2
    std::size_t halfwidth = 10;   // candidate window radius around each prior
    std::optional<std::size_t> known_k;
    bool circular = false;        // wrap the post-break window near n (S1 only)
    std::optional<std::size_t> min_segment_length;  // default max(p + 1, 5)
    BetaOptions beta_options;

    [[nodiscard]] std::size_t min_seg(const CharnSpec& spec) const {
        return min_segment_length.value_or(default_min_segment_length(spec.p));
    }

    void validate(std::size_t n) const {
        if (m >= n) throw ConfigError("historical length m must be < n");
        if (h < 1) throw ConfigError("h must be >= 1");
        if (!(zeta > 0.0 && zeta < 0.1)) throw ConfigError("zeta must lie in (0, 0.1)");
        if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
        if (max_breaks < 1) throw ConfigError("K must be >= 1");
        if (known_k && (*known_k < 1 || *known_k > max_breaks)) throw ConfigError("known k must lie in [1, K]");
        for (std::size_t j = 0; j < priors.size(); ++j) {
            if (j > 0 && priors[j] < priors[j - 1] + h)
                throw ConfigError("priors must be increasing with gaps >= h");
            if (priors[j] <= m) throw ConfigError("priors must exceed m");
            if (priors[j] + h > n) throw ConfigError("priors must satisfy tau <= n - h");
        }
        if (priors.size() > max_breaks) throw ConfigError("more priors than K");
    }
};

/// One power evaluation, kept for audit.
struct TraceRecord {
    std::vector<std::size_t> locations;
    double power = 0.0;
    double varpi_hat = 0.0;
};

/// Candidate windows C_j and lazy enumeration of S_l.
struct CandidateSets {
    std::vector<std::vector<std::size_t>> windows;

    /// |S_l|: sum over increasing window combinations of the product of their sizes.
    [[nodiscard]] std::size_t count(std::size_t l) const {
        std::vector<std::size_t> e(l + 1, 0);  // elementary symmetric sums
        e[0] = 1;
        for (const auto& w : windows)
            for (std::size_t i = l; i >= 1; --i) e[i] += e[i - 1] * w.size();
        return e[l];
    }

    /// Calls fn(tuple) for every tuple of S_l in lexicographic order.
    void for_each(std::size_t l, const std::function<void(const std::vector<std::size_t>&)>& fn) const {
        std::vector<std::size_t> tuple(l);
        std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t from, std::size_t depth) {
            if (depth == l) {
                fn(tuple);
                return;
            }
            for (std::size_t w = from; w + (l - depth) <= windows.size(); ++w) {
                for (std::size_t t : windows[w]) {
                    tuple[depth] = t;
                    rec(w + 1, depth + 1);
                }
            }
        };
        if (l >= 1 && l <= windows.size()) rec(0, 0);
    }
};

/// C_j = [tau_j - w, tau_j + w] clipped to valid break positions, then shrunk
/// toward the priors until adjacent windows keep a gap of at least h.
inline CandidateSets build_candidates(const DetectionConfig& cfg, std::size_t n, std::size_t min_seg = kDefaultMinSegmentLength) {
    if (cfg.priors.empty()) throw ConfigError("build_candidates needs priors");
    if (cfg.priors.size() > 1) {
        for (std::size_t j = 1; j < cfg.priors.size(); ++j)
            if (cfg.priors[j] < cfg.priors[j - 1] + cfg.h) throw ConfigError("priors closer than h");
    }
    const std::size_t lo_valid = std::max(cfg.m + 1, min_seg + 1);
    const std::size_t hi_valid = n + 1 > min_seg ? n + 1 - min_seg : 0;
    struct Bounds {
        std::size_t lo;
        std::size_t hi;
    };
    std::vector<Bounds> b;
    for (std::size_t tau : cfg.priors) {
        if (tau < lo_valid || tau > hi_valid) throw ConfigError("prior " + std::to_string(tau) + " is not a valid break position");
        b.push_back({std::max(lo_valid, tau > cfg.halfwidth ? tau - cfg.halfwidth : 1),
                     std::min(hi_valid, tau + cfg.halfwidth)});
    }
    for (std::size_t j = 0; j + 1 < b.size(); ++j) {
        const std::size_t tau_l = cfg.priors[j];
        const std::size_t tau_r = cfg.priors[j + 1];
        while (b[j].hi + cfg.h > b[j + 1].lo) {
            const std::size_t room_l = b[j].hi - tau_l;
            const std::size_t room_r = tau_r - b[j + 1].lo;
            if (room_l == 0 && room_r == 0) throw ConfigError("candidate windows overlap after truncation");
            if (room_l >= room_r) {
                --b[j].hi;
            } else {
                ++b[j + 1].lo;
            }
        }
    }
    CandidateSets sets;
    for (const auto& w : b) {
        std::vector<std::size_t> c;
        for (std::size_t t = w.lo; t <= w.hi; ++t) c.push_back(t);
        sets.windows.push_back(std::move(c));
    }
    return sets;
}

struct DetectionResult {
    std::size_t k_hat = 0;
    std::vector<std::size_t> t_hat;
    std::vector<double> beta_hat;  // magnitude at each detected break
    double max_power = 0.0;
    std::vector<TraceRecord> trace;
    std::vector<std::string> warnings;
};

struct S1Result {
    bool detected = false;
    std::size_t argmax = 0;
    double max_power = 0.0;
    std::vector<TraceRecord> trace;
};

namespace detail {

/// Strict improvement keeps the lexicographically smallest tuple on ties.
///
/// Candidates are ranked by varpi_hat: power is strictly increasing in it, and
/// unlike power it does not round to 1.0 for strong shifts.
inline bool improves(double candidate, double incumbent, bool have) { return !have || candidate > incumbent; }

/// Post-break window wrapped to the series start when it is shorter than h.
inline PowerResult circular_power(const PowerEvaluator& eval, std::size_t t1, std::size_t h) {
    const std::size_t n = eval.n();
    const std::size_t tail = n - t1 + 1;
    if (tail >= h) return eval.evaluate(std::vector<std::size_t>{t1});
    const std::size_t wrap = h - tail;  // indices 1..wrap join the second segment
    using R = PowerEvaluator::Range;
    std::vector<std::vector<R>> groups{{R{wrap + 1, t1}}, {R{t1, n + 1}, R{1, wrap + 1}}};
    PowerResult r = eval.evaluate_groups(groups, n);
    r.locations = {t1};
    return r;
}

}  // namespace detail

/// Strategy S1: k = 1 power sweep over t_1 = m+1..n-1; a change exists iff some
/// |P_hat_{1,t_1} - alpha| exceeds zeta.
inline S1Result scan_s1(const PowerEvaluator& eval, const DetectionConfig& cfg, std::size_t min_seg) {
    const std::size_t n = eval.n();
    cfg.validate(n);
    S1Result out;
    const std::size_t first = std::max(cfg.m + 1, min_seg + 1);
    const std::size_t last = cfg.circular ? n - 1 : std::min(n - 1, n + 1 - min_seg);
    bool have = false;
    double best_varpi = 0.0;
    for (std::size_t t = first; t <= last; ++t) {
        const PowerResult r = cfg.circular ? detail::circular_power(eval, t, std::max(cfg.h, min_seg))
                                           : eval.evaluate(std::vector<std::size_t>{t});
        out.trace.push_back({{t}, r.power, r.varpi_hat});
        if (std::abs(r.power - cfg.alpha) > cfg.zeta) out.detected = true;
        if (detail::improves(r.varpi_hat, best_varpi, have)) {
            best_varpi = r.varpi_hat;
            out.max_power = r.power;
            out.argmax = t;
            have = true;
        }
    }
    if (!have) throw ConfigError("S1: no admissible break position between m and n");
    return out;
}

inline S1Result scan_s1(const TimeSeries& x, const CharnSpec& spec, const NoiseDensity& noise, const DetectionConfig& cfg) {
    if (x.size() <= cfg.m) throw ConfigError("series shorter than the historical length m");
    const PowerEvaluator eval(x, spec, noise, cfg.alpha, cfg.beta_options);
    return scan_s1(eval, cfg, cfg.min_seg(spec));
}

inline bool detect_s1(const TimeSeries& x, const CharnSpec& spec, const NoiseDensity& noise, const DetectionConfig& cfg) {
    return scan_s1(x, spec, noise, cfg).detected;
}

/// Priors from a k = 1 sweep: highest-power positions with |P_hat - alpha| > zeta,
/// pairwise at least h apart and at most n - h, capped at K. Returned sorted.
inline std::vector<std::size_t> priors_from_sweep(const S1Result& sweep, const DetectionConfig& cfg, std::size_t n) {
    std::vector<TraceRecord> ranked = sweep.trace;
    std::stable_sort(ranked.begin(), ranked.end(), [](const TraceRecord& a, const TraceRecord& b) { return a.varpi_hat > b.varpi_hat; });
    std::vector<std::size_t> chosen;
    for (const auto& r : ranked) {
        if (chosen.size() == cfg.max_breaks) break;
        const std::size_t t = r.locations.front();
        if (!(std::abs(r.power - cfg.alpha) > cfg.zeta) || t + cfg.h > n) continue;
        const bool far = std::all_of(chosen.begin(), chosen.end(), [&](std::size_t c) {
            return (t > c ? t - c : c - t) >= cfg.h;
        });
        if (far) chosen.push_back(t);
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

namespace detail {

inline void fill_breaks(DetectionResult& out, const PowerResult& best) {
    out.t_hat = best.locations;
    out.k_hat = best.locations.size();
    out.beta_hat.assign(best.beta_hat.begin() + 1, best.beta_hat.end());
    out.max_power = best.power;
}

}  // namespace detail

/// Strategy S2: grid argmax of P_hat over candidate products with the zeta nesting rule.
inline DetectionResult detect_s2(const TimeSeries& x, const CharnSpec& spec, const NoiseDensity& noise,
                                 const DetectionConfig& cfg_in) {
    const std::size_t n = x.size();
    cfg_in.validate(n);
    const std::size_t min_seg = cfg_in.min_seg(spec);
    const PowerEvaluator eval(x, spec, noise, cfg_in.alpha, cfg_in.beta_options);
    DetectionConfig cfg = cfg_in;
    DetectionResult out;

    if (cfg.priors.empty()) {
        const S1Result sweep = scan_s1(eval, cfg, min_seg);
        out.trace = sweep.trace;
        cfg.priors = priors_from_sweep(sweep, cfg, n);
        out.warnings.push_back("priors derived from a k = 1 power sweep");
        if (cfg.priors.empty()) {
            out.max_power = cfg.alpha;
            out.warnings.push_back("no position exceeds the zeta band; no change located");
            return out;
        }
    }
    const CandidateSets sets = build_candidates(cfg, n, min_seg);
    const std::size_t levels = sets.windows.size();

    std::vector<PowerResult> best(levels + 1);
    std::vector<bool> have(levels + 1, false);
    const std::size_t only = cfg.known_k.value_or(0);
    if (only > levels) throw ConfigError("known k exceeds the number of candidate windows");
    for (std::size_t l = 1; l <= levels; ++l) {
        if (only != 0 && l != only) continue;
        sets.for_each(l, [&](const std::vector<std::size_t>& tuple) {
            PowerResult r = eval.evaluate(tuple);
            out.trace.push_back({tuple, r.power, r.varpi_hat});
            if (detail::improves(r.varpi_hat, best[l].varpi_hat, have[l])) {
                best[l] = std::move(r);
                have[l] = true;
            }
        });
    }

    if (only != 0) {
        detail::fill_breaks(out, best[only]);
        return out;
    }

    if (std::abs(best[1].power - cfg.alpha) <= cfg.zeta)
        out.warnings.push_back("l = 1 maximum power is within zeta of alpha; C_1 may contain no change");
    std::size_t kept = 1;
    for (std::size_t l = 2; l <= levels; ++l) {
        if (std::abs(best[l].power - best[l - 1].power) > cfg.zeta) kept = l;
    }
    detail::fill_breaks(out, best[kept]);
    return out;
}

/// Strategy S3: sequential k = 1 sweeps over the segments
///   U_1 = {1, ..., tau_1 + h},  U_l = {tau_{l-1} + h, ..., tau_l + h},
/// each tested with its own length standing in for n. A segment without an
/// exceedance of zeta is merged into the next one; a located break t_hat moves the
/// next segment's start to t_hat + h.
inline DetectionResult detect_s3(const TimeSeries& x, const CharnSpec& spec, const NoiseDensity& noise,
                                 const DetectionConfig& cfg) {
    const std::size_t n = x.size();
    if (cfg.priors.empty()) throw ConfigError("S3 needs priors; run detect_s1 and derive priors first");
    cfg.validate(n);
    const std::size_t min_seg = cfg.min_seg(spec);
    const PowerEvaluator eval(x, spec, noise, cfg.alpha, cfg.beta_options);
    DetectionResult out;

    std::size_t start = 1;
    double best_overall = cfg.alpha;
    for (std::size_t l = 0; l < cfg.priors.size(); ++l) {
        const std::size_t end = std::min(n, cfg.priors[l] + cfg.h);
        std::size_t first = start + min_seg;
        if (l == 0) first = std::max(first, cfg.m + 1);
        const std::size_t last = end + 1 >= min_seg ? end + 1 - min_seg : 0;

        bool exceed = false;
        bool have = false;
        PowerResult best;
        for (std::size_t t = first; t <= last && end > start; ++t) {
            PowerResult r = eval.evaluate_window(start, end, std::vector<std::size_t>{t});
            out.trace.push_back({{t}, r.power, r.varpi_hat});
            if (std::abs(r.power - cfg.alpha) > cfg.zeta) exceed = true;
            if (detail::improves(r.varpi_hat, best.varpi_hat, have)) {
                best = std::move(r);
                have = true;
            }
        }
        if (exceed) {
            out.t_hat.push_back(best.locations.front());
            out.beta_hat.push_back(best.beta_hat.back());
            best_overall = std::max(best_overall, best.power);
            start = best.locations.front() + cfg.h;
            if (start > n) break;
        }
        // Otherwise the segment is merged into the next one: `start` is unchanged.
    }
    out.k_hat = out.t_hat.size();
    out.max_power = best_overall;
    return out;
}

}  // namespace charn

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "charn/baselines.hpp"
#include "charn/detect.hpp"
#include "charn/error.hpp"
#include "charn/estimation.hpp"
#include "charn/lr_test.hpp"
#include "charn/model.hpp"
#include "charn/noise.hpp"
#include "charn/normal.hpp"
#include "charn/rng.hpp"
#include "charn/simulate.hpp"

namespace charn {

enum class Method { LRT, S1, S2, S3, SCUSUM };
enum class Hypothesis { Null, Alternative };

inline const char* to_string(Method m) noexcept {
    switch (m) {
        case Method::LRT: return "lrt";
        case Method::S1: return "s1";
        case Method::S2: return "s2";
        case Method::S3: return "s3";
        case Method::SCUSUM: return "scusum";
    }
    return "?";
}

inline Method parse_method(const std::string& s) {
    if (s == "lrt") return Method::LRT;
    if (s == "s1") return Method::S1;
    if (s == "s2") return Method::S2;
    if (s == "s3") return Method::S3;
    if (s == "scusum") return Method::SCUSUM;
    throw ConfigError("unknown method '" + s + "' (expected lrt, s1, s2, s3 or scusum)");
}

/// A replication experiment. Data are generated from (spec, seg, gamma0, beta)
/// with beta replaced by zeros under Hypothesis::Null; the LRT always tests in
/// the direction `beta`.
struct Scenario {
    CharnSpec spec = CharnSpec::white_noise();
    Segmentation seg;
    std::vector<double> gamma0;
    std::vector<double> beta;
    NoiseDensity noise = NoiseDensity::gaussian();
    std::size_t n = 0;
    std::size_t reps = 500;
    std::uint64_t master_seed = 1;
    Method method = Method::LRT;
    Hypothesis hypothesis = Hypothesis::Alternative;
    double alpha = 0.05;
    std::size_t burn_in = kDefaultBurnIn;
    std::size_t threads = 1;

    bool estimate_psi = false;     // Gaussian QMLE of (rho, theta) per replication
    bool estimate_gamma0 = false;  // LRT: per-segment MLE of gamma0 instead of the true value
    bool estimate_noise = false;   // kernel estimate of f from the fitted residuals
    std::size_t fit_restarts = 2;

    DetectionConfig detection;     // used by S1, S2 and S3

    void validate() const {
        if (reps < 1) throw ConfigError("reps must be >= 1");
        if (n == 0 || seg.n() != n) throw ConfigError("scenario segmentation must match n");
        if (gamma0.size() != seg.segment_count() || beta.size() != seg.segment_count())
            throw ConfigError("gamma0 and beta must have length k+1");
        if (threads < 1) throw ConfigError("threads must be >= 1");
        spec.validate();
        (void)stats::z_alpha(alpha);
    }
};

/// Seed of replication i.
inline std::uint64_t replication_seed(const Scenario& sc, std::size_t i) { return mix_seed(sc.master_seed, i); }

/// Runs fn(i) for i = 0..count-1 on `threads` workers and returns results in index
/// order. A failing replication aborts the run with the smallest failing index.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t count, std::size_t threads, Fn&& fn) {
    std::vector<std::optional<T>> slots(count);
    std::mutex mutex;
    std::optional<std::size_t> failed_at;
    std::string failure;
    auto worker = [&](std::size_t offset) {
        for (std::size_t i = offset; i < count; i += threads) {
            {
                std::lock_guard<std::mutex> lock(mutex);
                if (failed_at && *failed_at < i) return;
            }
            try {
                slots[i].emplace(fn(i));
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(mutex);
                if (!failed_at || i < *failed_at) {
                    failed_at = i;
                    failure = e.what();
                }
                return;
            }
        }
    };
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(worker, w);
        for (auto& th : pool) th.join();
    }
    if (failed_at) throw ReplicationError(*failed_at, failure);
    std::vector<T> out;
    out.reserve(count);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

/// Model used to analyse one simulated series.
struct FittedModel {
    CharnSpec spec;
    std::vector<double> gamma0;
    NoiseDensity noise = NoiseDensity::gaussian();
};

struct Replicate {
    SimulatedPath path;
    FittedModel model;
};

/// Simulates replication i and fits whatever the scenario marks as unknown.
inline Replicate make_replicate(const Scenario& sc, std::size_t i) {
    const std::uint64_t seed = replication_seed(sc, i);
    MeanShiftParams shift{sc.gamma0, sc.beta};
    if (sc.hypothesis == Hypothesis::Null) shift.beta.assign(sc.beta.size(), 0.0);
    Replicate r{simulate_path(sc.spec, sc.seg, shift, sc.noise, sc.n, seed, sc.burn_in), {sc.spec, sc.gamma0, sc.noise}};
    const TimeSeries& x = r.path.series;

    const bool detection = sc.method != Method::LRT;
    // Detection methods do not know the breaks, so nuisance parameters are fitted
    // under a single level.
    const Segmentation fit_seg = detection ? Segmentation(sc.n, {}) : sc.seg;
    std::vector<double> gamma = detection ? std::vector<double>{sc.gamma0.front()} : sc.gamma0;
    if (sc.estimate_gamma0 || (detection && sc.estimate_psi)) gamma = fit_gamma0(x, fit_seg, r.model.spec);
    if (sc.estimate_psi) {
        FitOptions opt;
        opt.restarts = sc.fit_restarts;
        opt.seed = seed;
        const FitResult fit = fit_psi(x, r.model.spec, fit_seg, gamma, ParamBounds::defaults_for(sc.spec), opt);
        r.model.spec = fit.spec;
        if (sc.estimate_gamma0 || detection) gamma = fit_gamma0(x, fit_seg, r.model.spec);
    }
    if (!detection) r.model.gamma0 = gamma;
    if (sc.estimate_noise) {
        auto eps = residuals(x, r.model.spec, gamma, fit_seg, r.path.initial_state);
        const std::size_t m = detection ? sc.detection.m : 0;
        if (m >= kMinKdeSample) eps.resize(m);
        r.model.noise = kde_fit(eps);
    }
    return r;
}

/// Rejection rate with a normal-approximation 95% binomial interval.
struct RateResult {
    std::size_t reps = 0;
    std::size_t rejections = 0;
    double rate = 0.0;
    double half_width = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

inline RateResult make_rate(std::size_t rejections, std::size_t reps) {
    RateResult r;
    r.reps = reps;
    r.rejections = rejections;
    r.rate = static_cast<double>(rejections) / static_cast<double>(reps);
    r.half_width = 1.96 * std::sqrt(r.rate * (1.0 - r.rate) / static_cast<double>(reps));
    r.lo = std::max(0.0, r.rate - r.half_width);
    r.hi = std::min(1.0, r.rate + r.half_width);
    return r;
}

/// Whether replication i rejects (LRT), declares a change (S1) or rejects (SCUSUM).
inline bool replicate_rejects(const Scenario& sc, std::size_t i) {
    const Replicate r = make_replicate(sc, i);
    const TimeSeries& x = r.path.series;
    switch (sc.method) {
        case Method::LRT: {
            const LrContext c{x, r.model.spec, sc.seg, r.model.noise, r.path.initial_state};
            return test_statistic(c, r.model.gamma0, sc.beta, sc.alpha).reject;
        }
        case Method::S1: return detect_s1(x, r.model.spec, r.model.noise, sc.detection);
        case Method::SCUSUM: return cusum_statistic(x, sc.alpha).reject;
        default: throw ConfigError("rejection rates are defined for lrt, s1 and scusum");
    }
}

/// Fraction of replications that reject, with its binomial interval.
inline RateResult empirical_size_power(const Scenario& sc) {
    sc.validate();
    const auto flags = parallel_map<char>(sc.reps, sc.threads, [&](std::size_t i) -> char { return replicate_rejects(sc, i) ? 1 : 0; });
    std::size_t count = 0;
    for (char f : flags) count += static_cast<std::size_t>(f);
    return make_rate(count, sc.reps);
}

/// One replication of the LAN diagnostic.
struct LanSample {
    double delta_n = 0.0;
    double t_n = 0.0;
    double lambda_n = 0.0;
    double mu_hat = 0.0;
};

struct LanSummary {
    double mean_delta = 0.0;
    double var_delta = 0.0;
    double mean_t = 0.0;
    double var_t = 0.0;
    double mean_mu_hat = 0.0;
    double ks_location = 0.0;  // N(ks_location, 1) is the reference law of T_n
    stats::KsResult ks;
    double mean_remainder = 0.0;  // mean of Lambda_n - (Delta_n - mu_hat / 2)
    std::vector<LanSample> samples;
};

namespace detail {

inline std::pair<double, double> mean_var(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return {m, v.size() > 1 ? s / static_cast<double>(v.size() - 1) : 0.0};
}

}  // namespace detail

/// Moments of Delta_n and T_n, a KS check of T_n, and the LAN remainder.
/// Under the null T_n is compared with N(0, 1), under the alternative with N(varpi, 1).
inline LanSummary lan_diagnostic(const Scenario& sc) {
    sc.validate();
    if (sc.method != Method::LRT) throw ConfigError("lan_diagnostic needs method lrt");
    auto samples = parallel_map<LanSample>(sc.reps, sc.threads, [&](std::size_t i) {
        const Replicate r = make_replicate(sc, i);
        const LrContext c{r.path.series, r.model.spec, sc.seg, r.model.noise, r.path.initial_state};
        const TestOutcome o = test_statistic(c, r.model.gamma0, sc.beta, sc.alpha);
        return LanSample{o.delta_n, o.t_n, loglik_ratio(c, r.model.gamma0, sc.beta), o.mu_hat};
    });
    LanSummary s;
    std::vector<double> d;
    std::vector<double> t;
    std::vector<double> rem;
    for (const auto& x : samples) {
        d.push_back(x.delta_n);
        t.push_back(x.t_n);
        rem.push_back(x.lambda_n - (x.delta_n - 0.5 * x.mu_hat));
        s.mean_mu_hat += x.mu_hat / static_cast<double>(samples.size());
    }
    std::tie(s.mean_delta, s.var_delta) = detail::mean_var(d);
    std::tie(s.mean_t, s.var_t) = detail::mean_var(t);
    s.mean_remainder = detail::mean_var(rem).first;
    s.ks_location = sc.hypothesis == Hypothesis::Alternative ? std::sqrt(s.mean_mu_hat) : 0.0;
    s.ks = stats::ks_test_normal(t, s.ks_location);
    s.samples = std::move(samples);
    return s;
}

/// Per-break aggregate of location estimates.
struct BreakSummary {
    std::size_t truth = 0;
    double mean = 0.0;
    std::size_t mode = 0;
    double hit_rate_2 = 0.0;     // |t_hat - truth| <= 2
    double mean_abs_error = 0.0;
};

struct LocationSummary {
    std::size_t reps = 0;
    std::size_t k_correct = 0;    // replications with k_hat equal to the true k
    double k_accuracy = 0.0;
    double exact_hit_rate = 0.0;  // fraction of all reps with t_hat equal to the truth
    std::vector<BreakSummary> breaks;  // over replications with the correct k
    std::vector<std::vector<std::size_t>> estimates;  // t_hat per replication
};

/// Location estimate of replication i: S2/S3 detections, or the CUSUM break start (argmax + 1).
inline std::vector<std::size_t> replicate_locations(const Scenario& sc, std::size_t i) {
    const Replicate r = make_replicate(sc, i);
    const TimeSeries& x = r.path.series;
    switch (sc.method) {
        case Method::S2: return detect_s2(x, r.model.spec, r.model.noise, sc.detection).t_hat;
        case Method::S3: return detect_s3(x, r.model.spec, r.model.noise, sc.detection).t_hat;
        case Method::SCUSUM: return {cusum_statistic(x, sc.alpha).location + 1};
        default: throw ConfigError("location estimates are defined for s2, s3 and scusum");
    }
}

inline LocationSummary location_estimate_mean(const Scenario& sc) {
    sc.validate();
    auto est = parallel_map<std::vector<std::size_t>>(sc.reps, sc.threads, [&](std::size_t i) { return replicate_locations(sc, i); });
    const auto& truth = sc.seg.breaks();
    const std::size_t k = truth.size();
    LocationSummary s;
    s.reps = sc.reps;
    s.breaks.resize(k);
    std::vector<std::map<std::size_t, std::size_t>> counts(k);
    std::size_t exact = 0;
    for (const auto& e : est) {
        if (e.size() != k) continue;
        ++s.k_correct;
        bool all = true;
        for (std::size_t j = 0; j < k; ++j) {
            const double err = std::abs(static_cast<double>(e[j]) - static_cast<double>(truth[j]));
            s.breaks[j].mean += static_cast<double>(e[j]);
            s.breaks[j].mean_abs_error += err;
            s.breaks[j].hit_rate_2 += err <= 2.0 ? 1.0 : 0.0;
            ++counts[j][e[j]];
            all = all && e[j] == truth[j];
        }
        exact += all ? 1 : 0;
    }
    s.k_accuracy = static_cast<double>(s.k_correct) / static_cast<double>(sc.reps);
    s.exact_hit_rate = static_cast<double>(exact) / static_cast<double>(sc.reps);
    for (std::size_t j = 0; j < k; ++j) {
        auto& b = s.breaks[j];
        b.truth = truth[j];
        if (s.k_correct > 0) {
            const double c = static_cast<double>(s.k_correct);
            b.mean /= c;
            b.mean_abs_error /= c;
            b.hit_rate_2 /= c;
        }
        std::size_t best = 0;
        for (const auto& [loc, cnt] : counts[j]) {
            if (cnt > best) {
                best = cnt;
                b.mode = loc;
            }
        }
    }
    s.estimates = std::move(est);
    return s;
}

}  // namespace charn

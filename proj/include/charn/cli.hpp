#pragma once

#include <chrono>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "charn/baselines.hpp"
#include "charn/detect.hpp"
#include "charn/error.hpp"
#include "charn/estimation.hpp"
#include "charn/io.hpp"
#include "charn/lr_test.hpp"
#include "charn/model.hpp"
#include "charn/montecarlo.hpp"
#include "charn/noise.hpp"
#include "charn/power.hpp"
#include "charn/simulate.hpp"

namespace charn::cli {

using json = nlohmann::ordered_json;

inline constexpr const char* kResultVersion = "1";

namespace detail {

template <class T>
json echo_value(const T& v) {
    return json(v);
}

/// Options whose resolved values are echoed in the result file, keyed by long name.
class Registry {
public:
    explicit Registry(CLI::App* app) : app_(app) {}

    template <class T>
    CLI::Option* add(const std::string& name, T& var, const std::string& desc) {
        CLI::Option* o = app_->add_option("--" + name, var, desc);
        if constexpr (requires { var.begin(); } && !std::is_same_v<T, std::string>) o->delimiter(',');
        echo_.emplace_back(name, [&var] { return echo_value(var); });
        return o;
    }

    CLI::Option* flag(const std::string& name, bool& var, const std::string& desc) {
        CLI::Option* o = app_->add_flag("--" + name, var, desc);
        echo_.emplace_back(name, [&var] { return json(var); });
        return o;
    }

    [[nodiscard]] json inputs() const {
        json j = json::object();
        for (const auto& [k, f] : echo_) j[k] = f();
        return j;
    }

    [[nodiscard]] std::set<std::string> keys() const {
        std::set<std::string> s;
        for (const auto& e : echo_) s.insert(e.first);
        return s;
    }

    [[nodiscard]] CLI::App* app() const noexcept { return app_; }

private:
    CLI::App* app_;
    std::vector<std::pair<std::string, std::function<json()>>> echo_;
};

struct ModelArgs {
    std::string trend = "constant";
    std::size_t p = 0;
    std::vector<double> rho;
    std::string vol = "constant";
    std::vector<double> theta{1.0};

    void bind(Registry& r) {
        r.add("trend", trend, "trend family: constant, linear-ar, expar")->check(CLI::IsMember({"constant", "linear-ar", "expar"}));
        r.add("p", p, "lag order (defaults from the trend family)");
        r.add("rho", rho, "trend parameters, comma separated (linear-ar: zeros if omitted)");
        r.add("vol", vol, "volatility family: constant, exp-arch")->check(CLI::IsMember({"constant", "exp-arch"}));
        r.add("theta", theta, "volatility parameters, comma separated");
    }

    [[nodiscard]] CharnSpec build() const {
        CharnSpec s;
        s.rho = rho;
        s.theta = theta;
        s.trend = trend == "linear-ar" ? TrendFamily::LinearAR : trend == "expar" ? TrendFamily::Expar : TrendFamily::Constant;
        s.vol = vol == "exp-arch" ? VolFamily::ExpArch : VolFamily::Constant;
        s.p = p;
        if (s.trend == TrendFamily::LinearAR && rho.empty()) s.rho.assign(p > 0 ? p : 1, 0.0);
        if (s.p == 0 && s.trend == TrendFamily::LinearAR) s.p = s.rho.size();
        if (s.p == 0 && (s.trend == TrendFamily::Expar || s.vol == VolFamily::ExpArch)) s.p = 1;
        s.validate();
        return s;
    }
};

struct NoiseArgs {
    std::string family = "gaussian";
    double rate = 1.25;
    double fisher = 0.0;

    void bind(Registry& r, bool allow_kde) {
        auto* o = r.add("noise", family, allow_kde ? "noise density: gaussian, exponential, kde" : "noise density: gaussian, exponential");
        if (allow_kde) {
            o->check(CLI::IsMember({"gaussian", "exponential", "kde"}));
        } else {
            o->check(CLI::IsMember({"gaussian", "exponential"}));
        }
        r.add("rate", rate, "rate of the standardized exponential noise");
        r.add("fisher", fisher, "override I(f) when > 0");
    }

    /// `residuals` is called only for the kernel estimate.
    [[nodiscard]] NoiseDensity build(const std::function<std::vector<double>()>& residuals = {}) const {
        NoiseDensity d = NoiseDensity::gaussian();
        if (family == "exponential") d = NoiseDensity::shifted_exponential(rate);
        if (family == "kde") d = kde_fit(residuals());
        if (fisher > 0.0) d = d.with_fisher_override(fisher);
        return d;
    }
};

struct DetectArgs {
    std::size_t m = 20;
    std::size_t h = 20;
    double zeta = 0.01;
    std::size_t K = 2;
    std::vector<std::size_t> priors;
    std::size_t halfwidth = 10;
    std::size_t known_k = 0;
    bool circular = false;
    std::size_t min_seg = 0;
    std::string reference = "previous";

    void bind(Registry& r) {
        r.add("m", m, "length of the change-free historical prefix");
        r.add("h", h, "minimum distance between breaks");
        r.add("zeta", zeta, "decision band on |power - alpha|");
        r.add("K", K, "maximum number of breaks");
        r.add("priors", priors, "prior break locations, comma separated");
        r.add("halfwidth", halfwidth, "candidate window radius around each prior");
        r.add("known-k", known_k, "number of breaks when known (0 = unknown)");
        r.flag("circular", circular, "wrap the post-break window near the end of the series (s1)");
        r.add("min-seg", min_seg, "minimum segment length (0 = max(p+1, 5))");
        r.add("reference", reference, "reference level for beta estimates: previous, historical")
            ->check(CLI::IsMember({"previous", "historical"}));
    }

    [[nodiscard]] DetectionConfig build(double alpha) const {
        DetectionConfig c;
        c.m = m;
        c.h = h;
        c.zeta = zeta;
        c.alpha = alpha;
        c.max_breaks = K;
        c.priors = priors;
        c.halfwidth = halfwidth;
        if (known_k > 0) c.known_k = known_k;
        c.circular = circular;
        if (min_seg > 0) c.min_segment_length = min_seg;
        c.beta_options.reference = reference == "historical" ? ReferenceLevel::Historical : ReferenceLevel::PreviousSegment;
        return c;
    }
};

/// Text form of an echoed value, as accepted on the command line.
inline std::string replay_text(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_array()) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + replay_text(v[i]);
        return s;
    }
    return v.dump();
}

/// Loads a flat key = value file, or the "inputs" block of a previous result file.
inline std::vector<std::pair<std::string, std::string>> load_settings(const std::string& path, const std::set<std::string>& allowed) {
    const std::string text = io::read_file(path);
    std::vector<std::pair<std::string, std::string>> out;
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        json doc;
        try {
            doc = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
        }
        if (!doc.contains("inputs") || !doc["inputs"].is_object()) throw ConfigError("'" + path + "' has no inputs block");
        for (const auto& [k, v] : doc["inputs"].items()) {
            if (!allowed.count(k)) throw ConfigError("'" + path + "': unknown key '" + k + "'");
            if (v.is_array() && v.empty()) continue;
            out.emplace_back(k, replay_text(v));
        }
        return out;
    }
    const io::Config cfg = io::Config::parse(text, allowed);
    for (const auto& [k, v] : cfg.values()) out.emplace_back(k, v);
    return out;
}

struct Command {
    CLI::App* app = nullptr;
    std::unique_ptr<Registry> registry;
    std::function<json(json& inputs)> run;  // returns the outputs block
};

inline std::vector<std::size_t> default_breaks() { return {}; }

}  // namespace detail

/// Parses argv, runs one subcommand and writes its result file.
/// Returns 0 on success, 2 on configuration errors and 1 on computation errors.
inline int run_command(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    using detail::Registry;
    CLI::App app{"Weak change-point detection in CHARN time series", "charn"};
    app.require_subcommand(1);
    app.set_help_flag("-h,--help", "print this help message and exit");
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    std::string out_path;
    std::string csv_path;
    std::string config_path;
    bool timing = false;

    std::map<std::string, detail::Command> commands;
    auto make = [&](const std::string& name, const std::string& desc) -> detail::Command& {
        auto& c = commands[name];
        c.app = app.add_subcommand(name, desc);
        c.app->set_help_flag("--help", "print this help message and exit");  // -h would clash with --h
        c.app->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
        c.registry = std::make_unique<Registry>(c.app);
        c.app->add_option("--out", out_path, "structured result file (default: standard output)");
        c.app->add_option("--csv", csv_path, "table output (CSV)");
        c.app->add_option(name == "mc" ? "--scenario,--config" : "--config", config_path,
                          "settings file: key = value lines, or a previous result file");
        c.app->add_flag("--timing", timing, "add wall-clock timing to the result file");
        return c;
    };

    // Shared parameter blocks; each subcommand binds the ones it uses.
    detail::ModelArgs model;
    detail::NoiseArgs noise;
    detail::DetectArgs det;
    std::string input;
    std::size_t n = 200;
    std::vector<std::size_t> breaks;
    std::vector<double> gamma0;
    std::vector<double> beta;
    std::uint64_t seed = 1;
    std::size_t burn_in = kDefaultBurnIn;
    double alpha = 0.05;
    bool estimate_psi = false;
    bool estimate_gamma0 = false;

    auto segmentation = [&](std::size_t len) { return Segmentation(len, breaks); };
    auto levels = [&](const std::vector<double>& v, std::size_t segments, const char* what) {
        if (v.empty()) return std::vector<double>(segments, 0.0);
        if (v.size() != segments) throw ConfigError(std::string(what) + " must have length k+1 = " + std::to_string(segments));
        return v;
    };

    // simulate
    {
        auto& c = make("simulate", "simulate a CHARN path with mean shifts");
        auto& r = *c.registry;
        model.bind(r);
        noise.bind(r, false);
        r.add("n", n, "sample size");
        r.add("breaks", breaks, "break locations t_1 < ... < t_k");
        r.add("gamma0", gamma0, "segment levels (default 0)");
        r.add("beta", beta, "local shift magnitudes (default 0)");
        r.add("seed", seed, "random seed (CHARN_SEED overrides)");
        r.add("burn-in", burn_in, "discarded warm-up steps");
        c.run = [&](json&) {
            const CharnSpec spec = model.build();
            const Segmentation seg = segmentation(n);
            const MeanShiftParams shift{levels(gamma0, seg.segment_count(), "gamma0"), levels(beta, seg.segment_count(), "beta")};
            const SimulatedPath path = simulate_path(spec, seg, shift, noise.build(), n, seed, burn_in);
            json o;
            o["n"] = n;
            o["initial_state"] = path.initial_state.z;
            if (!csv_path.empty()) {
                io::save_csv(csv_path, path.series);
                o["csv"] = csv_path;
            } else {
                o["series"] = std::vector<double>(path.series.values().begin(), path.series.values().end());
            }
            return o;
        };
    }

    // Nuisance fitting shared by test and detect.
    struct Fitted {
        CharnSpec spec;
        std::vector<double> gamma;
        json report;
    };
    auto fit_model = [&](const TimeSeries& x, const Segmentation& seg, std::vector<double> gamma, bool fit_gamma) {
        Fitted f{model.build(), std::move(gamma), json::object()};
        if (fit_gamma) f.gamma = fit_gamma0(x, seg, f.spec);
        if (estimate_psi) {
            FitOptions opt;
            opt.seed = seed;
            const FitResult fit = fit_psi(x, f.spec, seg, f.gamma, ParamBounds::defaults_for(f.spec), opt);
            f.spec = fit.spec;
            if (fit_gamma) f.gamma = fit_gamma0(x, seg, f.spec);
            f.report["psi_hat"] = fit.psi_hat;
            f.report["neg_loglik"] = fit.neg_loglik;
            f.report["converged"] = fit.converged;
            f.report["projected"] = fit.projected;
            f.report["degenerate"] = fit.degenerate;
        }
        if (fit_gamma) f.report["gamma0_hat"] = f.gamma;
        return f;
    };
    auto residuals_for = [&](const TimeSeries& x, const Fitted& f, const Segmentation& seg, std::size_t prefix) {
        auto eps = residuals(x, f.spec, f.gamma, seg);
        if (prefix >= kMinKdeSample && prefix < eps.size()) eps.resize(prefix);
        return eps;
    };

    // test
    {
        auto& c = make("test", "likelihood-ratio test for mean shifts at given breaks");
        auto& r = *c.registry;
        r.add("input", input, "series CSV")->required();
        model.bind(r);
        noise.bind(r, true);
        r.add("breaks", breaks, "break locations t_1 < ... < t_k");
        r.add("gamma0", gamma0, "null segment levels (default 0)");
        r.add("beta", beta, "alternative direction beta (length k+1)")->required();
        r.add("alpha", alpha, "test level");
        r.flag("estimate-psi", estimate_psi, "fit (rho, theta) by Gaussian QMLE first");
        r.flag("estimate-gamma0", estimate_gamma0, "fit gamma0 by maximum likelihood");
        r.add("seed", seed, "seed for the optimizer restarts");
        c.run = [&](json&) {
            const TimeSeries x = io::load_csv(input);
            const Segmentation seg = segmentation(x.size());
            const std::vector<double> b = levels(beta, seg.segment_count(), "beta");
            const Fitted f = fit_model(x, seg, levels(gamma0, seg.segment_count(), "gamma0"), estimate_gamma0);
            const NoiseDensity nd = noise.build([&] { return residuals_for(x, f, seg, 0); });
            const LrContext ctx{x, f.spec, seg, nd};
            const TestOutcome t = test_statistic(ctx, f.gamma, b, alpha);
            json o;
            o["delta_n"] = t.delta_n;
            o["mu_hat"] = t.mu_hat;
            o["varpi_hat"] = t.varpi_hat;
            o["t_n"] = t.t_n;
            o["z_alpha"] = t.z_alpha;
            o["reject"] = t.reject;
            o["theoretical_power"] = theoretical_power(t.varpi_hat, alpha);
            o["fisher"] = nd.fisher();
            try {
                o["lambda_n"] = loglik_ratio(ctx, f.gamma, b);
            } catch (const Error& e) {
                o["lambda_n_error"] = e.what();
            }
            if (!f.report.empty()) o["fit"] = f.report;
            return o;
        };
    }

    std::size_t surface_k = 1;
    std::size_t step = 1;
    // power-surface
    {
        auto& c = make("power-surface", "estimated local power over candidate break vectors");
        auto& r = *c.registry;
        r.add("input", input, "series CSV")->required();
        model.bind(r);
        noise.bind(r, true);
        r.add("alpha", alpha, "test level");
        r.add("k", surface_k, "number of breaks per candidate (1 or 2)")->check(CLI::Range(1, 2));
        r.add("m", det.m, "historical prefix; candidates start after it");
        r.add("h", det.h, "minimum distance between the two breaks (k = 2)");
        r.add("step", step, "stride between candidate locations")->check(CLI::PositiveNumber);
        r.add("min-seg", det.min_seg, "minimum segment length (0 = max(p+1, 5))");
        r.flag("estimate-psi", estimate_psi, "fit (rho, theta) by Gaussian QMLE first");
        r.add("seed", seed, "seed for the optimizer restarts");
        c.run = [&](json&) {
            const TimeSeries x = io::load_csv(input);
            const std::size_t len = x.size();
            const Fitted f = fit_model(x, Segmentation(len, {}), {0.0}, true);
            const NoiseDensity nd = noise.build([&] { return residuals_for(x, f, Segmentation(len, {}), det.m); });
            const std::size_t ms = det.min_seg > 0 ? det.min_seg : default_min_segment_length(f.spec.p);
            const std::size_t first = std::max(det.m + 1, ms + 1);
            const std::size_t last = len + 1 > ms ? len + 1 - ms : 0;
            std::vector<Segmentation> cands;
            for (std::size_t t1 = first; t1 <= last; t1 += step) {
                if (surface_k == 1) {
                    cands.emplace_back(len, std::vector<std::size_t>{t1}, ms);
                    continue;
                }
                for (std::size_t t2 = t1 + std::max(det.h, ms); t2 <= last; t2 += step)
                    cands.emplace_back(len, std::vector<std::size_t>{t1, t2}, ms);
            }
            if (cands.empty()) throw ConfigError("no admissible candidate break vector");
            const PowerSurface surf = power_surface(x, f.spec, cands, nd, alpha);
            io::Table table;
            table.columns = surface_k == 1 ? std::vector<std::string>{"t1", "power", "varpi_hat", "beta2"}
                                           : std::vector<std::string>{"t1", "t2", "power", "varpi_hat", "beta2", "beta3"};
            json best = nullptr;
            double best_power = -1.0;
            double best_varpi = -1.0;  // ranks candidates; power rounds to 1 for strong shifts
            std::size_t failures = 0;
            for (const auto& [key, entry] : surf) {
                if (!entry.result) {
                    ++failures;
                    continue;
                }
                const PowerResult& pr = *entry.result;
                std::vector<std::string> row;
                for (std::size_t t : key) row.push_back(std::to_string(t));
                row.push_back(io::format_double(pr.power));
                row.push_back(io::format_double(pr.varpi_hat));
                for (std::size_t j = 1; j < pr.beta_hat.size(); ++j) row.push_back(io::format_double(pr.beta_hat[j]));
                table.add(std::move(row));
                if (pr.varpi_hat > best_varpi) {
                    best_varpi = pr.varpi_hat;
                    best_power = pr.power;
                    best = key;
                }
            }
            json o;
            o["candidates"] = surf.size();
            o["failures"] = failures;
            o["argmax"] = best;
            o["max_power"] = best_power;
            if (!f.report.empty()) o["fit"] = f.report;
            if (!csv_path.empty()) io::write_file(csv_path, table.to_csv());
            return o;
        };
    }

    std::string strategy = "s2";
    // detect
    {
        auto& c = make("detect", "detect and locate weak mean shifts");
        auto& r = *c.registry;
        r.add("input", input, "series CSV")->required();
        r.add("strategy", strategy, "s1, s2 or s3")->check(CLI::IsMember({"s1", "s2", "s3"}));
        model.bind(r);
        noise.bind(r, true);
        det.bind(r);
        r.add("alpha", alpha, "test level");
        r.flag("estimate-psi", estimate_psi, "fit (rho, theta) by Gaussian QMLE first");
        r.add("seed", seed, "seed for the optimizer restarts");
        c.run = [&](json&) {
            const TimeSeries x = io::load_csv(input);
            const Segmentation whole(x.size(), {});
            const Fitted f = fit_model(x, whole, {0.0}, true);
            const NoiseDensity nd = noise.build([&] { return residuals_for(x, f, whole, det.m); });
            const DetectionConfig cfg = det.build(alpha);
            json o;
            io::Table table;
            table.columns = {"locations", "power"};
            auto add_trace = [&](const std::vector<TraceRecord>& trace) {
                for (const auto& t : trace) {
                    std::string loc;
                    for (std::size_t i = 0; i < t.locations.size(); ++i) loc += (i ? ";" : "") + std::to_string(t.locations[i]);
                    table.add({loc, io::format_double(t.power)});
                }
            };
            if (strategy == "s1") {
                const S1Result s = scan_s1(x, f.spec, nd, cfg);
                o["detected"] = s.detected;
                o["argmax"] = s.argmax;
                o["max_power"] = s.max_power;
                add_trace(s.trace);
            } else {
                const DetectionResult d = strategy == "s2" ? detect_s2(x, f.spec, nd, cfg) : detect_s3(x, f.spec, nd, cfg);
                o["k_hat"] = d.k_hat;
                o["t_hat"] = d.t_hat;
                o["beta_hat"] = d.beta_hat;
                o["max_power"] = d.max_power;
                o["evaluations"] = d.trace.size();
                o["warnings"] = d.warnings;
                add_trace(d.trace);
            }
            if (!f.report.empty()) o["fit"] = f.report;
            if (!csv_path.empty()) io::write_file(csv_path, table.to_csv());
            return o;
        };
    }

    // mc
    std::size_t reps = 500;
    std::size_t threads = 1;
    std::string method = "lrt";
    std::string hypothesis = "alternative";
    std::string report = "auto";
    bool estimate_noise = false;
    {
        auto& c = make("mc", "Monte Carlo size, power, LAN and location experiments");
        auto& r = *c.registry;
        model.bind(r);
        noise.bind(r, false);
        det.bind(r);
        r.add("n", n, "sample size");
        r.add("breaks", breaks, "true break locations");
        r.add("gamma0", gamma0, "segment levels (default 0)");
        r.add("beta", beta, "local shift magnitudes (default 0)");
        r.add("reps", reps, "number of replications")->check(CLI::PositiveNumber);
        r.add("seed", seed, "master seed (CHARN_SEED overrides)");
        r.add("method", method, "lrt, s1, s2, s3 or scusum")->check(CLI::IsMember({"lrt", "s1", "s2", "s3", "scusum"}));
        r.add("hypothesis", hypothesis, "null or alternative")->check(CLI::IsMember({"null", "alternative"}));
        r.add("report", report, "auto, size, lan or location")->check(CLI::IsMember({"auto", "size", "lan", "location"}));
        r.add("alpha", alpha, "test level");
        // Not echoed: results do not depend on the thread count.
        c.app->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
        r.add("burn-in", burn_in, "discarded warm-up steps");
        r.flag("estimate-psi", estimate_psi, "fit (rho, theta) in each replication");
        r.flag("estimate-gamma0", estimate_gamma0, "fit gamma0 in each replication (lrt)");
        r.flag("estimate-noise", estimate_noise, "kernel estimate of f in each replication");
        c.run = [&](json& inputs) {
            (void)inputs;
            Scenario sc;
            sc.spec = model.build();
            sc.n = n;
            sc.seg = Segmentation(n, breaks);
            sc.gamma0 = levels(gamma0, sc.seg.segment_count(), "gamma0");
            sc.beta = levels(beta, sc.seg.segment_count(), "beta");
            sc.noise = noise.build();
            sc.reps = reps;
            sc.master_seed = seed;
            sc.method = parse_method(method);
            sc.hypothesis = hypothesis == "null" ? Hypothesis::Null : Hypothesis::Alternative;
            sc.alpha = alpha;
            sc.threads = threads;
            sc.burn_in = burn_in;
            sc.estimate_psi = estimate_psi;
            sc.estimate_gamma0 = estimate_gamma0;
            sc.estimate_noise = estimate_noise;
            sc.detection = det.build(alpha);
            std::string kind = report;
            if (kind == "auto") kind = (sc.method == Method::S2 || sc.method == Method::S3) ? "location" : "size";

            json o;
            o["report"] = kind;
            io::Table table;
            if (kind == "size") {
                const RateResult rr = empirical_size_power(sc);
                table.columns = {"method", "hypothesis", "reps", "rejections", "rate", "ci_lo", "ci_hi"};
                table.add({method, hypothesis, std::to_string(rr.reps), std::to_string(rr.rejections), io::format_double(rr.rate),
                           io::format_double(rr.lo), io::format_double(rr.hi)});
                o["rate"] = rr.rate;
                o["rejections"] = rr.rejections;
                o["ci_half_width"] = rr.half_width;
                if (sc.method == Method::LRT && sc.spec.vol == VolFamily::Constant) {
                    double mu = 0.0;
                    for (std::size_t j = 1; j <= sc.seg.segment_count(); ++j) {
                        const double a = static_cast<double>(sc.seg.length(j)) / static_cast<double>(n);
                        mu += a * sc.beta[j - 1] * sc.beta[j - 1] * sc.noise.fisher() / (sc.spec.theta[0] * sc.spec.theta[0]);
                    }
                    if (sc.noise.fisher() > 0.0) o["theoretical_power"] = theoretical_power(std::sqrt(mu), alpha);
                }
            } else if (kind == "lan") {
                const LanSummary s = lan_diagnostic(sc);
                table.columns = {"rep", "delta_n", "t_n", "lambda_n", "mu_hat"};
                for (std::size_t i = 0; i < s.samples.size(); ++i) {
                    const auto& x = s.samples[i];
                    table.add({std::to_string(i), io::format_double(x.delta_n), io::format_double(x.t_n), io::format_double(x.lambda_n),
                               io::format_double(x.mu_hat)});
                }
                o["mean_delta"] = s.mean_delta;
                o["var_delta"] = s.var_delta;
                o["mean_t"] = s.mean_t;
                o["var_t"] = s.var_t;
                o["mean_mu_hat"] = s.mean_mu_hat;
                o["ks_statistic"] = s.ks.statistic;
                o["ks_p_value"] = s.ks.p_value;
                o["mean_lan_remainder"] = s.mean_remainder;
            } else {
                const LocationSummary s = location_estimate_mean(sc);
                table.columns = {"break", "truth", "mean", "mode", "hit_rate_2", "mean_abs_error"};
                json per = json::array();
                for (std::size_t j = 0; j < s.breaks.size(); ++j) {
                    const auto& b = s.breaks[j];
                    table.add({std::to_string(j + 1), std::to_string(b.truth), io::format_double(b.mean), std::to_string(b.mode),
                               io::format_double(b.hit_rate_2), io::format_double(b.mean_abs_error)});
                    per.push_back({{"truth", b.truth}, {"mean", b.mean}, {"mode", b.mode}, {"hit_rate_2", b.hit_rate_2},
                                   {"mean_abs_error", b.mean_abs_error}});
                }
                o["k_accuracy"] = s.k_accuracy;
                o["exact_hit_rate"] = s.exact_hit_rate;
                o["breaks"] = per;
            }
            if (!csv_path.empty()) io::write_file(csv_path, table.to_csv());
            return o;
        };
    }

    // detrend
    std::size_t order = 5;
    std::string endpoints = "shrink";
    std::string trend_csv;
    {
        auto& c = make("detrend", "centred moving-average detrending");
        auto& r = *c.registry;
        r.add("input", input, "series CSV")->required();
        r.add("order", order, "odd moving-average order");
        r.add("endpoints", endpoints, "shrink or drop")->check(CLI::IsMember({"shrink", "drop"}));
        c.app->add_option("--trend-csv", trend_csv, "trend output (CSV)");
        c.run = [&](json&) {
            const TimeSeries x = io::load_csv(input);
            const io::DetrendResult d = io::detrend_ma(x, order, endpoints == "drop" ? io::EndpointMode::Drop : io::EndpointMode::Shrink);
            if (!csv_path.empty()) io::save_csv(csv_path, d.residual);
            if (!trend_csv.empty()) io::save_csv(trend_csv, d.trend);
            double mean = 0.0;
            for (double v : d.residual.values()) mean += v / static_cast<double>(d.residual.size());
            json o;
            o["n"] = d.residual.size();
            o["offset"] = d.offset;
            o["residual_mean"] = mean;
            return o;
        };
    }

    // Settings files are expanded into --key=value tokens ahead of the real
    // arguments, so explicit flags win under the take-last policy.
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    try {
        if (!args.empty() && commands.count(args[0])) {
            const auto& cmd = commands.at(args[0]);
            for (std::size_t i = 1; i < args.size(); ++i) {
                std::string file;
                const std::string& a = args[i];
                for (const std::string key : {"--config", "--scenario"}) {
                    if (a == key && i + 1 < args.size()) file = args[i + 1];
                    if (a.rfind(key + "=", 0) == 0) file = a.substr(key.size() + 1);
                }
                if (file.empty()) continue;
                std::vector<std::string> injected;
                for (const auto& [k, v] : detail::load_settings(file, cmd.registry->keys())) {
                    const CLI::Option* opt = cmd.app->get_option("--" + k);
                    if (opt->get_expected_min() == 0) {
                        if (v == "true" || v == "1" || v == "yes") injected.push_back("--" + k);
                        else if (!(v == "false" || v == "0" || v == "no")) throw ConfigError("'" + k + "' must be true or false");
                    } else {
                        injected.push_back("--" + k + "=" + v);
                    }
                }
                args.insert(args.begin() + 1, injected.begin(), injected.end());
                break;
            }
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        const auto subs = app.get_subcommands();
        out << (subs.empty() ? app.help() : subs.front()->help());
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        auto subs = app.get_subcommands();
        err << (subs.empty() ? app.help() : subs.front()->help());
        return 2;
    }

    if (const char* env = std::getenv("CHARN_SEED")) {
        try {
            std::size_t used = 0;
            seed = std::stoull(env, &used);
            if (used != std::string(env).size()) throw std::invalid_argument("trailing text");
        } catch (const std::exception&) {
            err << "error: CHARN_SEED must be an unsigned integer\n";
            return 2;
        }
    }

    const auto start = std::chrono::steady_clock::now();
    const std::string name = app.get_subcommands().front()->get_name();
    auto& cmd = commands.at(name);
    try {
        json inputs = cmd.registry->inputs();
        json doc;
        doc["version"] = kResultVersion;
        doc["command"] = name;
        json outputs = cmd.run(inputs);
        doc["inputs"] = cmd.registry->inputs();
        doc["outputs"] = std::move(outputs);
        if (timing) {
            const std::chrono::duration<double> secs = std::chrono::steady_clock::now() - start;
            doc["timing"] = {{"seconds", secs.count()}};
        }
        const std::string text = doc.dump(2) + "\n";
        if (out_path.empty()) {
            out << text;
        } else {
            io::write_file(out_path, text);
        }
        return 0;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        err << "input error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace charn::cli

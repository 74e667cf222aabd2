#pragma once

// Monte Carlo experiment runner: random scenes, estimation, RMSE and outage
// aggregation. Trial seeds come from the master seed by counter, and results
// are reduced in trial order, so output does not depend on the worker count.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "likelihood.hpp"
#include "qp.hpp"
#include "rng.hpp"
#include "scene.hpp"

namespace shadowcast {

enum class Estimator { ML, MMSE };

inline const char* to_string(Estimator e) { return e == Estimator::ML ? "ml" : "mmse"; }
inline const char* to_string(DistanceMode m) { return m == DistanceMode::Line ? "line" : "segment"; }

/// Channel parameters of the physical setup. Indicators are error-free, so
/// none of these enter the simulation; they are kept for the record.
struct ChannelParams {
    double lambertian_order = 1.0;
    double led_power_mw = 10.0;
    double pd_area_mm2 = 1.0;
    double fov_half_angle_deg = 70.0;
};

/// True object; unset fields are drawn per trial.
struct ObjectSpec {
    std::optional<Point2> center;
    std::optional<double> radius;
    double placement_margin = 0.5;  // wall clearance of a random centre
};

struct ScenarioConfig {
    Room room;
    ChannelParams channel;
    int grid_L = 5;
    std::size_t num_ue = 10;
    double ue_dmin = 0.5;
    double ue_height = kUeHeight;
    /// Reject UE positions inside the object's footprint.
    bool ue_keep_out = true;
    RadiusPrior prior;
    ObjectSpec object;
    Estimator estimator = Estimator::MMSE;
    DistanceMode distance_mode = DistanceMode::Line;
    double alpha0 = 3.0;
    double alpha_step = 0.5;
    bool segment_window = true;
    double window_margin = 0.1;
    std::optional<double> local_radius = 0.25;
    double ml_resolution = 0.01;
    std::size_t trials = 1000;
    std::uint64_t seed = 1;

    QpOptions qp_options() const {
        return {alpha0, alpha_step, segment_window, window_margin, Rect::of(room), local_radius};
    }
    std::optional<double> radius_window() const {
        return segment_window ? std::optional<double>(window_margin) : std::nullopt;
    }
};

struct TrialResult {
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    Point2 theta_true;
    double r_true = 0.0;
    std::optional<Point2> theta_hat;
    std::optional<double> r_hat;
    bool outage = false;
    std::size_t n_blocked = 0;
    std::size_t n_nonblocked = 0;
    std::optional<double> alpha_final;  // MMSE only
};

/// A sampled scene: everything the estimator sees plus the ground truth.
struct Scene {
    Cylinder object;
    std::vector<Point3> pds;
    std::vector<Point3> ues;
    ObservationSet obs;
};

inline Cylinder sample_object(const ScenarioConfig& cfg, Rng& rng) {
    Cylinder obj;
    if (cfg.object.center) {
        obj.center = *cfg.object.center;
    } else {
        const double m = cfg.object.placement_margin;
        obj.center = {rng.uniform(m, cfg.room.width - m), rng.uniform(m, cfg.room.depth - m)};
    }
    if (cfg.object.radius) {
        obj.radius = *cfg.object.radius;
    } else {
        // A Gaussian radius can be non-physical; resample below 1 cm.
        do {
            obj.radius = rng.normal(cfg.prior.mu_r, cfg.prior.sigma_r);
        } while (!(obj.radius > 0.01));
    }
    return obj;
}

inline Scene sample_scene(const ScenarioConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    Scene s;
    s.object = sample_object(cfg, rng);
    s.pds = pd_grid_positions(cfg.grid_L, cfg.room);
    const auto keep_out = cfg.ue_keep_out ? std::optional<Cylinder>(s.object) : std::nullopt;
    s.ues = lift_ues(poisson_disk_sample(cfg.room, cfg.ue_dmin, cfg.num_ue, rng, keep_out), cfg.ue_height);
    s.obs = simulate_observations(s.pds, s.ues, s.object);
    return s;
}

inline TrialResult run_trial(const ScenarioConfig& cfg, std::uint64_t trial_seed, std::size_t trial_index = 0) {
    const Scene s = sample_scene(cfg, trial_seed);
    TrialResult r;
    r.trial = trial_index;
    r.seed = trial_seed;
    r.theta_true = s.object.center;
    r.r_true = s.object.radius;
    r.n_blocked = s.obs.blocked.size();
    r.n_nonblocked = s.obs.nonblocked.size();
    if (s.obs.outage()) {
        r.outage = true;
        return r;
    }
    if (cfg.estimator == Estimator::MMSE) {
        const auto sol = mmse_estimate(s.obs, cfg.prior, cfg.qp_options());
        r.theta_hat = sol.theta_star;
        r.alpha_final = sol.alpha_final;
    } else {
        r.theta_hat = ml_grid_search(s.obs, cfg.prior, GridSpec::over(cfg.room, cfg.ml_resolution),
                                     cfg.distance_mode)
                          .theta;
    }
    r.r_hat = estimate_radius(*r.theta_hat, s.obs, cfg.prior, cfg.radius_window());
    return r;
}

enum class SweepVar { NumUe, Radius, GridL };

inline const char* to_string(SweepVar v) {
    switch (v) {
        case SweepVar::NumUe: return "num_ue";
        case SweepVar::Radius: return "radius";
        case SweepVar::GridL: return "grid_L";
    }
    return "?";
}

inline std::optional<SweepVar> parse_sweep_var(const std::string& s) {
    if (s == "num_ue") return SweepVar::NumUe;
    if (s == "radius") return SweepVar::Radius;
    if (s == "grid_L") return SweepVar::GridL;
    return std::nullopt;
}

inline ScenarioConfig with_sweep_value(ScenarioConfig cfg, SweepVar var, double value) {
    switch (var) {
        case SweepVar::NumUe: cfg.num_ue = static_cast<std::size_t>(std::llround(value)); break;
        case SweepVar::Radius: cfg.object.radius = value; break;
        case SweepVar::GridL: cfg.grid_L = static_cast<int>(std::llround(value)); break;
    }
    return cfg;
}

struct MetricsRow {
    std::string sweep_var;
    double sweep_value = 0.0;
    int grid_L = 0;
    Estimator estimator = Estimator::MMSE;
    std::size_t num_ue = 0;
    std::size_t trials = 0;
    std::size_t trials_used = 0;  // non-outage trials entering the RMSE
    double rmse_theta = 0.0;
    double rmse_theta_stderr = 0.0;
    double rmse_r = 0.0;
    double rmse_r_stderr = 0.0;
    double outage_prob = 0.0;
    double outage_stderr = 0.0;
};

namespace detail {

struct RmseAccumulator {
    double sum = 0.0;
    double sum_sq = 0.0;  // of squared errors
    std::size_t n = 0;

    void add(double err2) {
        sum += err2;
        sum_sq += err2 * err2;
        ++n;
    }
    double rmse() const { return n ? std::sqrt(sum / static_cast<double>(n)) : 0.0; }
    /// Delta-method standard error of the RMSE from the spread of squared errors.
    double stderr_() const {
        if (n < 2) return 0.0;
        const double nn = static_cast<double>(n);
        const double mean = sum / nn;
        const double var = std::max(0.0, (sum_sq - nn * mean * mean) / (nn - 1.0));
        const double rm = std::sqrt(mean);
        return rm > 0.0 ? std::sqrt(var / nn) / (2.0 * rm) : 0.0;
    }
};

}  // namespace detail

/// Aggregate trial records in order. RMSE runs over non-outage trials only.
inline MetricsRow aggregate(const std::vector<TrialResult>& trials) {
    MetricsRow row;
    detail::RmseAccumulator th, rr;
    std::size_t outages = 0;
    for (const auto& t : trials) {
        if (t.outage || !t.theta_hat) {
            ++outages;
            continue;
        }
        th.add(norm2(*t.theta_hat - t.theta_true));
        const double dr = *t.r_hat - t.r_true;
        rr.add(dr * dr);
    }
    row.trials = trials.size();
    row.trials_used = th.n;
    row.rmse_theta = th.rmse();
    row.rmse_theta_stderr = th.stderr_();
    row.rmse_r = rr.rmse();
    row.rmse_r_stderr = rr.stderr_();
    if (!trials.empty()) {
        const double n = static_cast<double>(trials.size());
        row.outage_prob = static_cast<double>(outages) / n;
        row.outage_stderr = std::sqrt(row.outage_prob * (1.0 - row.outage_prob) / n);
    }
    return row;
}

/// Worker count: hardware concurrency, capped by SHADOWCAST_THREADS.
inline unsigned default_workers() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("SHADOWCAST_THREADS")) {
        char* end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (end != env && cap >= 1) n = std::min(n, static_cast<unsigned>(cap));
    }
    return n;
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads. The exception of the
/// lowest failing index is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::size_t failed_at = n;
    std::exception_ptr failure;
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (i < failed_at) {
                    failed_at = i;
                    failure = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

struct SweepPoint {
    MetricsRow metrics;
    std::vector<TrialResult> trials;
};

/// Runs cfg.trials trials at every sweep value. Trial k of point p is record
/// c = p * cfg.trials + k and uses derive_seed(cfg.seed, c).
inline std::vector<SweepPoint> run_monte_carlo(const ScenarioConfig& cfg, SweepVar var,
                                               const std::vector<double>& values,
                                               unsigned workers = default_workers()) {
    std::vector<SweepPoint> out(values.size());
    for (std::size_t p = 0; p < values.size(); ++p) {
        const ScenarioConfig pc = with_sweep_value(cfg, var, values[p]);
        auto& trials = out[p].trials;
        trials.resize(cfg.trials);
        parallel_for(cfg.trials, workers, [&](std::size_t k) {
            const std::uint64_t counter = p * cfg.trials + k;
            trials[k] = run_trial(pc, derive_seed(cfg.seed, counter), counter);
        });
        MetricsRow row = aggregate(trials);
        row.sweep_var = to_string(var);
        row.sweep_value = values[p];
        row.grid_L = pc.grid_L;
        row.estimator = pc.estimator;
        row.num_ue = pc.num_ue;
        out[p].metrics = row;
    }
    return out;
}

}  // namespace shadowcast

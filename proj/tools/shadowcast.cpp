// shadowcast: estimate one scene or run a Monte Carlo sweep.
//
//   shadowcast estimate <config> [--seed N] [--estimator ml|mmse] [--distance-mode line|segment]
//   shadowcast sweep <config> [--var num_ue|radius|grid_L --values a,b,c] [--trials N] [--out DIR]
//
// Exit status: 0 success, 1 configuration or usage error, 2 outage (estimate).

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <shadowcast/shadowcast.hpp>

namespace fs = std::filesystem;
using namespace shadowcast;

namespace {

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trials;
    std::string estimator;
    std::string distance_mode;
};

void apply(const Overrides& o, ScenarioConfig& c) {
    if (o.seed) c.seed = *o.seed;
    if (o.trials) c.trials = *o.trials;
    if (o.estimator == "ml") c.estimator = Estimator::ML;
    if (o.estimator == "mmse") c.estimator = Estimator::MMSE;
    if (o.distance_mode == "line") c.distance_mode = DistanceMode::Line;
    if (o.distance_mode == "segment") c.distance_mode = DistanceMode::Segment;
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

const char* yes_no(bool b) { return b ? "yes" : "no"; }

int run_estimate(const std::string& path, const Overrides& o) {
    RunConfig rc = load_config(path);
    ScenarioConfig& c = rc.scenario;
    apply(o, c);

    const Scene s = sample_scene(c, derive_seed(c.seed, 0));
    std::printf("scene: room %.2fx%.2f m, grid %dx%d, %zu UE, estimator %s, distance %s\n", c.room.width,
                c.room.depth, c.grid_L, c.grid_L, c.num_ue, to_string(c.estimator), to_string(c.distance_mode));
    std::printf("object_true: center (%.4f, %.4f) radius %.4f\n", s.object.center.x, s.object.center.y,
                s.object.radius);
    std::printf("links: blocked %zu, non-blocked %zu\n", s.obs.blocked.size(), s.obs.nonblocked.size());
    if (s.obs.outage()) {
        std::printf("outage: no blocked links observed\n");
        return 2;
    }

    Point2 theta;
    if (c.estimator == Estimator::MMSE) {
        const QpOptions opt = c.qp_options();
        const KktSolution sol = mmse_estimate(s.obs, c.prior, opt);
        theta = sol.theta_star;
        std::printf("theta_hat: (%.4f, %.4f)\n", theta.x, theta.y);
        std::printf("r_hat: %.4f\n", estimate_radius(theta, s.obs, c.prior, c.radius_window()));
        std::printf("theta_g: (%.4f, %.4f)%s\n", sol.theta_g.x, sol.theta_g.y,
                    sol.rank_deficient ? " [rank deficient]" : "");
        std::printf("solver: alpha %.2f, d_min %.4f, relaxations %d, infeasible_relaxed %s, objective %.6g\n",
                    sol.alpha_final, sol.d_min, sol.relaxations, yes_no(sol.infeasible_relaxed), sol.objective);

        QpProblem p = make_problem(s.obs, c.prior, sol.alpha_final, opt);
        if (sol.infeasible_relaxed) p.constrained.clear();
        const KktReport k = verify_kkt(p, sol);
        std::printf("kkt: stationarity %.3g, min multiplier %.3g, min slack %.3g, complementarity %.3g -> %s\n",
                    k.stationarity, k.min_multiplier, k.min_slack, k.max_complementarity, k.ok() ? "ok" : "FAIL");
        for (const auto& b : sol.active_set) {
            if (b.domain_wall)
                std::printf("active: wall %zu, multiplier %.6g\n", b.index, b.multiplier);
            else
                std::printf("active: link %zu side %c, multiplier %.6g\n", b.index, b.side == Side::Plus ? '+' : '-',
                            b.multiplier);
        }
    } else {
        const MlEstimate ml = ml_grid_search(s.obs, c.prior, GridSpec::over(c.room, c.ml_resolution),
                                             c.distance_mode, default_workers());
        theta = ml.theta;
        std::printf("theta_hat: (%.4f, %.4f)\n", theta.x, theta.y);
        std::printf("r_hat: %.4f\n", estimate_radius(theta, s.obs, c.prior, c.radius_window()));
        std::printf("loglik: %.6f\n", ml.loglik);
    }
    std::printf("error: %.4f m\n", distance(theta, s.object.center));
    return 0;
}

int run_sweep(const std::string& path, const Overrides& o, const std::string& var_name,
              const std::vector<double>& values, const std::string& out_dir) {
    RunConfig rc = load_config(path);
    apply(o, rc.scenario);

    if (!var_name.empty() || !values.empty()) {
        const auto var = parse_sweep_var(var_name.empty() ? "num_ue" : var_name);
        if (!var) throw ConfigError("--var: expected one of num_ue, radius, grid_L, got '" + var_name + "'");
        if (values.empty()) throw ConfigError("--values: at least one value is required");
        rc.sweep = SweepSpec{*var, values};
    }
    if (!rc.sweep) rc.sweep = SweepSpec{SweepVar::NumUe, {static_cast<double>(rc.scenario.num_ue)}};
    const ScenarioConfig& c = rc.scenario;

    fs::create_directories(out_dir);
    const fs::path metrics_path = fs::path(out_dir) / "metrics.csv";
    const fs::path trials_path = fs::path(out_dir) / "trials.csv";
    {
        nlohmann::json m;
        m["manifest_version"] = 1;
        m["version"] = kVersion;
        m["timestamp"] = utc_timestamp();
        m["master_seed"] = c.seed;
        m["config"] = to_json(rc);
        m["outputs"] = {{"metrics", metrics_path.string()}, {"trials", trials_path.string()}};
        std::ofstream(fs::path(out_dir) / "manifest.json") << m.dump(2) << '\n';
    }

    const auto points = run_monte_carlo(c, rc.sweep->var, rc.sweep->values, default_workers());
    {
        std::ofstream f(metrics_path);
        write_metrics_csv(f, points);
    }
    {
        std::ofstream f(trials_path);
        write_trials_csv(f, points);
    }

    std::printf("%-8s %10s %6s %8s %13s %11s %9s\n", "var", "value", "grid", "trials", "rmse_theta_m", "rmse_r_m",
                "outage");
    for (const auto& p : points) {
        const auto& m = p.metrics;
        std::printf("%-8s %10g %6d %8zu %13.4f %11.4f %9.4f\n", m.sweep_var.c_str(), m.sweep_value, m.grid_L, m.trials,
                    m.rmse_theta, m.rmse_r, m.outage_prob);
    }
    std::printf("wrote %s, %s\n", metrics_path.c_str(), trials_path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"VLC blockage-based object localization"};
    app.require_subcommand(1);

    Overrides o;
    std::string config, var_name, out_dir = "results";
    std::vector<double> values;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("config", config, "scenario configuration (JSON) or run manifest")->required();
        sub->add_option("--seed", o.seed, "master seed");
        sub->add_option("--estimator", o.estimator, "ml or mmse")->check(CLI::IsMember({"ml", "mmse"}));
        sub->add_option("--distance-mode", o.distance_mode, "line or segment")
            ->check(CLI::IsMember({"line", "segment"}));
    };
    auto* est = app.add_subcommand("estimate", "estimate the object in one sampled scene");
    add_common(est);
    auto* sweep = app.add_subcommand("sweep", "Monte Carlo sweep; writes metrics.csv and trials.csv");
    add_common(sweep);
    sweep->add_option("--trials", o.trials, "trials per sweep point")->check(CLI::PositiveNumber);
    sweep->add_option("--out", out_dir, "output directory");
    sweep->add_option("--var", var_name, "sweep variable: num_ue, radius or grid_L");
    sweep->add_option("--values", values, "comma-separated sweep values")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*est) return run_estimate(config, o);
        return run_sweep(config, o, var_name, values, out_dir);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const Outage& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

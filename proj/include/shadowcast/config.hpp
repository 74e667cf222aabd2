#pragma once

// Scenario configuration files (JSON with nested sections) and run manifests.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "harness.hpp"

namespace shadowcast {

inline constexpr const char* kVersion = "0.1.0";

struct SweepSpec {
    SweepVar var = SweepVar::NumUe;
    std::vector<double> values;
};

struct RunConfig {
    ScenarioConfig scenario;
    std::optional<SweepSpec> sweep;
};

namespace detail {

using nlohmann::json;

/// One JSON object with its dotted path; tracks consumed keys so unknown
/// keys can be reported.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail("", "expected an object");
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        const std::string where = key.empty() ? path_ : (path_.empty() ? key : path_ + "." + key);
        throw ConfigError(where + ": " + what);
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) && !j_.at(key).is_null();
    }

    double number(const std::string& key, double def) {
        if (!has(key)) return def;
        const auto& v = j_.at(key);
        if (!v.is_number()) fail(key, "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) fail(key, "must be finite");
        return d;
    }

    std::int64_t integer(const std::string& key, std::int64_t def) {
        if (!has(key)) return def;
        const auto& v = j_.at(key);
        if (!v.is_number_integer()) fail(key, "expected an integer");
        return v.get<std::int64_t>();
    }

    std::uint64_t u64(const std::string& key, std::uint64_t def) {
        if (!has(key)) return def;
        const auto& v = j_.at(key);
        if (v.is_number_unsigned()) return v.get<std::uint64_t>();
        if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
        fail(key, "expected a non-negative integer");
    }

    bool boolean(const std::string& key, bool def) {
        if (!has(key)) return def;
        const auto& v = j_.at(key);
        if (!v.is_boolean()) fail(key, "expected true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& key, const std::string& def) {
        if (!has(key)) return def;
        const auto& v = j_.at(key);
        if (!v.is_string()) fail(key, "expected a string");
        return v.get<std::string>();
    }

    const json* raw(const std::string& key) {
        if (!has(key)) return nullptr;
        return &j_.at(key);
    }

    std::optional<Section> sub(const std::string& key) {
        if (!has(key)) return std::nullopt;
        return Section(j_.at(key), path_.empty() ? key : path_ + "." + key);
    }

    void reject_unknown() const {
        for (const auto& [k, _] : j_.items())
            if (!seen_.contains(k)) fail(k, "unknown key");
    }

    const std::string& path() const { return path_; }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline void require(bool ok, Section& s, const std::string& key, const std::string& what) {
    if (!ok) s.fail(key, what);
}

}  // namespace detail

/// Parse and validate a configuration document. A run manifest is accepted as
/// well; its "config" member is used.
inline RunConfig parse_config(const nlohmann::json& doc) {
    using detail::require;
    using detail::Section;

    if (doc.is_object() && doc.contains("config") && doc.contains("manifest_version"))
        return parse_config(doc.at("config"));

    RunConfig rc;
    ScenarioConfig& c = rc.scenario;
    Section top(doc, "");

    if (auto s = top.sub("room")) {
        c.room.width = s->number("width", c.room.width);
        c.room.depth = s->number("depth", c.room.depth);
        c.room.height = s->number("height", c.room.height);
        require(c.room.width > 0, *s, "width", "must be > 0");
        require(c.room.depth > 0, *s, "depth", "must be > 0");
        require(c.room.height > 0, *s, "height", "must be > 0");
        s->reject_unknown();
    }
    if (auto s = top.sub("transmitter")) {
        c.ue_height = s->number("height", c.ue_height);
        c.channel.lambertian_order = s->number("lambertian_order", c.channel.lambertian_order);
        c.channel.led_power_mw = s->number("led_power_mw", c.channel.led_power_mw);
        require(c.ue_height >= 0 && c.ue_height < c.room.height, *s, "height", "must lie in [0, room.height)");
        s->reject_unknown();
    }
    if (auto s = top.sub("receiver")) {
        const auto L = s->integer("grid_L", c.grid_L);
        require(L >= 1 && L <= 1000, *s, "grid_L", "must be an integer in [1, 1000]");
        c.grid_L = static_cast<int>(L);
        c.channel.pd_area_mm2 = s->number("pd_area_mm2", c.channel.pd_area_mm2);
        c.channel.fov_half_angle_deg = s->number("fov_half_angle_deg", c.channel.fov_half_angle_deg);
        s->reject_unknown();
    }
    if (auto s = top.sub("object")) {
        if (const auto* v = s->raw("center")) {
            if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number())
                s->fail("center", "expected [x, y]");
            const Point2 p{(*v)[0].get<double>(), (*v)[1].get<double>()};
            require(c.room.contains(p), *s, "center", "must lie inside the room footprint");
            c.object.center = p;
        }
        if (s->has("radius")) {
            const double r = s->number("radius", 0.0);
            require(r > 0, *s, "radius", "must be > 0");
            c.object.radius = r;
        }
        c.object.placement_margin = s->number("placement_margin", c.object.placement_margin);
        require(c.object.placement_margin >= 0 && 2 * c.object.placement_margin < std::min(c.room.width, c.room.depth),
                *s, "placement_margin", "must be >= 0 and leave room for the object");
        s->reject_unknown();
    }
    if (auto s = top.sub("algorithm")) {
        c.prior.mu_r = s->number("mu_r", c.prior.mu_r);
        c.prior.sigma_r = s->number("sigma_r", c.prior.sigma_r);
        c.alpha0 = s->number("alpha0", c.alpha0);
        c.alpha_step = s->number("alpha_step", c.alpha_step);
        c.segment_window = s->boolean("segment_window", c.segment_window);
        c.window_margin = s->number("window_margin", c.window_margin);
        if (s->has("local_radius")) {
            c.local_radius = s->number("local_radius", 0.0);
            require(*c.local_radius > 0, *s, "local_radius", "must be > 0 or null");
        } else if (doc.contains("algorithm") && doc.at("algorithm").contains("local_radius")) {
            c.local_radius.reset();  // explicit null
        }
        c.ml_resolution = s->number("ml_resolution", c.ml_resolution);

        const auto est = s->string("estimator", to_string(c.estimator));
        if (est == "ml") c.estimator = Estimator::ML;
        else if (est == "mmse") c.estimator = Estimator::MMSE;
        else s->fail("estimator", "expected \"ml\" or \"mmse\"");

        const auto dm = s->string("distance_mode", to_string(c.distance_mode));
        if (dm == "line") c.distance_mode = DistanceMode::Line;
        else if (dm == "segment") c.distance_mode = DistanceMode::Segment;
        else s->fail("distance_mode", "expected \"line\" or \"segment\"");

        require(c.prior.mu_r > 0, *s, "mu_r", "must be > 0");
        require(c.prior.sigma_r > 0, *s, "sigma_r", "must be > 0");
        require(c.alpha0 >= 0, *s, "alpha0", "must be >= 0");
        require(c.alpha_step > 0, *s, "alpha_step", "must be > 0");
        require(c.window_margin >= 0, *s, "window_margin", "must be >= 0");
        require(c.ml_resolution > 0, *s, "ml_resolution", "must be > 0");
        s->reject_unknown();
    }
    if (auto s = top.sub("simulation")) {
        const auto n = s->integer("num_ue", static_cast<std::int64_t>(c.num_ue));
        require(n >= 1, *s, "num_ue", "must be >= 1");
        c.num_ue = static_cast<std::size_t>(n);
        c.ue_dmin = s->number("ue_dmin", c.ue_dmin);
        const double diag = std::hypot(c.room.width, c.room.depth);
        require(c.ue_dmin >= 0 && c.ue_dmin < diag, *s, "ue_dmin", "must lie in [0, room diagonal)");
        c.ue_keep_out = s->boolean("ue_keep_out", c.ue_keep_out);
        const auto t = s->integer("trials", static_cast<std::int64_t>(c.trials));
        require(t >= 1, *s, "trials", "must be >= 1");
        c.trials = static_cast<std::size_t>(t);
        c.seed = s->u64("seed", c.seed);
        s->reject_unknown();
    }
    if (auto s = top.sub("sweep")) {
        SweepSpec sw;
        const auto var = s->string("var", "num_ue");
        const auto parsed = parse_sweep_var(var);
        if (!parsed) s->fail("var", "expected one of num_ue, radius, grid_L");
        sw.var = *parsed;
        const auto* v = s->raw("values");
        if (!v || !v->is_array() || v->empty()) s->fail("values", "expected a non-empty array of numbers");
        for (const auto& x : *v) {
            if (!x.is_number()) s->fail("values", "expected a non-empty array of numbers");
            sw.values.push_back(x.get<double>());
        }
        s->reject_unknown();
        rc.sweep = sw;
    }
    top.reject_unknown();
    return rc;
}

/// Line and column (1-based) of a byte offset.
inline std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

inline RunConfig parse_config_text(const std::string& text, const std::string& source = "<config>") {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error& e) {
        const auto [line, col] = line_col(text, e.byte);
        throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON");
    }
    try {
        return parse_config(doc);
    } catch (const ConfigError& e) {
        throw ConfigError(source + ": " + e.what());
    }
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

/// Inverse of parse_config; every parameter is written out explicitly.
inline nlohmann::json to_json(const RunConfig& rc) {
    using nlohmann::json;
    const ScenarioConfig& c = rc.scenario;
    json j;
    j["room"] = {{"width", c.room.width}, {"depth", c.room.depth}, {"height", c.room.height}};
    j["transmitter"] = {{"height", c.ue_height},
                        {"lambertian_order", c.channel.lambertian_order},
                        {"led_power_mw", c.channel.led_power_mw}};
    j["receiver"] = {{"grid_L", c.grid_L},
                     {"pd_area_mm2", c.channel.pd_area_mm2},
                     {"fov_half_angle_deg", c.channel.fov_half_angle_deg}};
    json obj = {{"placement_margin", c.object.placement_margin}};
    obj["center"] = c.object.center ? json::array({c.object.center->x, c.object.center->y}) : json(nullptr);
    obj["radius"] = c.object.radius ? json(*c.object.radius) : json(nullptr);
    j["object"] = obj;
    j["algorithm"] = {{"mu_r", c.prior.mu_r},
                      {"sigma_r", c.prior.sigma_r},
                      {"alpha0", c.alpha0},
                      {"alpha_step", c.alpha_step},
                      {"segment_window", c.segment_window},
                      {"window_margin", c.window_margin},
                      {"local_radius", c.local_radius ? json(*c.local_radius) : json(nullptr)},
                      {"ml_resolution", c.ml_resolution},
                      {"estimator", to_string(c.estimator)},
                      {"distance_mode", to_string(c.distance_mode)}};
    j["simulation"] = {{"num_ue", c.num_ue},
                       {"ue_dmin", c.ue_dmin},
                       {"ue_keep_out", c.ue_keep_out},
                       {"trials", c.trials},
                       {"seed", c.seed}};
    if (rc.sweep) j["sweep"] = {{"var", to_string(rc.sweep->var)}, {"values", rc.sweep->values}};
    return j;
}

}  // namespace shadowcast

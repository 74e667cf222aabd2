#pragma once

// metrics.csv / trials.csv writers and readers. Doubles are printed with 17
// significant digits so a read-back reproduces every value bit for bit.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "harness.hpp"

namespace shadowcast {

inline constexpr const char* kMetricsHeader =
    "sweep_var,sweep_value,grid_L,estimator,trials,rmse_theta_m,rmse_theta_stderr,rmse_r_m,rmse_r_stderr,"
    "outage_prob,outage_stderr";
inline constexpr const char* kTrialsHeader =
    "trial,seed,theta_true_x,theta_true_y,r_true,theta_hat_x,theta_hat_y,r_hat,n_blocked,n_nonblocked,outage,"
    "alpha_final";

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

inline void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows) {
    os << kMetricsHeader << '\n';
    for (const auto& r : rows) {
        os << r.sweep_var << ',' << format_double(r.sweep_value) << ',' << r.grid_L << ',' << to_string(r.estimator)
           << ',' << r.trials << ',' << format_double(r.rmse_theta) << ',' << format_double(r.rmse_theta_stderr)
           << ',' << format_double(r.rmse_r) << ',' << format_double(r.rmse_r_stderr) << ','
           << format_double(r.outage_prob) << ',' << format_double(r.outage_stderr) << '\n';
    }
}

inline void write_trials_csv(std::ostream& os, const std::vector<TrialResult>& trials) {
    os << kTrialsHeader << '\n';
    for (const auto& t : trials) {
        os << t.trial << ',' << t.seed << ',' << format_double(t.theta_true.x) << ',' << format_double(t.theta_true.y)
           << ',' << format_double(t.r_true) << ','
           << format_optional(t.theta_hat ? std::optional(t.theta_hat->x) : std::nullopt) << ','
           << format_optional(t.theta_hat ? std::optional(t.theta_hat->y) : std::nullopt) << ','
           << format_optional(t.r_hat) << ',' << t.n_blocked << ',' << t.n_nonblocked << ','
           << (t.outage ? 1 : 0) << ',' << format_optional(t.alpha_final) << '\n';
    }
}

inline void write_metrics_csv(std::ostream& os, const std::vector<SweepPoint>& points) {
    std::vector<MetricsRow> rows;
    for (const auto& p : points) rows.push_back(p.metrics);
    write_metrics_csv(os, rows);
}

inline void write_trials_csv(std::ostream& os, const std::vector<SweepPoint>& points) {
    std::vector<TrialResult> all;
    for (const auto& p : points) all.insert(all.end(), p.trials.begin(), p.trials.end());
    write_trials_csv(os, all);
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0') throw Error("csv: bad number '" + s + "'");
    return v;
}

inline std::uint64_t parse_u64(const std::string& s) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (s.empty() || *end != '\0') throw Error("csv: bad integer '" + s + "'");
    return v;
}

inline std::optional<double> parse_optional(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return parse_double(s);
}

template <typename Row, typename Fn>
std::vector<Row> read_rows(std::istream& is, const char* header, std::size_t columns, Fn&& parse_row) {
    std::string line;
    if (!std::getline(is, line) || split_csv_line(line) != split_csv_line(header))
        throw Error("csv: unexpected header");
    std::vector<Row> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != columns) throw Error("csv: expected " + std::to_string(columns) + " fields");
        rows.push_back(parse_row(f));
    }
    return rows;
}

}  // namespace detail

inline std::vector<MetricsRow> read_metrics_csv(std::istream& is) {
    using namespace detail;
    return read_rows<MetricsRow>(is, kMetricsHeader, 11, [](const std::vector<std::string>& f) {
        MetricsRow r;
        r.sweep_var = f[0];
        r.sweep_value = parse_double(f[1]);
        r.grid_L = static_cast<int>(parse_u64(f[2]));
        if (f[3] == "ml") r.estimator = Estimator::ML;
        else if (f[3] == "mmse") r.estimator = Estimator::MMSE;
        else throw Error("csv: bad estimator '" + f[3] + "'");
        r.trials = parse_u64(f[4]);
        r.rmse_theta = parse_double(f[5]);
        r.rmse_theta_stderr = parse_double(f[6]);
        r.rmse_r = parse_double(f[7]);
        r.rmse_r_stderr = parse_double(f[8]);
        r.outage_prob = parse_double(f[9]);
        r.outage_stderr = parse_double(f[10]);
        return r;
    });
}

inline std::vector<TrialResult> read_trials_csv(std::istream& is) {
    using namespace detail;
    return read_rows<TrialResult>(is, kTrialsHeader, 12, [](const std::vector<std::string>& f) {
        TrialResult t;
        t.trial = parse_u64(f[0]);
        t.seed = parse_u64(f[1]);
        t.theta_true = {parse_double(f[2]), parse_double(f[3])};
        t.r_true = parse_double(f[4]);
        const auto hx = parse_optional(f[5]), hy = parse_optional(f[6]);
        if (hx.has_value() != hy.has_value()) throw Error("csv: half-empty theta_hat");
        if (hx) t.theta_hat = Point2{*hx, *hy};
        t.r_hat = parse_optional(f[7]);
        t.n_blocked = parse_u64(f[8]);
        t.n_nonblocked = parse_u64(f[9]);
        t.outage = parse_u64(f[10]) != 0;
        t.alpha_final = parse_optional(f[11]);
        return t;
    });
}

}  // namespace shadowcast

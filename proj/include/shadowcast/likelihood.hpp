#pragma once

// Per-link blockage likelihood under a Gaussian radius prior and the
// exhaustive grid-search maximum-likelihood estimator of the object centre.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <thread>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "scene.hpp"

namespace shadowcast {

/// Lower clamp for log-probabilities; roughly log of the smallest subnormal.
inline constexpr double kLogFloor = -745.0;

/// Standard normal tail probability P(Z > x).
inline double q_function(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

/// log Q(x) without cancellation on either tail.
inline double log_q(double x) {
    const double v = x < 0.0 ? std::log1p(-q_function(-x)) : std::log(q_function(x));
    return std::max(v, kLogFloor);
}

enum class DistanceMode { Line, Segment };

inline double link_distance(const LinkLine& link, Point2 theta, DistanceMode mode) {
    if (mode == DistanceMode::Segment) return segment_distance(link, theta).dist;
    return std::abs(link.signed_distance(theta));
}

/// Blocked:     log P(r >= |d|) = log Q((|d| - mu) / sigma)
/// Non-blocked: log P(r <  |d|) = log Q(-(|d| - mu) / sigma)
inline double link_log_likelihood(Point2 theta, const LinkLine& link, const RadiusPrior& prior,
                                  DistanceMode mode = DistanceMode::Line) {
    const double z = (link_distance(link, theta, mode) - prior.mu_r) / prior.sigma_r;
    return link.kind == LinkKind::Blocked ? log_q(z) : log_q(-z);
}

inline double total_log_likelihood(Point2 theta, const ObservationSet& obs, const RadiusPrior& prior,
                                   DistanceMode mode = DistanceMode::Line) {
    double sum = 0.0;
    for (const auto& l : obs.blocked) sum += link_log_likelihood(theta, l, prior, mode);
    for (const auto& l : obs.nonblocked) sum += link_log_likelihood(theta, l, prior, mode);
    return sum;
}

/// Rectangular search domain sampled at a fixed resolution, x-major.
struct GridSpec {
    double resolution = 0.01;
    double x_min = 0.0;
    double x_max = 5.0;
    double y_min = 0.0;
    double y_max = 5.0;

    static GridSpec over(const Room& room, double resolution = 0.01) {
        return {resolution, 0.0, room.width, 0.0, room.depth};
    }

    std::size_t nx() const { return count(x_max - x_min); }
    std::size_t ny() const { return count(y_max - y_min); }
    Point2 at(std::size_t i, std::size_t j) const {
        return {x_min + static_cast<double>(i) * resolution, y_min + static_cast<double>(j) * resolution};
    }

private:
    std::size_t count(double extent) const {
        return static_cast<std::size_t>(std::floor(extent / resolution + 1e-9)) + 1;
    }
};

struct MlEstimate {
    Point2 theta;
    double loglik = -std::numeric_limits<double>::infinity();
};

namespace detail {

// Best point over columns [i0, i1); strict '>' keeps the first point in
// (x, y) order, which is the lexicographically smallest among ties.
inline MlEstimate ml_scan_columns(const ObservationSet& obs, const RadiusPrior& prior, const GridSpec& grid,
                                  DistanceMode mode, std::size_t i0, std::size_t i1) {
    MlEstimate best;
    bool have = false;
    const std::size_t ny = grid.ny();
    for (std::size_t i = i0; i < i1; ++i) {
        for (std::size_t j = 0; j < ny; ++j) {
            const Point2 p = grid.at(i, j);
            const double ll = total_log_likelihood(p, obs, prior, mode);
            if (!have || ll > best.loglik) {
                best = {p, ll};
                have = true;
            }
        }
    }
    return best;
}

}  // namespace detail

/// Exhaustive argmax of the total log-likelihood over the grid. Ties go to the
/// smallest x, then smallest y. Identical results for any worker count.
inline MlEstimate ml_grid_search(const ObservationSet& obs, const RadiusPrior& prior, const GridSpec& grid,
                                 DistanceMode mode = DistanceMode::Line, unsigned workers = 1) {
    if (obs.blocked.empty()) throw Outage{};

    const std::size_t nx = grid.nx();
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(nx)));
    if (workers == 1) return detail::ml_scan_columns(obs, prior, grid, mode, 0, nx);

    std::vector<MlEstimate> partial(workers);
    std::vector<std::thread> pool;
    const std::size_t chunk = (nx + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t i0 = std::min(nx, w * chunk), i1 = std::min(nx, i0 + chunk);
        pool.emplace_back([&, w, i0, i1] {
            if (i0 < i1) partial[w] = detail::ml_scan_columns(obs, prior, grid, mode, i0, i1);
        });
    }
    for (auto& t : pool) t.join();

    MlEstimate best = partial.front();
    for (std::size_t w = 1; w < partial.size(); ++w)
        if (partial[w].loglik > best.loglik) best = partial[w];
    return best;
}

}  // namespace shadowcast

#pragma once

// Room layout, UE placement and the ground-truth blockage oracle.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "rng.hpp"

namespace shadowcast {

inline constexpr double kUeHeight = 0.85;

struct Room {
    double width = 5.0;
    double depth = 5.0;
    double height = 3.0;

    double area() const { return width * depth; }
    bool contains(Point2 p) const { return p.x >= 0 && p.x <= width && p.y >= 0 && p.y <= depth; }
};

/// Gaussian model of the obstacle radius, N(mu_r, sigma_r^2).
struct RadiusPrior {
    double mu_r = 0.13;
    double sigma_r = 0.03;
};

/// Full-height cylinder: blocks a link iff its floor segment passes within radius.
struct Cylinder {
    Point2 center;
    double radius = 0.0;
};

struct ObservationSet {
    std::vector<LinkLine> blocked;
    std::vector<LinkLine> nonblocked;

    std::size_t size() const { return blocked.size() + nonblocked.size(); }
    bool outage() const { return blocked.empty(); }
};

/// PD positions on the ceiling, x-major order. A 2x2 grid sits 1.5 m from
/// the walls; other sizes use a cell-centred layout with margin extent/(2L).
inline std::vector<Point3> pd_grid_positions(int L, const Room& room) {
    if (L < 1) throw InvalidGrid("PD grid size must be >= 1, got " + std::to_string(L));

    auto axis = [L](double extent) {
        std::vector<double> v(static_cast<std::size_t>(L));
        if (L == 2 && extent > 3.0) {
            v = {1.5, extent - 1.5};
        } else {
            const double step = extent / L;
            for (int i = 0; i < L; ++i) v[static_cast<std::size_t>(i)] = step * (i + 0.5);
        }
        return v;
    };
    const auto xs = axis(room.width);
    const auto ys = axis(room.depth);

    std::vector<Point3> out;
    out.reserve(xs.size() * ys.size());
    for (double x : xs)
        for (double y : ys) out.push_back({x, y, room.height});
    return out;
}

struct PdGrid {
    int L = 0;
    std::vector<Point3> positions;

    PdGrid(int side, const Room& room) : L(side), positions(pd_grid_positions(side, room)) {}
};

inline constexpr std::size_t kDartAttemptsPerPoint = 10'000;

/// Dart-throwing Poisson disk sampler over the room footprint. Points never
/// fall strictly inside `keep_out` when given.
inline std::vector<Point2> poisson_disk_sample(const Room& room, double d_min, std::size_t count, Rng& rng,
                                               const std::optional<Cylinder>& keep_out = std::nullopt) {
    const double disk_area = std::numbers::pi * 0.25 * d_min * d_min;
    if (static_cast<double>(count) * disk_area >= room.area())
        throw SamplingExhausted("cannot place " + std::to_string(count) + " points " + std::to_string(d_min) +
                                " m apart: exceeds the packing bound of the room");

    std::vector<Point2> pts;
    pts.reserve(count);
    const std::size_t budget = kDartAttemptsPerPoint * count;
    const double d2 = d_min * d_min;
    for (std::size_t attempt = 0; attempt < budget && pts.size() < count; ++attempt) {
        const Point2 p{rng.uniform(0.0, room.width), rng.uniform(0.0, room.depth)};
        if (keep_out && norm2(p - keep_out->center) < keep_out->radius * keep_out->radius) continue;
        bool ok = true;
        for (const auto& q : pts) {
            if (norm2(p - q) < d2) {
                ok = false;
                break;
            }
        }
        if (ok) pts.push_back(p);
    }
    if (pts.size() < count)
        throw SamplingExhausted("dart throwing placed " + std::to_string(pts.size()) + " of " +
                                std::to_string(count) + " points");
    return pts;
}

/// Closed-disk test: a segment at distance exactly r counts as blocked.
inline bool blocks(const Cylinder& obj, const Point3& ue, const Point3& pd) {
    return segment_distance(project_link(ue, pd), obj.center).dist <= obj.radius;
}

inline ObservationSet simulate_observations(const std::vector<Point3>& pds, const std::vector<Point3>& ues,
                                            const Cylinder& obj) {
    ObservationSet obs;
    for (const auto& ue : ues) {
        for (const auto& pd : pds) {
            LinkLine link = project_link(ue, pd);
            if (segment_distance(link, obj.center).dist <= obj.radius) {
                link.kind = LinkKind::Blocked;
                obs.blocked.push_back(link);
            } else {
                link.kind = LinkKind::NonBlocked;
                obs.nonblocked.push_back(link);
            }
        }
    }
    return obs;
}

inline std::vector<Point3> lift_ues(const std::vector<Point2>& ues, double height = kUeHeight) {
    std::vector<Point3> out;
    out.reserve(ues.size());
    for (auto p : ues) out.push_back({p.x, p.y, height});
    return out;
}

}  // namespace shadowcast

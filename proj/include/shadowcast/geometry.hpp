#pragma once

// Floor-plane geometry for line-of-sight links.
//
// Every UE->PD link is projected to the floor and kept in two forms: the
// infinite line in normal form (n . p = beta, |n| = 1) and the segment between
// the two floor projections. Estimators work with the infinite line, the
// blockage oracle works with the segment.

#include <algorithm>
#include <cmath>
#include <optional>

#include "errors.hpp"

namespace shadowcast {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
    constexpr Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
    constexpr Vec2& operator*=(double s) { x *= s; y *= s; return *this; }

    friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend constexpr Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
    friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend constexpr Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
    friend constexpr bool operator==(Vec2, Vec2) = default;
};

using Point2 = Vec2;

struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Point2 floor() const { return {x, y}; }
    friend constexpr bool operator==(Point3, Point3) = default;
};

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
constexpr double norm2(Vec2 a) { return dot(a, a); }
inline double distance(Point2 a, Point2 b) { return norm(a - b); }

/// Lexicographic order on (x, y); used for deterministic tie-breaking.
constexpr bool lex_less(Point2 a, Point2 b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
}

/// Infinite line n . p = beta with unit normal n.
struct NormalLine {
    Vec2 n;
    double beta = 0.0;

    constexpr double signed_distance(Point2 p) const { return dot(n, p) - beta; }
    /// Same line shifted along its normal: n . p = beta + offset.
    constexpr NormalLine shifted(double offset) const { return {n, beta + offset}; }
};

enum class LinkKind { Blocked, NonBlocked };

/// A UE->PD link projected onto the floor plane.
struct LinkLine {
    Vec2 n;          // unit normal
    double beta = 0; // n . p = beta on the line
    Point2 a;        // UE floor projection
    Point2 b;        // PD floor projection
    LinkKind kind = LinkKind::NonBlocked;

    constexpr NormalLine line() const { return {n, beta}; }
    constexpr double signed_distance(Point2 p) const { return dot(n, p) - beta; }
};

namespace detail {
// Offsets this close to zero are treated as passing through the origin.
inline constexpr double kZeroOffset = 1e-12;
inline constexpr double kParallel = 1e-10;
inline constexpr double kDegenerate = 1e-12;
}  // namespace detail

/// Normal form of the line through two floor points. Sign convention:
/// beta >= 0, and for beta == 0 the normal is lexicographically positive.
inline LinkLine link_through(Point2 a, Point2 b, LinkKind kind = LinkKind::NonBlocked) {
    const Vec2 dir = b - a;
    const double len = norm(dir);
    if (!(len > detail::kDegenerate)) throw DegenerateLink{};

    Vec2 n{-dir.y / len, dir.x / len};
    double beta = dot(n, a);
    if (std::abs(beta) <= detail::kZeroOffset) {
        beta = 0.0;
        if (n.x < 0.0 || (n.x == 0.0 && n.y < 0.0)) n = -n;
    } else if (beta < 0.0) {
        n = -n;
        beta = -beta;
    }
    // Normalize -0.0 so that equal lines compare and print identically.
    n.x += 0.0;
    n.y += 0.0;
    return {n, beta, a, b, kind};
}

inline LinkLine project_link(const Point3& ue, const Point3& pd, LinkKind kind = LinkKind::NonBlocked) {
    return link_through(ue.floor(), pd.floor(), kind);
}

/// Vector from the infinite line to theta: (n . theta - beta) n.
constexpr Vec2 distance_vector(const LinkLine& line, Point2 theta) {
    return line.signed_distance(theta) * line.n;
}

struct SegmentDistance {
    double dist = 0.0;
    double t = 0.0;  // clamped projection parameter along a->b
};

/// Unclamped projection parameter of theta onto a->b.
inline double projection_parameter(const LinkLine& line, Point2 theta) {
    const Vec2 ab = line.b - line.a;
    return dot(theta - line.a, ab) / norm2(ab);
}

inline SegmentDistance segment_distance(const LinkLine& line, Point2 theta) {
    const double t = std::clamp(projection_parameter(line, theta), 0.0, 1.0);
    const Point2 closest = line.a + t * (line.b - line.a);
    return {distance(theta, closest), t};
}

/// Intersection of two normal-form lines; empty when they are parallel.
inline std::optional<Point2> intersect_lines(const NormalLine& l1, const NormalLine& l2) {
    const double det = cross(l1.n, l2.n);
    if (std::abs(det) < detail::kParallel) return std::nullopt;
    return Point2{(l1.beta * l2.n.y - l2.beta * l1.n.y) / det,
                  (l1.n.x * l2.beta - l2.n.x * l1.beta) / det};
}

}  // namespace shadowcast

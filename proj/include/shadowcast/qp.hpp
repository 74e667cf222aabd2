#pragma once

// Constrained least-squares estimate of the object centre.
//
//   minimise   f(theta) = sum_i (n_i . theta - beta_i)^2        over blocked links
//   subject to |n_j . theta - beta_j| >= D_min                   over non-blocked links
//              theta inside the search domain (optional box)
//
// with D_min = mu_r + alpha * sigma_r. Each two-sided constraint is a pair of
// half-planes, so the feasible set is a disjoint union of convex cells. The
// minimum of a convex quadratic over such a cell is the unconstrained minimum,
// the constrained minimum on one boundary line, or the intersection of two
// boundary lines. Candidates are enumerated from a working set seeded with the
// constraints active at the unconstrained minimum; any constraint violated by
// the best working-set candidate is added and the enumeration repeated, which
// terminates at the exact optimum over the full constraint set. When no
// feasible point exists alpha is relaxed in steps until one does.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "likelihood.hpp"
#include "scene.hpp"

namespace shadowcast {

/// Symmetric 2x2 matrix.
struct Mat2 {
    double xx = 0.0;
    double xy = 0.0;
    double yy = 0.0;

    constexpr Vec2 operator*(Vec2 v) const { return {xx * v.x + xy * v.y, xy * v.x + yy * v.y}; }
    constexpr double det() const { return xx * yy - xy * xy; }
    constexpr double trace() const { return xx + yy; }
    /// v^T M v
    constexpr double quad(Vec2 v) const { return xx * v.x * v.x + 2.0 * xy * v.x * v.y + yy * v.y * v.y; }
    friend constexpr bool operator==(const Mat2&, const Mat2&) = default;
};

struct Rect {
    double x_min = 0.0;
    double x_max = 0.0;
    double y_min = 0.0;
    double y_max = 0.0;

    static Rect of(const Room& room) { return {0.0, room.width, 0.0, room.depth}; }
};

struct QpOptions {
    double alpha0 = 3.0;
    double alpha_step = 0.5;
    /// Only constrain on non-blocked links whose segment projection parameter
    /// at the unconstrained minimum lies in [-margin, 1 + margin].
    bool segment_window = true;
    double window_margin = 0.1;
    /// Search domain; unbounded when empty.
    std::optional<Rect> domain;
    /// Half-width of a square around theta_g that further bounds the search
    /// domain; unbounded when empty.
    std::optional<double> local_radius = 0.25;
};

inline constexpr double kFeasTol = 1e-9;
inline constexpr double kRankTol = 1e-12;

struct QpProblem {
    std::vector<LinkLine> blocked;
    std::vector<LinkLine> nonblocked;
    double alpha = 0.0;
    double d_min = 0.0;
    Mat2 A;  // sum n_i n_i^T
    Vec2 b;  // sum beta_i n_i
    std::optional<Rect> domain;
    /// Indices into `nonblocked` that are enforced as constraints.
    std::vector<std::size_t> constrained;
};

inline QpProblem build_problem(const ObservationSet& obs, const RadiusPrior& prior, double alpha,
                               std::optional<Rect> domain = std::nullopt) {
    if (obs.blocked.empty()) throw Outage{};
    QpProblem p;
    p.blocked = obs.blocked;
    p.nonblocked = obs.nonblocked;
    p.alpha = alpha;
    p.d_min = prior.mu_r + alpha * prior.sigma_r;
    p.domain = domain;
    for (const auto& l : p.blocked) {
        p.A.xx += l.n.x * l.n.x;
        p.A.xy += l.n.x * l.n.y;
        p.A.yy += l.n.y * l.n.y;
        p.b += l.beta * l.n;
    }
    p.constrained.resize(p.nonblocked.size());
    for (std::size_t j = 0; j < p.constrained.size(); ++j) p.constrained[j] = j;
    return p;
}

/// f(theta) = sum over blocked links of the squared line distance.
inline double objective(const QpProblem& p, Point2 theta) {
    double f = 0.0;
    for (const auto& l : p.blocked) {
        const double d = l.signed_distance(theta);
        f += d * d;
    }
    return f;
}

/// 2 (A theta - b)
inline Vec2 objective_gradient(const QpProblem& p, Point2 theta) { return 2.0 * (p.A * theta - p.b); }

struct UnconstrainedMinimum {
    Point2 theta;
    bool rank_deficient = false;
};

/// theta_g = A^-1 b. When every blocked normal is parallel the minimiser is a
/// ridge; the minimum-norm point on it is returned and flagged.
inline UnconstrainedMinimum unconstrained_minimum(const QpProblem& p) {
    const Mat2& A = p.A;
    const double det = A.det();
    if (det >= kRankTol) {
        return {{(A.yy * p.b.x - A.xy * p.b.y) / det, (A.xx * p.b.y - A.xy * p.b.x) / det}, false};
    }
    // Rank one: A = t v v^T with t = trace, v the normalised dominant column.
    const double t = A.trace();
    if (!(t > 0.0)) throw Outage{};
    const Vec2 col = A.xx >= A.yy ? Vec2{A.xx, A.xy} : Vec2{A.xy, A.yy};
    const Vec2 v = (1.0 / norm(col)) * col;
    return {(dot(v, p.b) / t) * v, true};
}

/// Which side of a non-blocked link the estimate is kept on.
enum class Side : int { Minus = -1, Plus = 1 };

constexpr double sign_of(Side s) { return static_cast<double>(static_cast<int>(s)); }

struct ActiveConstraint {
    std::size_t index = 0;  // into QpProblem::nonblocked
    Side side = Side::Plus;
    friend constexpr bool operator==(const ActiveConstraint&, const ActiveConstraint&) = default;
};

/// Non-blocked constraints violated at theta_g, tagged with the side theta_g
/// lies on (Plus when exactly on the line).
inline std::vector<ActiveConstraint> active_constraints(Point2 theta_g, const QpProblem& p) {
    std::vector<ActiveConstraint> out;
    for (std::size_t j : p.constrained) {
        const double s = p.nonblocked[j].signed_distance(theta_g);
        if (std::abs(s) < p.d_min) out.push_back({j, s >= 0.0 ? Side::Plus : Side::Minus});
    }
    return out;
}

/// Half-plane h . theta >= c; the edge of one branch of a two-sided constraint
/// or one wall of the search domain.
struct HalfPlane {
    Vec2 h;
    double c = 0.0;
    bool domain_wall = false;
    std::size_t index = 0;  // nonblocked index, or wall number 0..3
    Side side = Side::Plus;

    constexpr double slack(Point2 theta) const { return dot(h, theta) - c; }
    constexpr NormalLine boundary() const { return {h, c}; }
};

/// n_j . theta >= beta_j + D (Plus) or n_j . theta <= beta_j - D (Minus).
inline HalfPlane half_plane(const QpProblem& p, std::size_t j, Side side) {
    const double s = sign_of(side);
    const auto& l = p.nonblocked[j];
    return {s * l.n, s * l.beta + p.d_min, false, j, side};
}

inline std::array<HalfPlane, 4> domain_walls(const Rect& r) {
    return {{{{1.0, 0.0}, r.x_min, true, 0, Side::Plus},
             {{-1.0, 0.0}, -r.x_max, true, 1, Side::Plus},
             {{0.0, 1.0}, r.y_min, true, 2, Side::Plus},
             {{0.0, -1.0}, -r.y_max, true, 3, Side::Plus}}};
}

struct LineSolution {
    Point2 theta;
    double multiplier = 0.0;
    bool singular = false;
};

namespace detail {

/// Solve the 3x3 system [A, -h/2; h^T, 0] [theta; m] = [b; c] by Gaussian
/// elimination with partial pivoting.
inline std::optional<std::array<double, 3>> solve_bordered(const Mat2& A, Vec2 b, Vec2 h, double c) {
    std::array<std::array<double, 4>, 3> m{{
        {A.xx, A.xy, -0.5 * h.x, b.x},
        {A.xy, A.yy, -0.5 * h.y, b.y},
        {h.x, h.y, 0.0, c},
    }};
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
        if (std::abs(m[piv][col]) < kRankTol) return std::nullopt;
        std::swap(m[col], m[piv]);
        for (int r = col + 1; r < 3; ++r) {
            const double f = m[r][col] / m[col][col];
            for (int k = col; k < 4; ++k) m[r][k] -= f * m[col][k];
        }
    }
    std::array<double, 3> x{};
    for (int r = 2; r >= 0; --r) {
        double s = m[r][3];
        for (int k = r + 1; k < 3; ++k) s -= m[r][k] * x[k];
        x[r] = s / m[r][r];
    }
    return x;
}

}  // namespace detail

/// Minimiser of f on the boundary line h . theta = c of a half-plane, with
/// stationarity 2 (A theta - b) = m h. Falls back to the Euclidean projection
/// of `fallback` when f is constant along the line.
inline LineSolution solve_on_line(const QpProblem& p, const HalfPlane& hp, Point2 fallback) {
    if (auto x = detail::solve_bordered(p.A, p.b, hp.h, hp.c)) return {{(*x)[0], (*x)[1]}, (*x)[2], false};
    const Point2 proj = fallback - hp.slack(fallback) * hp.h;
    return {proj, 0.0, true};
}

/// Step-3 solve for non-blocked constraint j on the given side. A constraint
/// already strictly satisfied at theta_g is slack: theta_g with multiplier 0.
inline LineSolution solve_on_constraint(const QpProblem& p, std::size_t j, Side side) {
    const Point2 theta_g = unconstrained_minimum(p).theta;
    const HalfPlane hp = half_plane(p, j, side);
    if (hp.slack(theta_g) > 0.0) return {theta_g, 0.0, false};
    return solve_on_line(p, hp, theta_g);
}

inline bool satisfies(const QpProblem& p, std::size_t j, Point2 theta) {
    return std::abs(p.nonblocked[j].signed_distance(theta)) >= p.d_min - kFeasTol;
}

inline bool inside_domain(const QpProblem& p, Point2 theta) {
    if (!p.domain) return true;
    const auto& r = *p.domain;
    return theta.x >= r.x_min - kFeasTol && theta.x <= r.x_max + kFeasTol && theta.y >= r.y_min - kFeasTol &&
           theta.y <= r.y_max + kFeasTol;
}

inline bool feasible(const QpProblem& p, Point2 theta) {
    if (!inside_domain(p, theta)) return false;
    for (std::size_t j : p.constrained)
        if (!satisfies(p, j, theta)) return false;
    return true;
}

/// Pairwise intersections of the shifted lines of the given active
/// constraints that satisfy every constraint of the problem.
inline std::vector<Point2> feasible_intersections(const QpProblem& p, const std::vector<ActiveConstraint>& active) {
    std::vector<Point2> out;
    for (std::size_t u = 0; u < active.size(); ++u) {
        const auto lu = half_plane(p, active[u].index, active[u].side).boundary();
        for (std::size_t v = u + 1; v < active.size(); ++v) {
            const auto lv = half_plane(p, active[v].index, active[v].side).boundary();
            if (auto x = intersect_lines(lu, lv); x && feasible(p, *x)) out.push_back(*x);
        }
    }
    return out;
}

/// A constraint binding at the solution with its Lagrange multiplier (>= 0).
struct BindingConstraint {
    bool domain_wall = false;
    std::size_t index = 0;
    Side side = Side::Plus;
    double multiplier = 0.0;
    Vec2 h;  // inward normal of the binding half-plane
};

struct KktSolution {
    Point2 theta_star;
    Point2 theta_g;
    std::vector<BindingConstraint> active_set;
    double alpha_final = 0.0;
    double d_min = 0.0;
    double objective = 0.0;
    bool rank_deficient = false;
    /// No feasible point even at alpha = 0; theta_star ignores the non-blocked links.
    bool infeasible_relaxed = false;
    int relaxations = 0;
    std::size_t working_set_size = 0;
};

namespace detail {

struct Candidate {
    Point2 theta;
    double f = 0.0;
    // Generating boundaries: -1 for none, otherwise index into the plane list.
    int first = -1;
    int second = -1;
};

inline bool candidate_less(const Candidate& a, const Candidate& b) {
    if (a.f != b.f) return a.f < b.f;
    return lex_less(a.theta, b.theta);
}

struct WorkingSet {
    std::vector<std::size_t> nb;  // nonblocked indices
    std::vector<char> member;     // by nonblocked index
};

inline bool feasible_in(const QpProblem& p, const WorkingSet& w, Point2 theta) {
    if (!inside_domain(p, theta)) return false;
    for (std::size_t j : w.nb)
        if (!satisfies(p, j, theta)) return false;
    return true;
}

inline std::vector<BindingConstraint> multipliers_at(const QpProblem& p, const Candidate& c,
                                                     const std::vector<HalfPlane>& planes) {
    std::vector<BindingConstraint> out;
    auto make = [](const HalfPlane& hp, double m) {
        return BindingConstraint{hp.domain_wall, hp.index, hp.side, m, hp.h};
    };
    const Vec2 g = objective_gradient(p, c.theta);
    if (c.first >= 0 && c.second < 0) {
        const auto& hp = planes[static_cast<std::size_t>(c.first)];
        // Least-squares multiplier of g = m h (exact when stationarity holds).
        out.push_back(make(hp, std::max(0.0, dot(g, hp.h))));
    } else if (c.first >= 0) {
        const auto& h1 = planes[static_cast<std::size_t>(c.first)];
        const auto& h2 = planes[static_cast<std::size_t>(c.second)];
        const double det = cross(h1.h, h2.h);
        double m1 = cross(g, h2.h) / det;
        double m2 = cross(h1.h, g) / det;
        // Round-off around a zero multiplier.
        if (m1 < 0.0 && m1 > -1e-12) m1 = 0.0;
        if (m2 < 0.0 && m2 > -1e-12) m2 = 0.0;
        out.push_back(make(h1, m1));
        out.push_back(make(h2, m2));
    }
    return out;
}

inline void enumerate(const QpProblem& p, const WorkingSet& w, Point2 theta_g, std::vector<HalfPlane>& planes,
                      std::vector<Candidate>& cands) {
    planes.clear();
    if (p.domain)
        for (const auto& hp : domain_walls(*p.domain)) planes.push_back(hp);
    for (std::size_t j : w.nb) {
        planes.push_back(half_plane(p, j, Side::Plus));
        planes.push_back(half_plane(p, j, Side::Minus));
    }

    cands.clear();
    cands.push_back({theta_g, objective(p, theta_g), -1, -1});
    for (std::size_t u = 0; u < planes.size(); ++u) {
        // The line minimiser of a half-plane already satisfied at theta_g has a
        // negative multiplier and cannot be a cell minimum.
        if (planes[u].slack(theta_g) > 0.0) continue;
        const auto s = solve_on_line(p, planes[u], theta_g);
        if (s.singular || s.multiplier >= 0.0)
            cands.push_back({s.theta, objective(p, s.theta), static_cast<int>(u), -1});
    }
    for (std::size_t u = 0; u < planes.size(); ++u) {
        const auto lu = planes[u].boundary();
        for (std::size_t v = u + 1; v < planes.size(); ++v) {
            if (auto x = intersect_lines(lu, planes[v].boundary()))
                cands.push_back({*x, objective(p, *x), static_cast<int>(u), static_cast<int>(v)});
        }
    }
    std::sort(cands.begin(), cands.end(), candidate_less);
}

/// Exact minimum over the full constraint set for the problem's D_min, or
/// empty when the feasible set is empty.
inline std::optional<KktSolution> solve_fixed_alpha(const QpProblem& p, Point2 theta_g) {
    WorkingSet w;
    w.member.assign(p.nonblocked.size(), 0);
    for (const auto& a : active_constraints(theta_g, p)) {
        w.nb.push_back(a.index);
        w.member[a.index] = 1;
    }

    std::vector<HalfPlane> planes;
    std::vector<Candidate> cands;
    for (;;) {
        enumerate(p, w, theta_g, planes, cands);
        const Candidate* best = nullptr;
        for (const auto& c : cands) {
            if (feasible_in(p, w, c.theta)) {
                best = &c;
                break;
            }
        }
        if (!best) return std::nullopt;

        bool grew = false;
        for (std::size_t j : p.constrained) {
            if (!w.member[j] && !satisfies(p, j, best->theta)) {
                w.nb.push_back(j);
                w.member[j] = 1;
                grew = true;
            }
        }
        if (grew) continue;

        KktSolution sol;
        sol.theta_star = best->theta;
        sol.theta_g = theta_g;
        sol.active_set = multipliers_at(p, *best, planes);
        sol.alpha_final = p.alpha;
        sol.d_min = p.d_min;
        sol.objective = best->f;
        sol.working_set_size = w.nb.size();
        return sol;
    }
}

}  // namespace detail

/// Restrict the enforced constraints to links whose segment lies alongside
/// theta_g (projection parameter within [-margin, 1 + margin]).
inline void apply_segment_window(QpProblem& p, Point2 theta_g, double margin) {
    p.constrained.clear();
    for (std::size_t j = 0; j < p.nonblocked.size(); ++j) {
        const double t = projection_parameter(p.nonblocked[j], theta_g);
        if (t >= -margin && t <= 1.0 + margin) p.constrained.push_back(j);
    }
}

/// Minimum over the feasible set of problem `p` as given (no relaxation).
inline std::optional<KktSolution> solve_problem(const QpProblem& p) {
    const auto ug = unconstrained_minimum(p);
    auto sol = detail::solve_fixed_alpha(p, ug.theta);
    if (sol) sol->rank_deficient = ug.rank_deficient;
    return sol;
}

/// Square of half-width `radius` around theta_g, clipped to `outer`. The centre
/// is first clamped into `outer` so the result is never empty.
inline Rect local_domain(Point2 theta_g, double radius, const std::optional<Rect>& outer) {
    Point2 c = theta_g;
    Rect r{c.x - radius, c.x + radius, c.y - radius, c.y + radius};
    if (outer) {
        c = {std::clamp(c.x, outer->x_min, outer->x_max), std::clamp(c.y, outer->y_min, outer->y_max)};
        r = {std::max(outer->x_min, c.x - radius), std::min(outer->x_max, c.x + radius),
             std::max(outer->y_min, c.y - radius), std::min(outer->y_max, c.y + radius)};
    }
    return r;
}

/// The problem mmse_estimate solves at a given alpha.
inline QpProblem make_problem(const ObservationSet& obs, const RadiusPrior& prior, double alpha,
                              const QpOptions& opt) {
    QpProblem p = build_problem(obs, prior, alpha, opt.domain);
    const Point2 theta_g = unconstrained_minimum(p).theta;
    if (opt.segment_window) apply_segment_window(p, theta_g, opt.window_margin);
    if (opt.local_radius) p.domain = local_domain(theta_g, *opt.local_radius, opt.domain);
    return p;
}

inline KktSolution mmse_estimate(const ObservationSet& obs, const RadiusPrior& prior, const QpOptions& opt = {}) {
    if (obs.blocked.empty()) throw Outage{};

    double alpha = opt.alpha0;
    int relaxations = 0;
    for (;;) {
        const QpProblem p = make_problem(obs, prior, alpha, opt);
        const auto ug = unconstrained_minimum(p);

        if (auto sol = detail::solve_fixed_alpha(p, ug.theta)) {
            sol->rank_deficient = ug.rank_deficient;
            sol->relaxations = relaxations;
            return *sol;
        }
        if (alpha <= 0.0) {
            // Drop every non-blocked constraint; only the domain remains.
            QpProblem bare = p;
            bare.constrained.clear();
            KktSolution sol;
            if (auto s = detail::solve_fixed_alpha(bare, ug.theta)) sol = *s;
            else sol.theta_star = sol.theta_g = ug.theta;
            sol.alpha_final = alpha;
            sol.d_min = p.d_min;
            sol.objective = objective(p, sol.theta_star);
            sol.rank_deficient = ug.rank_deficient;
            sol.infeasible_relaxed = true;
            sol.relaxations = relaxations;
            return sol;
        }
        alpha = std::max(0.0, alpha - opt.alpha_step);
        ++relaxations;
    }
}

/// Residuals of the KKT conditions for a solution of problem `p`.
struct KktReport {
    double stationarity = 0.0;          // |2(A theta - b) - sum m h|
    double min_multiplier = 0.0;        // dual feasibility: >= 0
    double min_slack = 0.0;             // primal feasibility: >= -tol
    double max_complementarity = 0.0;   // |m * slack|

    bool ok(double tol = kFeasTol) const {
        return stationarity < tol && min_multiplier >= 0.0 && min_slack >= -tol && max_complementarity < tol;
    }
};

inline KktReport verify_kkt(const QpProblem& p, const KktSolution& s) {
    KktReport r;
    Vec2 g = objective_gradient(p, s.theta_star);
    r.min_multiplier = std::numeric_limits<double>::infinity();
    for (const auto& c : s.active_set) {
        g -= c.multiplier * c.h;
        r.min_multiplier = std::min(r.min_multiplier, c.multiplier);
        double slack;
        if (c.domain_wall) {
            slack = domain_walls(*p.domain)[c.index].slack(s.theta_star);
        } else {
            slack = std::abs(p.nonblocked[c.index].signed_distance(s.theta_star)) - p.d_min;
        }
        r.max_complementarity = std::max(r.max_complementarity, std::abs(c.multiplier * slack));
    }
    if (s.active_set.empty()) r.min_multiplier = 0.0;
    r.stationarity = norm(g);

    r.min_slack = std::numeric_limits<double>::infinity();
    for (std::size_t j : p.constrained)
        r.min_slack = std::min(r.min_slack, std::abs(p.nonblocked[j].signed_distance(s.theta_star)) - p.d_min);
    if (p.domain)
        for (const auto& w : domain_walls(*p.domain)) r.min_slack = std::min(r.min_slack, w.slack(s.theta_star));
    if (!std::isfinite(r.min_slack)) r.min_slack = 0.0;
    return r;
}

// ---------------------------------------------------------------------------
// Radius estimate

/// Mean of N(mu, sigma^2) truncated to [lo, hi]; either bound may be infinite.
inline double truncated_normal_mean(double mu, double sigma, double lo, double hi) {
    const double a = (lo - mu) / sigma;
    const double b = (hi - mu) / sigma;
    auto pdf = [](double z) { return std::isinf(z) ? 0.0 : std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); };

    // Mass Phi(b) - Phi(a), evaluated on whichever tail avoids cancellation.
    double mass;
    if (a >= 0.0) {
        mass = q_function(a) - q_function(b);
    } else if (b <= 0.0) {
        mass = q_function(-b) - q_function(-a);
    } else {
        mass = 1.0 - q_function(b) - q_function(-a);
    }
    if (!(mass > 0.0)) return a >= 0.0 ? lo : hi;  // interval lies beyond double resolution of the tail
    const double mean = mu + sigma * (pdf(a) - pdf(b)) / mass;
    return std::clamp(mean, lo, hi);
}

struct RadiusInterval {
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
};

/// [max blocked distance, min non-blocked distance] at theta_hat. Non-blocked
/// links outside the segment window are skipped when `window` is set.
inline RadiusInterval radius_interval(Point2 theta_hat, const ObservationSet& obs,
                                      std::optional<double> window = std::nullopt) {
    RadiusInterval iv;
    for (const auto& l : obs.blocked) iv.lo = std::max(iv.lo, std::abs(l.signed_distance(theta_hat)));
    for (const auto& l : obs.nonblocked) {
        if (window) {
            const double t = projection_parameter(l, theta_hat);
            if (t < -*window || t > 1.0 + *window) continue;
        }
        iv.hi = std::min(iv.hi, std::abs(l.signed_distance(theta_hat)));
    }
    return iv;
}

/// Posterior-mean radius: the prior truncated to the interval implied by the
/// observations at theta_hat. A zero lower bound carries no information and
/// leaves the prior untruncated from below.
inline double estimate_radius(Point2 theta_hat, const ObservationSet& obs, const RadiusPrior& prior,
                              std::optional<double> window = std::nullopt) {
    if (obs.blocked.empty()) throw Outage{};
    const auto iv = radius_interval(theta_hat, obs, window);
    if (iv.hi <= iv.lo) return std::max(iv.lo, prior.mu_r);
    const double lo = iv.lo > 0.0 ? iv.lo : -std::numeric_limits<double>::infinity();
    return truncated_normal_mean(prior.mu_r, prior.sigma_r, lo, iv.hi);
}

}  // namespace shadowcast

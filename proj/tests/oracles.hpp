// Test-only oracles, independent of the implementation paths they check.
#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "basepose/kinematics.hpp"
#include "basepose/navigation.hpp"

namespace basepose::oracles {

// Rectangle overlap by dense point sampling of both rectangles (either one
// containing a sample of the other counts). step in meters.
inline bool rects_overlap_sampled(const OrientedRect& a, const OrientedRect& b,
                                  double step = 0.005) {
    auto scan = [&](const OrientedRect& src, const OrientedRect& dst) {
        const int nu = std::max(1, static_cast<int>(std::ceil(2 * src.half_w / step)));
        const int nv = std::max(1, static_cast<int>(std::ceil(2 * src.half_h / step)));
        for (int i = 0; i <= nu; ++i)
            for (int j = 0; j <= nv; ++j) {
                const double lx = -src.half_w + 2 * src.half_w * i / nu;
                const double ly = -src.half_h + 2 * src.half_h * j / nv;
                const Vec2 p = src.center + rotate({lx, ly}, src.theta);
                if (dst.contains(p)) return true;
            }
        return false;
    };
    return scan(a, b) || scan(b, a);
}

// Point-sampled footprint collision: true iff any sampled footprint point lies
// inside the table, an obstacle, or outside the world.
inline bool base_collides_sampled(const SceneSpec& scene, const RobotModel& robot,
                                  const Pose2& base, double step = 0.01) {
    const OrientedRect fp = robot.footprint_at(base);
    const int nu = std::max(1, static_cast<int>(std::ceil(2 * fp.half_w / step)));
    const int nv = std::max(1, static_cast<int>(std::ceil(2 * fp.half_h / step)));
    for (int i = 0; i <= nu; ++i)
        for (int j = 0; j <= nv; ++j) {
            const double lx = -fp.half_w + 2 * fp.half_w * i / nu;
            const double ly = -fp.half_h + 2 * fp.half_h * j / nv;
            const Vec2 p = fp.center + rotate({lx, ly}, fp.theta);
            if (std::abs(p.x) > scene.world_half_extent ||
                std::abs(p.y) > scene.world_half_extent)
                return true;
            if (scene.table.contains(p)) return true;
            for (const auto& ob : scene.obstacles)
                if (ob.rect.contains(p)) return true;
        }
    return false;
}

// Joint-grid IK oracle: sweep a uniform steps x steps grid over (q1, q2),
// accept when the end effector lands within grasp tolerance, joint limits hold
// and the sampled arm clears every full-height obstacle. The q1 inner sweep is
// pruned exactly: for fixed q2 the reach radius is fixed, so only q1 values
// whose end effector can lie inside the tolerance ball are visited.
inline bool ik_feasible_joint_grid(const SceneSpec& scene, const RobotModel& robot,
                                   const Pose2& base, int steps = 720) {
    const Vec2 mount = robot.mount_at(base);
    const Vec2 d = scene.object_pos - mount;
    const double dist = d.norm();
    const double phi = std::atan2(d.y, d.x);
    const double dq = kTwoPi / steps;

    auto grid_angle = [&](int idx) { return -std::numbers::pi + idx * dq; };

    for (int j = 0; j < steps; ++j) {
        const double q2 = grid_angle(j);
        if (std::abs(q2) > robot.q2_max) continue;
        const double r =
            std::sqrt(robot.l1 * robot.l1 + robot.l2 * robot.l2 +
                      2.0 * robot.l1 * robot.l2 * std::cos(q2));
        // |ee - target|^2 = r^2 + dist^2 - 2 r dist cos(q1 + gamma - phi + theta)
        if (std::abs(r - dist) > robot.grasp_tol) continue;  // no q1 can reach
        const double gamma = std::atan2(robot.l2 * std::sin(q2), robot.l1 + robot.l2 * std::cos(q2));
        double cos_bound = 1.0;
        if (r * dist > 0.0)
            cos_bound = (r * r + dist * dist - robot.grasp_tol * robot.grasp_tol) /
                        (2.0 * r * dist);
        const double delta = cos_bound >= 1.0  ? 0.0
                             : cos_bound <= -1.0 ? std::numbers::pi
                                                 : std::acos(cos_bound);
        // center of the feasible q1 band (absolute arm angle = phi)
        const double q1c = std::remainder(phi - gamma - base.theta, kTwoPi);
        const int lo = static_cast<int>(std::floor((q1c - delta + std::numbers::pi) / dq)) - 1;
        const int hi = static_cast<int>(std::ceil((q1c + delta + std::numbers::pi) / dq)) + 1;
        for (int ii = lo; ii <= hi; ++ii) {
            const int i = ((ii % steps) + steps) % steps;
            const double q1 = grid_angle(i);
            if (std::abs(q1) > robot.q1_max) continue;
            const double a1 = base.theta + q1;
            const Vec2 elbow = mount + Vec2{robot.l1 * std::cos(a1), robot.l1 * std::sin(a1)};
            const double a2 = a1 + q2;
            const Vec2 ee = elbow + Vec2{robot.l2 * std::cos(a2), robot.l2 * std::sin(a2)};
            if ((ee - scene.object_pos).norm() > robot.grasp_tol) continue;
            bool clear = true;
            for (const auto& ob : scene.obstacles) {
                if (!ob.full_height) continue;
                if (segment_intersects_rect(mount, elbow, ob.rect) ||
                    segment_intersects_rect(elbow, ee, ob.rect)) {
                    clear = false;
                    break;
                }
            }
            if (clear) return true;
        }
    }
    return false;
}

// Unpruned reference for the oracle itself (small step counts only).
inline bool ik_feasible_joint_grid_naive(const SceneSpec& scene, const RobotModel& robot,
                                         const Pose2& base, int steps) {
    const Vec2 mount = robot.mount_at(base);
    const double dq = kTwoPi / steps;
    for (int i = 0; i < steps; ++i) {
        const double q1 = -std::numbers::pi + i * dq;
        if (std::abs(q1) > robot.q1_max) continue;
        for (int j = 0; j < steps; ++j) {
            const double q2 = -std::numbers::pi + j * dq;
            if (std::abs(q2) > robot.q2_max) continue;
            const double a1 = base.theta + q1;
            const Vec2 elbow = mount + Vec2{robot.l1 * std::cos(a1), robot.l1 * std::sin(a1)};
            const double a2 = a1 + q2;
            const Vec2 ee = elbow + Vec2{robot.l2 * std::cos(a2), robot.l2 * std::sin(a2)};
            if ((ee - scene.object_pos).norm() > robot.grasp_tol) continue;
            bool clear = true;
            for (const auto& ob : scene.obstacles) {
                if (!ob.full_height) continue;
                if (segment_intersects_rect(mount, elbow, ob.rect) ||
                    segment_intersects_rect(elbow, ee, ob.rect)) {
                    clear = false;
                    break;
                }
            }
            if (clear) return true;
        }
    }
    return false;
}

// Is `pred`'s verdict stable under base-position perturbations of up to
// `radius` meters? Poses near the predicate's decision boundary fail this.
template <typename Pred>
bool verdict_stable_for(const Pose2& base, double radius, Pred&& pred) {
    const bool center = pred(base);
    for (int ring = 1; ring <= 2; ++ring) {
        const double r = radius * ring / 2.0;
        for (int a = 0; a < 8; ++a) {
            const double ang = a * kTwoPi / 8.0;
            const Pose2 p(base.x + r * std::cos(ang), base.y + r * std::sin(ang), base.theta);
            if (pred(p) != center) return false;
        }
    }
    return true;
}

inline bool verdict_stable(const SceneSpec& scene, const RobotModel& robot, const Pose2& base,
                           double radius = 0.02) {
    return verdict_stable_for(base, radius, [&](const Pose2& p) {
        return collision_free(scene, robot, p) && ik_feasible(scene, robot, p);
    });
}

// Scan-based Dijkstra (no heap), deliberately different machinery from the
// A* under test. Returns +inf for unreachable cells.
inline std::vector<double> dijkstra_scan(const NavCostmap& map, int su, int sv) {
    const int hw = map.hw;
    const int n = hw * hw;
    std::vector<double> dist(static_cast<size_t>(n), std::numeric_limits<double>::infinity());
    std::vector<char> done(static_cast<size_t>(n), 0);
    if (map.is_blocked(su, sv)) return dist;
    dist[static_cast<size_t>(sv) * hw + su] = 0.0;
    const int du[8] = {1, -1, 0, 0, 1, 1, -1, -1};
    const int dv[8] = {0, 0, 1, -1, 1, -1, 1, -1};
    for (int iter = 0; iter < n; ++iter) {
        int best = -1;
        double bd = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i)
            if (!done[static_cast<size_t>(i)] && dist[static_cast<size_t>(i)] < bd) {
                bd = dist[static_cast<size_t>(i)];
                best = i;
            }
        if (best < 0) break;
        done[static_cast<size_t>(best)] = 1;
        const int u = best % hw, v = best / hw;
        for (int d = 0; d < 8; ++d) {
            const int nu = u + du[d], nv = v + dv[d];
            if (nu < 0 || nu >= hw || nv < 0 || nv >= hw) continue;
            if (map.is_blocked(nu, nv)) continue;
            const double nd =
                bd + (d < 4 ? map.resolution : map.resolution * std::numbers::sqrt2);
            auto& cell = dist[static_cast<size_t>(nv) * hw + nu];
            if (nd < cell) cell = nd;
        }
    }
    return dist;
}

}  // namespace basepose::oracles

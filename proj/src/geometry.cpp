#include "basepose/geometry.hpp"

#include <algorithm>

namespace basepose {

namespace {

// Project both rectangles on the axis; true if the intervals are disjoint.
bool separated_on(Vec2 axis, const OrientedRect& a, const OrientedRect& b) {
    auto project = [&](const OrientedRect& r, double& lo, double& hi) {
        const auto cs = r.corners();
        lo = hi = cs[0].dot(axis);
        for (int i = 1; i < 4; ++i) {
            const double p = cs[i].dot(axis);
            lo = std::min(lo, p);
            hi = std::max(hi, p);
        }
    };
    double alo, ahi, blo, bhi;
    project(a, alo, ahi);
    project(b, blo, bhi);
    return ahi < blo || bhi < alo;
}

}  // namespace

bool rects_intersect(const OrientedRect& a, const OrientedRect& b) {
    const Vec2 axes[4] = {rotate({1.0, 0.0}, a.theta), rotate({0.0, 1.0}, a.theta),
                          rotate({1.0, 0.0}, b.theta), rotate({0.0, 1.0}, b.theta)};
    for (const Vec2& ax : axes)
        if (separated_on(ax, a, b)) return false;
    return true;
}

bool segment_intersects_rect(Vec2 p, Vec2 q, const OrientedRect& r) {
    // work in the rectangle's frame, then slab-clip the segment
    const double c = std::cos(r.theta), s = std::sin(r.theta);
    auto to_local = [&](Vec2 w) {
        const Vec2 d = w - r.center;
        return Vec2{c * d.x + s * d.y, -s * d.x + c * d.y};
    };
    const Vec2 a = to_local(p);
    const Vec2 b = to_local(q);
    double t0 = 0.0, t1 = 1.0;
    const double dir[2] = {b.x - a.x, b.y - a.y};
    const double org[2] = {a.x, a.y};
    const double ext[2] = {r.half_w, r.half_h};
    for (int i = 0; i < 2; ++i) {
        if (std::abs(dir[i]) < 1e-15) {
            if (std::abs(org[i]) > ext[i]) return false;
            continue;
        }
        double ta = (-ext[i] - org[i]) / dir[i];
        double tb = (ext[i] - org[i]) / dir[i];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return false;
    }
    return true;
}

}  // namespace basepose

#pragma once

#include <array>
#include <cmath>
#include <numbers>

namespace basepose {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline double normalize_angle(double a) {
    a = std::fmod(a, kTwoPi);
    if (a < 0.0) a += kTwoPi;
    if (a >= kTwoPi) a = 0.0;  // fmod rounding guard
    return a;
}

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }
};

inline Vec2 rotate(Vec2 v, double a) {
    const double c = std::cos(a), s = std::sin(a);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}

// SE(2) pose; theta kept in [0, 2*pi).
struct Pose2 {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;
    Pose2() = default;
    Pose2(double x_, double y_, double theta_) : x(x_), y(y_), theta(normalize_angle(theta_)) {}
    Vec2 pos() const { return {x, y}; }
};

struct OrientedRect {
    Vec2 center;
    double half_w = 0.0;  // along local x
    double half_h = 0.0;  // along local y
    double theta = 0.0;

    std::array<Vec2, 4> corners() const {
        const Vec2 ax = rotate({1.0, 0.0}, theta);
        const Vec2 ay = rotate({0.0, 1.0}, theta);
        return {center + ax * half_w + ay * half_h, center - ax * half_w + ay * half_h,
                center - ax * half_w - ay * half_h, center + ax * half_w - ay * half_h};
    }

    bool contains(Vec2 p) const {
        const Vec2 d = p - center;
        const double c = std::cos(theta), s = std::sin(theta);
        const double lx = c * d.x + s * d.y;
        const double ly = -s * d.x + c * d.y;
        return std::abs(lx) <= half_w && std::abs(ly) <= half_h;
    }
};

// Separating-axis test for two oriented rectangles (touching counts as
// intersecting; candidate axes are the four edge normals).
bool rects_intersect(const OrientedRect& a, const OrientedRect& b);

// Does the segment [p, q] intersect the rectangle (including its interior)?
bool segment_intersects_rect(Vec2 p, Vec2 q, const OrientedRect& r);

// Discretized base pose: pixel (u, v) plus orientation bin k.
struct GridPose {
    int u = 0;
    int v = 0;
    int k = 0;
    bool operator==(const GridPose&) const = default;
};

// (k, v, u) lexicographic rule used everywhere ties must break deterministically.
inline bool grid_pose_less(const GridPose& a, const GridPose& b) {
    if (a.k != b.k) return a.k < b.k;
    if (a.v != b.v) return a.v < b.v;
    return a.u < b.u;
}

}  // namespace basepose

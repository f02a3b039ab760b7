#pragma once

#include <optional>
#include <vector>

#include "basepose/kinematics.hpp"
#include "basepose/scene.hpp"

namespace basepose {

struct NavCostmap {
    int hw = 0;
    double resolution = 0.0;
    double inflation_radius = 0.0;
    std::vector<uint8_t> blocked;  // [v][u], 1 = blocked

    bool is_blocked(int u, int v) const {
        return blocked[static_cast<size_t>(v) * hw + u] != 0;
    }
    // Finite stand-in for "unreachable"; keeps the log-scaled advantage finite.
    double sentinel() const { return (hw + hw) * resolution; }
};

struct Path {
    std::vector<GridPose> cells;  // k unused, kept 0
    double length = 0.0;          // meters; straight = res, diagonal = res*sqrt(2)
};

// blocked = table and obstacle pixels, inflated by the footprint inradius
// (Euclidean distance <= radius).
NavCostmap build_costmap(const OrthoProjection& proj, const RobotModel& robot);

// Minimal-length 8-connected path under the octile heuristic; nullopt iff the
// goal is unreachable. start must be free.
std::optional<Path> astar(const NavCostmap& map, int su, int sv, int gu, int gv);

// Exact distances from (su, sv) to every cell; unreachable cells get +inf.
// One run covers a whole candidate set.
std::vector<double> dijkstra_all(const NavCostmap& map, int su, int sv);

// A* path length with the snapping rule: a blocked start/goal snaps to the
// nearest free cell within 2 cells, otherwise the sentinel is returned.
double nav_cost(const NavCostmap& map, const OrthoProjection& proj, const Pose2& start,
                const GridPose& goal);

// Same snapping rule applied to the start; returns per-cell costs with
// blocked/unreachable cells mapped to the sentinel.
std::vector<double> nav_cost_field(const NavCostmap& map, const OrthoProjection& proj,
                                   const Pose2& start);

// Nearest free cell within `radius` cells (Euclidean, ties by (v, u));
// false if none.
bool snap_free(const NavCostmap& map, int u, int v, int radius, int& ou, int& ov);

}  // namespace basepose

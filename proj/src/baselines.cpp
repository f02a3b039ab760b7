#include "basepose/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace basepose {

FixedPoseSet make_fixed_pose_set(const SceneSpec& scene, double standoff) {
    FixedPoseSet set;
    const auto& t = scene.table;
    // local anchor directions: side midpoints then corners
    const double hw = t.half_w, hh = t.half_h;
    const double diag = standoff / std::numbers::sqrt2;
    const Vec2 locals[8] = {
        {hw + standoff, 0.0},          {-hw - standoff, 0.0},
        {0.0, hh + standoff},          {0.0, -hh - standoff},
        {hw + diag, hh + diag},        {-hw - diag, hh + diag},
        {-hw - diag, -hh - diag},      {hw + diag, -hh - diag},
    };
    for (const Vec2& l : locals) {
        const Vec2 p = t.center + rotate(l, t.theta);
        const double heading = std::atan2(t.center.y - p.y, t.center.x - p.x);
        set.poses.emplace_back(p.x, p.y, heading);
    }
    return set;
}

FbpResult fbp_select(const SceneSpec& scene, const RobotModel& robot, const NavCostmap& map,
                     const OrthoProjection& proj, const FixedPoseSet& set) {
    FbpResult res;
    std::vector<size_t> order(set.poses.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    const Vec2 start = scene.robot_start.pos();
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return (set.poses[a].pos() - start).norm() < (set.poses[b].pos() - start).norm();
    });

    Pose2 current = scene.robot_start;
    for (size_t idx : order) {
        const Pose2& cand = set.poses[idx];
        ++res.attempts;
        GridPose goal{0, 0, 0};
        world_to_grid(cand, proj, 1, goal);
        res.path_length += nav_cost(map, proj, current, goal);
        current = cand;
        if (collision_free(scene, robot, cand) && ik_feasible(scene, robot, cand)) {
            res.pose = cand;
            return res;
        }
    }
    return res;  // all failed; length covers every leg
}

std::optional<GridPose> pbs_select(const SceneSpec& scene, const OrthoProjection& proj,
                                   const IRMLabel& irm) {
    const Vec2 start = scene.robot_start.pos();
    std::optional<GridPose> best;
    double best_d = 0.0;
    for (int k = 0; k < irm.k; ++k)
        for (int v = 0; v < irm.hw; ++v)
            for (int u = 0; u < irm.hw; ++u) {
                if (!irm.at(k, v, u)) continue;
                const Vec2 p = proj.pixel_center(u, v);
                const double d = (p - start).norm();
                if (!best || d < best_d) {
                    best = GridPose{u, v, k};
                    best_d = d;
                }
                // equal distances: (k, v, u) scan order already visits the
                // lexicographic winner first, so strict < keeps it
            }
    return best;
}

std::optional<NbsResult> nbs_select(const SceneSpec& scene, const RobotModel& robot,
                                    const NavCostmap& map, const OrthoProjection& proj,
                                    const IRMLabel& irm) {
    (void)robot;
    const std::vector<double> field = nav_cost_field(map, proj, scene.robot_start);
    std::optional<NbsResult> best;
    for (int k = 0; k < irm.k; ++k)
        for (int v = 0; v < irm.hw; ++v)
            for (int u = 0; u < irm.hw; ++u) {
                if (!irm.at(k, v, u)) continue;
                const double nav = field[static_cast<size_t>(v) * irm.hw + u];
                if (!best || nav < best->nav) best = NbsResult{{u, v, k}, nav, false};
            }
    if (best) best->unreachable = best->nav >= map.sentinel();
    return best;
}

}  // namespace basepose

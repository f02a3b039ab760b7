#pragma once

#include <optional>
#include <vector>

#include "basepose/kinematics.hpp"
#include "basepose/navigation.hpp"

namespace basepose {

// Fixed candidate poses anchored to the table frame: 4 side midpoints plus 4
// corners at a fixed standoff, all facing the table center.
struct FixedPoseSet {
    std::vector<Pose2> poses;  // world frame, already placed for a scene
};

FixedPoseSet make_fixed_pose_set(const SceneSpec& scene, double standoff = 0.65);

struct FbpResult {
    std::optional<Pose2> pose;  // empty = all candidates failed
    double path_length = 0.0;   // accumulated over every attempted leg
    int attempts = 0;
};

// Visit poses in ascending Euclidean distance from the robot start; a pose
// succeeds iff it is collision-free and IK-feasible. Path length accumulates
// the A* legs between successive attempted poses.
FbpResult fbp_select(const SceneSpec& scene, const RobotModel& robot, const NavCostmap& map,
                     const OrthoProjection& proj, const FixedPoseSet& set);

// Proximity-based selection: the positive IRM cell with the smallest Euclidean
// distance to the robot; ties by (k, v, u). nullopt = empty IRM (abstention).
std::optional<GridPose> pbs_select(const SceneSpec& scene, const OrthoProjection& proj,
                                   const IRMLabel& irm);

struct NbsResult {
    GridPose pose;
    double nav = 0.0;
    bool unreachable = false;  // every candidate at the sentinel
};

// Navigation-cost-based selection over positive IRM cells; ties by (k, v, u).
std::optional<NbsResult> nbs_select(const SceneSpec& scene, const RobotModel& robot,
                                    const NavCostmap& map, const OrthoProjection& proj,
                                    const IRMLabel& irm);

}  // namespace basepose

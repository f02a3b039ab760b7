#pragma once

#include <cstdint>
#include <vector>

#include "basepose/geometry.hpp"
#include "basepose/scene.hpp"

namespace basepose {

// Planar mobile manipulator: rectangular base footprint plus a 2-link arm
// mounted ahead of the base center, operating above table height. Joint q1 is
// the shoulder angle relative to the base heading, q2 the elbow angle.
struct RobotModel {
    double footprint_len = 0.5;  // along heading
    double footprint_wid = 0.5;
    double arm_mount_offset = 0.15;  // forward of the base center
    double l1 = 0.45;
    double l2 = 0.40;
    double q1_max = 135.0 * std::numbers::pi / 180.0;
    double q2_max = 150.0 * std::numbers::pi / 180.0;
    double grasp_tol = 0.01;

    double r_min() const { return std::abs(l1 - l2); }
    double r_max() const { return l1 + l2; }
    double inflation_radius() const { return 0.5 * std::min(footprint_len, footprint_wid); }

    OrientedRect footprint_at(const Pose2& base) const {
        return {{base.x, base.y}, footprint_len * 0.5, footprint_wid * 0.5, base.theta};
    }
    Vec2 mount_at(const Pose2& base) const {
        return Vec2{base.x, base.y} + rotate({arm_mount_offset, 0.0}, base.theta);
    }
};

struct IkSolution {
    double q1 = 0.0;
    double q2 = 0.0;
};

// Footprint vs table, obstacles and the world boundary (separating-axis test).
bool collision_free(const SceneSpec& scene, const RobotModel& robot, const Pose2& base);

// Both elbow solutions for reaching `target` from `base`, unfiltered by limits.
// Returns the number of solutions written (0 if out of the reach annulus).
int ik_solutions(const RobotModel& robot, const Pose2& base, Vec2 target, IkSolution out[2]);

// Shoulder->elbow and elbow->target segments vs the full-height obstacle
// footprints. The table top sits below the arm plane and is ignored.
bool arm_clear(const SceneSpec& scene, const RobotModel& robot, const Pose2& base,
               const IkSolution& sol, Vec2 target);

// Reach annulus + joint limits on an analytic solution + link clearance.
bool ik_feasible(const SceneSpec& scene, const RobotModel& robot, const Pose2& base);

// K x H x W binary ground truth A_valid(s); shares grid metadata with proj.
struct IRMLabel {
    int k = 0;
    int hw = 0;
    std::vector<uint8_t> cells;  // [k][v][u]

    uint8_t& at(int ki, int v, int u) {
        return cells[(static_cast<size_t>(ki) * hw + v) * hw + u];
    }
    uint8_t at(int ki, int v, int u) const {
        return cells[(static_cast<size_t>(ki) * hw + v) * hw + u];
    }
    int64_t positive_count() const {
        int64_t n = 0;
        for (uint8_t c : cells) n += c;
        return n;
    }
};

// Exhaustive feasibility at every cell-center pose. stride_px > 1 evaluates a
// coarser lattice and dilates each verdict over its stride block.
IRMLabel compute_irm(const SceneSpec& scene, const RobotModel& robot, int k_bins,
                     const OrthoProjection& proj, int stride_px = 1);

struct IrmSample {
    SceneSpec scene;
    OrthoProjection proj;
    IRMLabel label;
};

// n scenes with non-empty IRMs; all-zero scenes are rejected and resampled.
// Slot i draws from streams mix(seed, i, t), t = 0,1,..., so the result is
// independent of worker count and evaluation order.
std::vector<IrmSample> sample_dataset(int n, uint64_t seed, const SceneConfig& config,
                                      const RobotModel& robot, int k_bins, int h_pixels,
                                      int stride_px = 1, int retry_budget = 64);

}  // namespace basepose

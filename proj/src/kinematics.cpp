#include "basepose/kinematics.hpp"

#include "basepose/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "basepose/rng.hpp"

namespace basepose {

bool collision_free(const SceneSpec& scene, const RobotModel& robot, const Pose2& base) {
    const OrientedRect fp = robot.footprint_at(base);
    for (const Vec2& c : fp.corners())
        if (std::abs(c.x) > scene.world_half_extent || std::abs(c.y) > scene.world_half_extent)
            return false;
    if (rects_intersect(fp, scene.table)) return false;
    for (const auto& ob : scene.obstacles)
        if (rects_intersect(fp, ob.rect)) return false;
    return true;
}

int ik_solutions(const RobotModel& robot, const Pose2& base, Vec2 target, IkSolution out[2]) {
    const Vec2 mount = robot.mount_at(base);
    const Vec2 d = target - mount;
    const double r = d.norm();
    if (r < robot.r_min() || r > robot.r_max()) return 0;
    const double c2 =
        (r * r - robot.l1 * robot.l1 - robot.l2 * robot.l2) / (2.0 * robot.l1 * robot.l2);
    const double c2c = std::clamp(c2, -1.0, 1.0);
    const double q2 = std::acos(c2c);
    // target bearing in the base-heading frame
    const double phi = std::atan2(d.y, d.x) - base.theta;
    int n = 0;
    for (const double q2s : {q2, -q2}) {
        const double q1 = std::remainder(
            phi - std::atan2(robot.l2 * std::sin(q2s), robot.l1 + robot.l2 * std::cos(q2s)),
            kTwoPi);
        out[n].q1 = q1;
        out[n].q2 = q2s;
        ++n;
        if (q2 == 0.0) break;  // elbow-up == elbow-down at full extension
    }
    return n;
}

bool arm_clear(const SceneSpec& scene, const RobotModel& robot, const Pose2& base,
               const IkSolution& sol, Vec2 target) {
    const Vec2 mount = robot.mount_at(base);
    const double a1 = base.theta + sol.q1;
    const Vec2 elbow = mount + Vec2{robot.l1 * std::cos(a1), robot.l1 * std::sin(a1)};
    for (const auto& ob : scene.obstacles) {
        if (!ob.full_height) continue;
        if (segment_intersects_rect(mount, elbow, ob.rect)) return false;
        if (segment_intersects_rect(elbow, target, ob.rect)) return false;
    }
    return true;
}

bool ik_feasible(const SceneSpec& scene, const RobotModel& robot, const Pose2& base) {
    IkSolution sols[2];
    const int n = ik_solutions(robot, base, scene.object_pos, sols);
    for (int i = 0; i < n; ++i) {
        if (std::abs(sols[i].q1) > robot.q1_max) continue;
        if (std::abs(sols[i].q2) > robot.q2_max) continue;
        if (arm_clear(scene, robot, base, sols[i], scene.object_pos)) return true;
    }
    return false;
}

IRMLabel compute_irm(const SceneSpec& scene, const RobotModel& robot, int k_bins,
                     const OrthoProjection& proj, int stride_px) {
    IRMLabel label;
    label.k = k_bins;
    label.hw = proj.hw;
    label.cells.assign(static_cast<size_t>(k_bins) * proj.hw * proj.hw, 0);
    const int hw = proj.hw;

#pragma omp parallel for schedule(dynamic, 1) if (kernels::parallel_enabled())
    for (int ki = 0; ki < k_bins; ++ki) {
        for (int v = 0; v < hw; v += stride_px) {
            for (int u = 0; u < hw; u += stride_px) {
                const Pose2 pose = grid_to_world({u, v, ki}, proj, k_bins);
                const uint8_t ok =
                    (collision_free(scene, robot, pose) && ik_feasible(scene, robot, pose)) ? 1
                                                                                            : 0;
                for (int dv = 0; dv < stride_px && v + dv < hw; ++dv)
                    for (int du = 0; du < stride_px && u + du < hw; ++du)
                        label.at(ki, v + dv, u + du) = ok;
            }
        }
    }
    return label;
}

std::vector<IrmSample> sample_dataset(int n, uint64_t seed, const SceneConfig& config,
                                      const RobotModel& robot, int k_bins, int h_pixels,
                                      int stride_px, int retry_budget) {
    std::vector<IrmSample> out(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        bool done = false;
        for (int t = 0; t < retry_budget && !done; ++t) {
            IrmSample s;
            s.scene = sample_scene(mix_seed(seed, (static_cast<uint64_t>(i) << 20) | t), config);
            s.proj = rasterize(s.scene, h_pixels);
            s.label = compute_irm(s.scene, robot, k_bins, s.proj, stride_px);
            if (s.label.positive_count() > 0) {
                out[static_cast<size_t>(i)] = std::move(s);
                done = true;
            }
        }
        if (!done) throw std::runtime_error("sample_dataset: retry budget exhausted");
    }
    return out;
}

}  // namespace basepose

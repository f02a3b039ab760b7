#pragma once

#include <cstdint>
#include <vector>

#include "basepose/geometry.hpp"
#include "basepose/tensor.hpp"

namespace basepose {

// Semantic raster channels, highest priority last in rasterization order.
enum SemanticClass : int {
    kSemFree = 0,
    kSemTable = 1,
    kSemObstacle = 2,
    kSemObject = 3,
    kSemRobot = 4,
};
constexpr int kSemChannels = 5;

struct ObstacleSpec {
    OrientedRect rect;
    bool full_height = true;  // full-height obstacles also block the arm
    double height = 1.5;
};

// Parametric world description. Everything downstream (rasters, IRMs,
// costmaps) is a pure function of this struct.
struct SceneSpec {
    double world_half_extent = 2.4;
    double resolution = 0.075;  // meters per pixel
    OrientedRect table;
    double table_height = 0.75;
    std::vector<ObstacleSpec> obstacles;
    Vec2 object_pos;       // cube center, world frame
    double object_yaw = 0.0;  // grasp yaw of the predefined top-down grasp
    double object_size = 0.075;
    Pose2 robot_start;
    double robot_draw_len = 0.5;  // footprint drawn into the raster
    double robot_draw_wid = 0.5;
    double robot_draw_height = 0.9;
    uint64_t seed = 0;

    OrientedRect object_rect() const {
        return {object_pos, object_size * 0.5, object_size * 0.5, object_yaw};
    }
    OrientedRect robot_rect() const {
        return {{robot_start.x, robot_start.y}, robot_draw_len * 0.5, robot_draw_wid * 0.5,
                robot_start.theta};
    }
    bool in_world(Vec2 p) const {
        return std::abs(p.x) <= world_half_extent && std::abs(p.y) <= world_half_extent;
    }
};

// Scene-distribution parameters for procedural sampling.
struct SceneConfig {
    double world_half_extent = 2.4;
    double resolution = 0.075;
    double table_width = 1.6;
    double table_depth = 0.8;
    double table_height = 0.75;
    double table_center_range = 1.0;  // |x|,|y| of the table center
    int obstacle_min = 1;
    int obstacle_max = 4;
    double obstacle_side_min = 0.2;
    double obstacle_side_max = 0.8;
    double obstacle_full_height_prob = 0.75;
    double obstacle_full_height = 1.5;
    double obstacle_low_height = 0.3;
    double object_size = 0.075;
    double object_margin = 0.1;  // min distance from the table edge
    double robot_radius_max = 3.0;
    double robot_radius_min = 1.0;
    double robot_len = 0.5;
    double robot_wid = 0.5;
    int retry_budget = 1000;
};

// State s: one-hot semantic raster plus depth heightmap.
struct OrthoProjection {
    TensorF semantic;  // [kSemChannels, H, W]
    TensorF depth;     // [H, W], meters, >= 0
    int hw = 0;        // H == W
    double resolution = 0.0;
    Vec2 origin;  // world coordinates of the center of pixel (0, 0)

    Vec2 pixel_center(int u, int v) const {
        return {origin.x + u * resolution, origin.y + v * resolution};
    }
    int semantic_class(int u, int v) const;
};

// Deterministic in seed; retries internally until all placement constraints
// hold. Throws std::runtime_error when the retry budget runs out.
SceneSpec sample_scene(uint64_t seed, const SceneConfig& config);

OrthoProjection rasterize(const SceneSpec& scene, int h_pixels);

// [kSemChannels, c, c] crop centered on (u, v); out-of-image pixels are zero.
TensorF robot_query_crop(const OrthoProjection& proj, int u, int v, int c);

// Nearest pixel center / nearest orientation bin (angle ties go to the lower
// index). Returns false if p is outside the world bounds.
bool world_to_grid(const Pose2& p, const OrthoProjection& proj, int k_bins, GridPose& out);
Pose2 grid_to_world(const GridPose& gp, const OrthoProjection& proj, int k_bins);

// Rigid rotation of the whole scene about the world center by quarter * 90deg.
SceneSpec rotate_scene_quarter(const SceneSpec& scene, int quarter);

// CCW quarter-turn rotations of the trailing two dims of a [.., H, W] tensor
// (H == W required).
template <typename T>
TensorT<T> rot90_ccw(const TensorT<T>& t, int quarters);

// Rotated grid cell under the same rotation (square raster).
inline void rot90_cell(int u, int v, int hw, int quarters, int& ou, int& ov) {
    quarters = ((quarters % 4) + 4) % 4;
    for (int i = 0; i < quarters; ++i) {
        const int nu = hw - 1 - v;
        const int nv = u;
        u = nu;
        v = nv;
    }
    ou = u;
    ov = v;
}

}  // namespace basepose

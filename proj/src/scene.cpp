#include "basepose/scene.hpp"

#include "basepose/kernels.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>

#include "basepose/rng.hpp"

namespace basepose {

int OrthoProjection::semantic_class(int u, int v) const {
    for (int c = kSemChannels - 1; c >= 0; --c)
        if (semantic[(static_cast<int64_t>(c) * hw + v) * hw + u] > 0.5f) return c;
    return kSemFree;
}

namespace {

bool rect_in_world(const OrientedRect& r, double he) {
    for (const Vec2& c : r.corners())
        if (std::abs(c.x) > he || std::abs(c.y) > he) return false;
    return true;
}

bool robot_placement_ok(const SceneSpec& scene, const Pose2& pose, double len, double wid) {
    const OrientedRect fp{{pose.x, pose.y}, len * 0.5, wid * 0.5, pose.theta};
    if (!rect_in_world(fp, scene.world_half_extent)) return false;
    if (rects_intersect(fp, scene.table)) return false;
    for (const auto& ob : scene.obstacles)
        if (rects_intersect(fp, ob.rect)) return false;
    return true;
}

}  // namespace

SceneSpec sample_scene(uint64_t seed, const SceneConfig& config) {
    Rng rng(seed, 0x5ce7e5a3);
    for (int attempt = 0; attempt < config.retry_budget; ++attempt) {
        SceneSpec s;
        s.world_half_extent = config.world_half_extent;
        s.resolution = config.resolution;
        s.table_height = config.table_height;
        s.object_size = config.object_size;
        s.robot_draw_len = config.robot_len;
        s.robot_draw_wid = config.robot_wid;
        s.seed = seed;

        s.table.half_w = config.table_width * 0.5;
        s.table.half_h = config.table_depth * 0.5;
        s.table.center = {rng.uniform(-config.table_center_range, config.table_center_range),
                          rng.uniform(-config.table_center_range, config.table_center_range)};
        s.table.theta = rng.uniform(0.0, kTwoPi);
        if (!rect_in_world(s.table, s.world_half_extent)) continue;

        // object strictly inside the table footprint
        const double mx = s.table.half_w - config.object_margin;
        const double my = s.table.half_h - config.object_margin;
        const Vec2 local{rng.uniform(-mx, mx), rng.uniform(-my, my)};
        s.object_pos = s.table.center + rotate(local, s.table.theta);
        s.object_yaw = rng.uniform(0.0, kTwoPi);

        const int n_obs = config.obstacle_min >= config.obstacle_max
                              ? config.obstacle_min
                              : rng.uniform_int(config.obstacle_min, config.obstacle_max);
        bool obstacles_ok = true;
        for (int i = 0; i < n_obs; ++i) {
            bool placed = false;
            for (int t = 0; t < 50 && !placed; ++t) {
                ObstacleSpec ob;
                ob.rect.half_w = rng.uniform(config.obstacle_side_min, config.obstacle_side_max) * 0.5;
                ob.rect.half_h = rng.uniform(config.obstacle_side_min, config.obstacle_side_max) * 0.5;
                ob.rect.theta = rng.uniform(0.0, kTwoPi);
                ob.rect.center = {rng.uniform(-s.world_half_extent, s.world_half_extent),
                                  rng.uniform(-s.world_half_extent, s.world_half_extent)};
                ob.full_height = rng.bernoulli(config.obstacle_full_height_prob);
                ob.height = ob.full_height ? config.obstacle_full_height : config.obstacle_low_height;
                if (!rect_in_world(ob.rect, s.world_half_extent)) continue;
                if (rects_intersect(ob.rect, s.table)) continue;
                s.obstacles.push_back(ob);
                placed = true;
            }
            if (!placed) {
                obstacles_ok = false;
                break;
            }
        }
        if (!obstacles_ok) continue;

        bool robot_ok = false;
        for (int t = 0; t < 100 && !robot_ok; ++t) {
            const double r = rng.uniform(config.robot_radius_min, config.robot_radius_max);
            const double a = rng.uniform(0.0, kTwoPi);
            Pose2 pose(s.table.center.x + r * std::cos(a), s.table.center.y + r * std::sin(a),
                       rng.uniform(0.0, kTwoPi));
            if (robot_placement_ok(s, pose, config.robot_len, config.robot_wid)) {
                s.robot_start = pose;
                robot_ok = true;
            }
        }
        if (!robot_ok) continue;
        return s;
    }
    throw std::runtime_error("sample_scene: retry budget exhausted (over-constrained config)");
}

OrthoProjection rasterize(const SceneSpec& scene, int h_pixels) {
    const double res = scene.resolution;
    assert(h_pixels * res >= 2.0 * scene.world_half_extent - 1e-9);
    OrthoProjection proj;
    proj.hw = h_pixels;
    proj.resolution = res;
    proj.origin = {-scene.world_half_extent + 0.5 * res, -scene.world_half_extent + 0.5 * res};
    proj.semantic = TensorF({kSemChannels, h_pixels, h_pixels});
    proj.depth = TensorF({h_pixels, h_pixels});

    const OrientedRect obj = scene.object_rect();
    const OrientedRect rob = scene.robot_rect();
    const double object_top = scene.table_height + scene.object_size;

    const int64_t hw2 = static_cast<int64_t>(h_pixels) * h_pixels;
    float* sem = proj.semantic.ptr();
    float* dep = proj.depth.ptr();

#pragma omp parallel for schedule(static) if (kernels::parallel_enabled())
    for (int v = 0; v < h_pixels; ++v) {
        for (int u = 0; u < h_pixels; ++u) {
            const Vec2 p = proj.pixel_center(u, v);
            int cls = kSemFree;
            double height = 0.0;
            if (scene.table.contains(p)) {
                cls = kSemTable;
                height = std::max(height, scene.table_height);
            }
            for (const auto& ob : scene.obstacles) {
                if (ob.rect.contains(p)) {
                    if (cls < kSemObstacle) cls = kSemObstacle;
                    height = std::max(height, ob.height);
                }
            }
            if (rob.contains(p)) {
                if (cls < kSemRobot) cls = kSemRobot;
                height = std::max(height, scene.robot_draw_height);
            }
            if (obj.contains(p)) {
                cls = kSemObject;  // top priority
                height = std::max(height, object_top);
            }
            const int64_t idx = static_cast<int64_t>(v) * h_pixels + u;
            sem[static_cast<int64_t>(cls) * hw2 + idx] = 1.0f;
            dep[idx] = static_cast<float>(height);
        }
    }

    // A cube smaller than one pixel can miss every pixel center; always mark
    // the pixel containing its center so the object stays visible.
    if (scene.object_size > 0.0) {
        const int u = std::clamp(
            static_cast<int>(std::floor((obj.center.x + scene.world_half_extent) / res)), 0,
            h_pixels - 1);
        const int v = std::clamp(
            static_cast<int>(std::floor((obj.center.y + scene.world_half_extent) / res)), 0,
            h_pixels - 1);
        const int64_t idx = static_cast<int64_t>(v) * h_pixels + u;
        for (int c = 0; c < kSemChannels; ++c) sem[static_cast<int64_t>(c) * hw2 + idx] = 0.0f;
        sem[static_cast<int64_t>(kSemObject) * hw2 + idx] = 1.0f;
        dep[idx] = std::max(dep[idx], static_cast<float>(object_top));
    }
    return proj;
}

TensorF robot_query_crop(const OrthoProjection& proj, int u, int v, int c) {
    assert(c % 2 == 1);
    const int r = c / 2;
    TensorF crop({kSemChannels, c, c});
    for (int ch = 0; ch < kSemChannels; ++ch)
        for (int i = 0; i < c; ++i) {
            const int sv = v - r + i;
            if (sv < 0 || sv >= proj.hw) continue;
            for (int j = 0; j < c; ++j) {
                const int su = u - r + j;
                if (su < 0 || su >= proj.hw) continue;
                crop[(static_cast<int64_t>(ch) * c + i) * c + j] =
                    proj.semantic[(static_cast<int64_t>(ch) * proj.hw + sv) * proj.hw + su];
            }
        }
    return crop;
}

bool world_to_grid(const Pose2& p, const OrthoProjection& proj, int k_bins, GridPose& out) {
    const double he = -proj.origin.x + 0.5 * proj.resolution;
    if (std::abs(p.x) > he || std::abs(p.y) > he) return false;
    auto to_cell = [&](double x) {
        int c = static_cast<int>(std::floor((x - proj.origin.x + 0.5 * proj.resolution) /
                                            proj.resolution));
        return std::clamp(c, 0, proj.hw - 1);
    };
    out.u = to_cell(p.x);
    out.v = to_cell(p.y);
    const double step = kTwoPi / k_bins;
    // nearest bin, exact halfway ties resolved toward the lower index
    int k = static_cast<int>(std::ceil(p.theta / step - 0.5));
    out.k = ((k % k_bins) + k_bins) % k_bins;
    return true;
}

Pose2 grid_to_world(const GridPose& gp, const OrthoProjection& proj, int k_bins) {
    return Pose2(proj.origin.x + gp.u * proj.resolution, proj.origin.y + gp.v * proj.resolution,
                 gp.k * kTwoPi / k_bins);
}

SceneSpec rotate_scene_quarter(const SceneSpec& scene, int quarter) {
    quarter = ((quarter % 4) + 4) % 4;
    auto rot_pt = [&](Vec2 p) {
        for (int i = 0; i < quarter; ++i) p = Vec2{-p.y, p.x};
        return p;
    };
    const double da = quarter * (kTwoPi / 4.0);
    SceneSpec out = scene;
    out.table.center = rot_pt(scene.table.center);
    out.table.theta = normalize_angle(scene.table.theta + da);
    for (size_t i = 0; i < scene.obstacles.size(); ++i) {
        out.obstacles[i].rect.center = rot_pt(scene.obstacles[i].rect.center);
        out.obstacles[i].rect.theta = normalize_angle(scene.obstacles[i].rect.theta + da);
    }
    out.object_pos = rot_pt(scene.object_pos);
    out.object_yaw = normalize_angle(scene.object_yaw + da);
    out.robot_start = Pose2(rot_pt(scene.robot_start.pos()).x, rot_pt(scene.robot_start.pos()).y,
                            scene.robot_start.theta + da);
    return out;
}

template <typename T>
TensorT<T> rot90_ccw(const TensorT<T>& t, int quarters) {
    quarters = ((quarters % 4) + 4) % 4;
    assert(t.ndim() >= 2);
    const int w = t.dim(t.ndim() - 1);
    const int h = t.dim(t.ndim() - 2);
    assert(h == w);
    const int64_t planes = t.numel() / (static_cast<int64_t>(h) * w);
    TensorT<T> cur = t;
    for (int q = 0; q < quarters; ++q) {
        TensorT<T> nxt(cur.shape);
        for (int64_t p = 0; p < planes; ++p) {
            const T* src = cur.ptr() + p * h * w;
            T* dst = nxt.ptr() + p * h * w;
            // out[v'][u'] = in[w-1-u'][v']
            for (int vp = 0; vp < h; ++vp)
                for (int up = 0; up < w; ++up)
                    dst[static_cast<int64_t>(vp) * w + up] =
                        src[static_cast<int64_t>(w - 1 - up) * w + vp];
        }
        cur = std::move(nxt);
    }
    return cur;
}

template TensorT<float> rot90_ccw<float>(const TensorT<float>&, int);
template TensorT<double> rot90_ccw<double>(const TensorT<double>&, int);

}  // namespace basepose

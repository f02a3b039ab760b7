#include "basepose/navigation.hpp"

#include "basepose/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace basepose {

namespace {
constexpr double kSqrt2 = 1.4142135623730951;

struct QEntry {
    double f;
    double g;
    int idx;
    bool operator>(const QEntry& o) const {
        if (f != o.f) return f > o.f;
        return idx > o.idx;  // deterministic pop order
    }
};

const int kDu[8] = {1, -1, 0, 0, 1, 1, -1, -1};
const int kDv[8] = {0, 0, 1, -1, 1, -1, 1, -1};

}  // namespace

NavCostmap build_costmap(const OrthoProjection& proj, const RobotModel& robot) {
    NavCostmap map;
    map.hw = proj.hw;
    map.resolution = proj.resolution;
    map.inflation_radius = robot.inflation_radius();
    map.blocked.assign(static_cast<size_t>(proj.hw) * proj.hw, 0);

    std::vector<uint8_t> raw(map.blocked.size(), 0);
    const int64_t hw2 = static_cast<int64_t>(proj.hw) * proj.hw;
    const float* table = proj.semantic.ptr() + static_cast<int64_t>(kSemTable) * hw2;
    const float* obst = proj.semantic.ptr() + static_cast<int64_t>(kSemObstacle) * hw2;
    for (int64_t i = 0; i < hw2; ++i) raw[static_cast<size_t>(i)] = table[i] > 0.5f || obst[i] > 0.5f;

    const int r = static_cast<int>(std::floor(map.inflation_radius / map.resolution));
    std::vector<std::pair<int, int>> disc;
    for (int dv = -r; dv <= r; ++dv)
        for (int du = -r; du <= r; ++du)
            if (static_cast<double>(du) * du + static_cast<double>(dv) * dv <=
                (map.inflation_radius / map.resolution) * (map.inflation_radius / map.resolution))
                disc.emplace_back(du, dv);

    // gather form: each output cell scans its disc, so threads never share writes
#pragma omp parallel for schedule(static) if (kernels::parallel_enabled())
    for (int v = 0; v < map.hw; ++v)
        for (int u = 0; u < map.hw; ++u) {
            uint8_t hit = 0;
            for (const auto& [du, dv] : disc) {
                const int uu = u + du, vv = v + dv;
                if (uu < 0 || uu >= map.hw || vv < 0 || vv >= map.hw) continue;
                if (raw[static_cast<size_t>(vv) * map.hw + uu]) {
                    hit = 1;
                    break;
                }
            }
            map.blocked[static_cast<size_t>(v) * map.hw + u] = hit;
        }
    return map;
}

std::optional<Path> astar(const NavCostmap& map, int su, int sv, int gu, int gv) {
    const int hw = map.hw;
    const double res = map.resolution;
    if (map.is_blocked(gu, gv)) return std::nullopt;

    auto heuristic = [&](int u, int v) {
        const int dx = std::abs(u - gu), dy = std::abs(v - gv);
        return res * (std::max(dx, dy) + (kSqrt2 - 1.0) * std::min(dx, dy));
    };

    std::vector<double> g(static_cast<size_t>(hw) * hw, std::numeric_limits<double>::infinity());
    std::vector<int> parent(static_cast<size_t>(hw) * hw, -1);
    std::priority_queue<QEntry, std::vector<QEntry>, std::greater<QEntry>> open;
    const int sidx = sv * hw + su;
    g[static_cast<size_t>(sidx)] = 0.0;
    open.push({heuristic(su, sv), 0.0, sidx});

    while (!open.empty()) {
        const QEntry e = open.top();
        open.pop();
        const int idx = e.idx;
        if (e.g > g[static_cast<size_t>(idx)]) continue;
        const int u = idx % hw, v = idx / hw;
        if (u == gu && v == gv) {
            Path p;
            p.length = g[static_cast<size_t>(idx)];
            for (int cur = idx; cur != -1; cur = parent[static_cast<size_t>(cur)])
                p.cells.push_back({cur % hw, cur / hw, 0});
            std::reverse(p.cells.begin(), p.cells.end());
            return p;
        }
        for (int d = 0; d < 8; ++d) {
            const int nu = u + kDu[d], nv = v + kDv[d];
            if (nu < 0 || nu >= hw || nv < 0 || nv >= hw) continue;
            if (map.is_blocked(nu, nv)) continue;
            const double ng = e.g + (d < 4 ? res : res * kSqrt2);
            const int nidx = nv * hw + nu;
            if (ng < g[static_cast<size_t>(nidx)]) {
                g[static_cast<size_t>(nidx)] = ng;
                parent[static_cast<size_t>(nidx)] = idx;
                open.push({ng + heuristic(nu, nv), ng, nidx});
            }
        }
    }
    return std::nullopt;
}

std::vector<double> dijkstra_all(const NavCostmap& map, int su, int sv) {
    const int hw = map.hw;
    const double res = map.resolution;
    std::vector<double> g(static_cast<size_t>(hw) * hw, std::numeric_limits<double>::infinity());
    std::priority_queue<QEntry, std::vector<QEntry>, std::greater<QEntry>> open;
    const int sidx = sv * hw + su;
    if (map.is_blocked(su, sv)) return g;
    g[static_cast<size_t>(sidx)] = 0.0;
    open.push({0.0, 0.0, sidx});
    while (!open.empty()) {
        const QEntry e = open.top();
        open.pop();
        if (e.g > g[static_cast<size_t>(e.idx)]) continue;
        const int u = e.idx % hw, v = e.idx / hw;
        for (int d = 0; d < 8; ++d) {
            const int nu = u + kDu[d], nv = v + kDv[d];
            if (nu < 0 || nu >= hw || nv < 0 || nv >= hw) continue;
            if (map.is_blocked(nu, nv)) continue;
            const double ng = e.g + (d < 4 ? res : res * kSqrt2);
            const int nidx = nv * hw + nu;
            if (ng < g[static_cast<size_t>(nidx)]) {
                g[static_cast<size_t>(nidx)] = ng;
                open.push({ng, ng, nidx});
            }
        }
    }
    return g;
}

bool snap_free(const NavCostmap& map, int u, int v, int radius, int& ou, int& ov) {
    double best = std::numeric_limits<double>::infinity();
    bool found = false;
    for (int dv = -radius; dv <= radius; ++dv)
        for (int du = -radius; du <= radius; ++du) {
            const int uu = u + du, vv = v + dv;
            if (uu < 0 || uu >= map.hw || vv < 0 || vv >= map.hw) continue;
            if (map.is_blocked(uu, vv)) continue;
            const double d2 = static_cast<double>(du) * du + static_cast<double>(dv) * dv;
            if (d2 < best) {
                best = d2;
                ou = uu;
                ov = vv;
                found = true;
            }
        }
    return found;
}

double nav_cost(const NavCostmap& map, const OrthoProjection& proj, const Pose2& start,
                const GridPose& goal) {
    GridPose sc;
    if (!world_to_grid(start, proj, 1, sc)) return map.sentinel();
    int su = sc.u, sv = sc.v, gu = goal.u, gv = goal.v;
    if (map.is_blocked(su, sv) && !snap_free(map, su, sv, 2, su, sv)) return map.sentinel();
    if (map.is_blocked(gu, gv) && !snap_free(map, gu, gv, 2, gu, gv)) return map.sentinel();
    if (su == gu && sv == gv) return 0.0;
    const auto path = astar(map, su, sv, gu, gv);
    return path ? path->length : map.sentinel();
}

std::vector<double> nav_cost_field(const NavCostmap& map, const OrthoProjection& proj,
                                   const Pose2& start) {
    std::vector<double> out(static_cast<size_t>(map.hw) * map.hw, map.sentinel());
    GridPose sc;
    if (!world_to_grid(start, proj, 1, sc)) return out;
    int su = sc.u, sv = sc.v;
    if (map.is_blocked(su, sv) && !snap_free(map, su, sv, 2, su, sv)) return out;
    const std::vector<double> dist = dijkstra_all(map, su, sv);
    for (size_t i = 0; i < out.size(); ++i) {
        const int u = static_cast<int>(i) % map.hw;
        const int v = static_cast<int>(i) / map.hw;
        double d = dist[i];
        if (!std::isfinite(d)) {
            // blocked goal cells snap within 2 cells, mirroring nav_cost()
            int uu, vv;
            if (map.is_blocked(u, v) && snap_free(map, u, v, 2, uu, vv)) d = dist[static_cast<size_t>(vv) * map.hw + uu];
        }
        out[i] = std::isfinite(d) ? d : map.sentinel();
    }
    return out;
}

}  // namespace basepose

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "basepose/rng.hpp"
#include "oracles.hpp"

using namespace basepose;

namespace {

// hand-built costmap with free/blocked cells
NavCostmap make_map(int hw, double res, const std::vector<std::pair<int, int>>& blocked) {
    NavCostmap m;
    m.hw = hw;
    m.resolution = res;
    m.blocked.assign(static_cast<size_t>(hw) * hw, 0);
    for (auto [u, v] : blocked) m.blocked[static_cast<size_t>(v) * hw + u] = 1;
    return m;
}

OrthoProjection proj_for(int hw, double res) {
    OrthoProjection p;
    p.hw = hw;
    p.resolution = res;
    p.origin = {-hw * res / 2 + res / 2, -hw * res / 2 + res / 2};
    p.semantic = TensorF({kSemChannels, hw, hw});
    p.depth = TensorF({hw, hw});
    return p;
}

}  // namespace

TEST_CASE("costmap construction and inflation") {
    RobotModel robot;
    SUBCASE("empty projection blocks nothing") {
        SceneSpec s;
        s.world_half_extent = 1.6;
        s.resolution = 0.05;
        s.table = {{0.009, 0.013}, 0.0, 0.0, 0.0};
        s.object_size = 0.0;
        s.object_pos = s.table.center;
        s.robot_draw_len = s.robot_draw_wid = 0.0;
        s.robot_start = Pose2(1.0, 1.0, 0.0);
        const auto map = build_costmap(rasterize(s, 64), robot);
        for (uint8_t b : map.blocked) CHECK(b == 0);
    }
    SUBCASE("single blocked pixel inflates to a disc of radius 5 cells") {
        OrthoProjection p = proj_for(32, 0.05);
        for (int v = 0; v < 32; ++v)
            for (int u = 0; u < 32; ++u)
                p.semantic[(static_cast<int64_t>(kSemFree) * 32 + v) * 32 + u] = 1.0f;
        p.semantic[(static_cast<int64_t>(kSemFree) * 32 + 16) * 32 + 16] = 0.0f;
        p.semantic[(static_cast<int64_t>(kSemObstacle) * 32 + 16) * 32 + 16] = 1.0f;
        const auto map = build_costmap(p, robot);  // inradius 0.25 m -> 5 cells
        for (int v = 0; v < 32; ++v)
            for (int u = 0; u < 32; ++u) {
                const int du = u - 16, dv = v - 16;
                const bool within = du * du + dv * dv <= 25;
                CHECK(map.is_blocked(u, v) == within);
            }
    }
    SUBCASE("zero inflation leaves raw occupancy") {
        RobotModel point_robot;
        point_robot.footprint_len = point_robot.footprint_wid = 0.0;
        OrthoProjection p = proj_for(16, 0.05);
        p.semantic[(static_cast<int64_t>(kSemTable) * 16 + 4) * 16 + 9] = 1.0f;
        const auto map = build_costmap(p, point_robot);
        for (int v = 0; v < 16; ++v)
            for (int u = 0; u < 16; ++u)
                CHECK(map.is_blocked(u, v) == (u == 9 && v == 4));
    }
}

TEST_CASE("astar basic lengths") {
    const auto empty = make_map(10, 1.0, {});
    const auto straight = astar(empty, 0, 0, 0, 9);
    REQUIRE(straight.has_value());
    CHECK(straight->length == doctest::Approx(9.0));
    const auto diag = astar(empty, 0, 0, 9, 9);
    REQUIRE(diag.has_value());
    CHECK(diag->length == doctest::Approx(9.0 * std::numbers::sqrt2));
    // path cells are 8-adjacent and free
    for (size_t i = 1; i < diag->cells.size(); ++i) {
        CHECK(std::abs(diag->cells[i].u - diag->cells[i - 1].u) <= 1);
        CHECK(std::abs(diag->cells[i].v - diag->cells[i - 1].v) <= 1);
    }
}

TEST_CASE("astar equals scan-Dijkstra on 200 random 32x32 maps") {
    Rng rng(404);
    int solvable = 0, unsolvable = 0;
    for (int trial = 0; trial < 200; ++trial) {
        NavCostmap map;
        map.hw = 32;
        map.resolution = 0.075;
        map.blocked.assign(32 * 32, 0);
        const double density = trial % 2 == 0 ? 0.3 : 0.5;
        for (auto& b : map.blocked) b = rng.uniform() < density ? 1 : 0;
        int su, sv, gu, gv;
        do {
            su = rng.uniform_int(0, 31);
            sv = rng.uniform_int(0, 31);
        } while (map.is_blocked(su, sv));
        do {
            gu = rng.uniform_int(0, 31);
            gv = rng.uniform_int(0, 31);
        } while (map.is_blocked(gu, gv));

        const auto ref = oracles::dijkstra_scan(map, su, sv);
        const double expect = ref[static_cast<size_t>(gv) * 32 + gu];
        const auto path = astar(map, su, sv, gu, gv);
        if (std::isfinite(expect)) {
            REQUIRE(path.has_value());
            CHECK(path->length == doctest::Approx(expect).epsilon(1e-9));
            ++solvable;
        } else {
            CHECK_FALSE(path.has_value());
            ++unsolvable;
        }
        // the batch Dijkstra agrees everywhere
        const auto field = dijkstra_all(map, su, sv);
        for (size_t i = 0; i < field.size(); ++i) {
            if (std::isfinite(ref[i]))
                CHECK(field[i] == doctest::Approx(ref[i]).epsilon(1e-9));
            else
                CHECK_FALSE(std::isfinite(field[i]));
        }
    }
    CHECK(solvable > 50);
    CHECK(unsolvable >= 5);
}

TEST_CASE("nav_cost rules: zero self-cost, corridor arithmetic, sentinel") {
    const auto proj = proj_for(64, 0.075);
    auto map = make_map(64, 0.075, {});
    CHECK(map.sentinel() == doctest::Approx(9.6));  // (H + W) * resolution

    // goal equals start
    const Pose2 start = grid_to_world({10, 10, 0}, proj, 1);
    CHECK(nav_cost(map, proj, start, {10, 10, 0}) == 0.0);

    // straight free corridor of 20 cells
    CHECK(nav_cost(map, proj, start, {30, 10, 0}) == doctest::Approx(1.5));

    // enclosed goal -> sentinel
    std::vector<std::pair<int, int>> wall;
    for (int d = -2; d <= 2; ++d) {
        wall.push_back({40 + d, 38});
        wall.push_back({40 + d, 42});
        wall.push_back({38, 40 + d});
        wall.push_back({42, 40 + d});
    }
    auto walled = make_map(64, 0.075, wall);
    CHECK(nav_cost(walled, proj, start, {40, 40, 0}) == doctest::Approx(walled.sentinel()));

    // blocked goal snaps to the nearest free cell within 2 cells
    auto spot = make_map(64, 0.075, {{20, 20}});
    const double snapped = nav_cost(spot, proj, start, {20, 20, 0});
    CHECK(snapped < spot.sentinel());
}

TEST_CASE("nav_cost_field matches per-goal nav_cost") {
    SceneConfig cfg;
    RobotModel robot;
    const SceneSpec s = sample_scene(17, cfg);
    const OrthoProjection proj = rasterize(s, 64);
    const auto map = build_costmap(proj, robot);
    const auto field = nav_cost_field(map, proj, s.robot_start);
    Rng rng(18);
    for (int t = 0; t < 100; ++t) {
        const GridPose g{rng.uniform_int(0, 63), rng.uniform_int(0, 63), 0};
        CHECK(field[static_cast<size_t>(g.v) * 64 + g.u] ==
              doctest::Approx(nav_cost(map, proj, s.robot_start, g)).epsilon(1e-9));
    }
}

TEST_CASE("triangle inequality and sentinel dominance on free maps") {
    const auto proj = proj_for(32, 0.075);
    const auto map = make_map(32, 0.075, {});
    Rng rng(19);
    const double slack = 2 * 0.075 * std::numbers::sqrt2;
    for (int t = 0; t < 100; ++t) {
        const GridPose a{rng.uniform_int(0, 31), rng.uniform_int(0, 31), 0};
        const GridPose b{rng.uniform_int(0, 31), rng.uniform_int(0, 31), 0};
        const GridPose c{rng.uniform_int(0, 31), rng.uniform_int(0, 31), 0};
        const Pose2 pa = grid_to_world(a, proj, 1);
        const Pose2 pb = grid_to_world(b, proj, 1);
        const double ac = nav_cost(map, proj, pa, c);
        const double ab = nav_cost(map, proj, pa, b);
        const double bc = nav_cost(map, proj, pb, c);
        CHECK(ac <= ab + bc + slack);
        CHECK(ac < map.sentinel());  // sentinel strictly dominates
    }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "basepose/persist.hpp"
#include "oracles.hpp"

using namespace basepose;

namespace {

SceneSpec bare_scene() {
    SceneSpec s;
    s.world_half_extent = 2.4;
    s.resolution = 0.075;
    s.table = {{0.0, 0.0}, 0.8, 0.4, 0.0};
    s.object_pos = {0.0, 0.0};
    s.robot_start = Pose2(2.0, 2.0, 0.0);
    return s;
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("collision_free basics") {
    const SceneSpec s = bare_scene();
    RobotModel robot;
    // footprint poking past the world boundary
    CHECK_FALSE(collision_free(s, robot, Pose2(2.35, 2.35, 0.3)));
    // 2 m clear of everything
    CHECK(collision_free(s, robot, Pose2(0.0, 2.0, 1.0)));
}

TEST_CASE("ik_feasible basics") {
    SceneSpec s = bare_scene();
    RobotModel robot;
    // object exactly at the arm mount: below r_min
    REQUIRE(robot.r_min() > 0.0);
    Pose2 base(-robot.arm_mount_offset, 0.0, 0.0);  // mount lands at the origin
    s.object_pos = {0.0, 0.0};
    CHECK_FALSE(ik_feasible(s, robot, base));

    // straight ahead at mid-annulus in an empty scene
    const double mid = (robot.r_min() + robot.r_max()) / 2.0;
    s.object_pos = {base.x + robot.arm_mount_offset + mid, 0.0};
    CHECK(ik_feasible(s, robot, base));
}

TEST_CASE("pruned joint-grid oracle equals the naive sweep") {
    SceneConfig cfg;
    RobotModel robot;
    Rng rng(31);
    int checked = 0;
    for (int i = 0; checked < 60 && i < 200; ++i) {
        const SceneSpec s = sample_scene(4000 + static_cast<uint64_t>(i), cfg);
        const Pose2 base(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0),
                         rng.uniform(0.0, kTwoPi));
        const bool pruned = oracles::ik_feasible_joint_grid(s, robot, base, 180);
        const bool naive = oracles::ik_feasible_joint_grid_naive(s, robot, base, 180);
        CHECK(pruned == naive);
        ++checked;
    }
}

TEST_CASE("analytic IK agrees with the 720x720 joint-grid oracle off-boundary") {
    SceneConfig cfg;
    RobotModel robot;
    Rng rng(32);
    int agreements = 0, skipped = 0;
    for (int i = 0; agreements < 500; ++i) {
        REQUIRE(i < 5000);
        const SceneSpec s = sample_scene(5000 + static_cast<uint64_t>(i % 400), cfg);
        const Pose2 base(rng.uniform(-2.1, 2.1), rng.uniform(-2.1, 2.1),
                         rng.uniform(0.0, kTwoPi));
        const bool stable = oracles::verdict_stable_for(
            base, 0.02, [&](const Pose2& p) { return ik_feasible(s, robot, p); });
        if (!stable) {
            ++skipped;
            continue;
        }
        const bool analytic = ik_feasible(s, robot, base);
        const bool grid = oracles::ik_feasible_joint_grid(s, robot, base, 720);
        CHECK(analytic == grid);
        ++agreements;
    }
    MESSAGE("boundary-band pairs skipped: " << skipped);
}

TEST_CASE("object ringed by full-height obstacles yields an all-zero IRM") {
    SceneSpec s = bare_scene();
    // walls hug the table so no base pose within arm reach stays collision-free
    s.obstacles = {
        {{{1.1, 0.0}, 0.3, 1.0, 0.0}, true, 1.5},
        {{{-1.1, 0.0}, 0.3, 1.0, 0.0}, true, 1.5},
        {{{0.0, 0.7}, 1.4, 0.3, 0.0}, true, 1.5},
        {{{0.0, -0.7}, 1.4, 0.3, 0.0}, true, 1.5},
    };
    RobotModel robot;
    const OrthoProjection proj = rasterize(s, 64);
    const IRMLabel irm = compute_irm(s, robot, 8, proj);
    CHECK(irm.positive_count() == 0);
}

TEST_CASE("IRM transforms as (rot90, +K/4 channel shift) under scene rotation") {
    SceneConfig cfg;
    RobotModel robot;
    for (uint64_t seed : {11u, 23u}) {
        const SceneSpec s = sample_scene(seed, cfg);
        const OrthoProjection proj = rasterize(s, 64);
        const IRMLabel base = compute_irm(s, robot, 8, proj);

        const SceneSpec rot = rotate_scene_quarter(s, 1);
        const OrthoProjection proj_rot = rasterize(rot, 64);
        const IRMLabel rotated = compute_irm(rot, robot, 8, proj_rot);

        // pose (u, v, k) in the original maps to (rot90(u, v), k + K/4)
        int mismatch = 0;
        for (int k = 0; k < 8; ++k)
            for (int v = 0; v < 64; ++v)
                for (int u = 0; u < 64; ++u) {
                    int ru, rv;
                    rot90_cell(u, v, 64, 1, ru, rv);
                    if (base.at(k, v, u) != rotated.at((k + 2) % 8, rv, ru)) ++mismatch;
                }
        CHECK(mismatch == 0);
    }
}

TEST_CASE("adding an obstacle never adds a positive IRM cell") {
    SceneConfig cfg;
    RobotModel robot;
    const SceneSpec s = sample_scene(61, cfg);
    const OrthoProjection proj = rasterize(s, 64);
    const IRMLabel before = compute_irm(s, robot, 8, proj);

    SceneSpec more = s;
    more.obstacles.push_back({{{1.5, 1.2}, 0.25, 0.25, 0.4}, true, 1.5});
    const IRMLabel after = compute_irm(more, robot, 8, rasterize(more, 64));

    for (size_t i = 0; i < before.cells.size(); ++i)
        if (after.cells[i]) CHECK(before.cells[i]);
}

TEST_CASE("compute_irm equals the conjunction of its two predicates (spot check)") {
    SceneConfig cfg;
    RobotModel robot;
    const SceneSpec s = sample_scene(62, cfg);
    const OrthoProjection proj = rasterize(s, 64);
    const IRMLabel irm = compute_irm(s, robot, 8, proj);
    Rng rng(63);
    for (int t = 0; t < 500; ++t) {
        const GridPose g{rng.uniform_int(0, 63), rng.uniform_int(0, 63), rng.uniform_int(0, 7)};
        const Pose2 pose = grid_to_world(g, proj, 8);
        const bool expect = collision_free(s, robot, pose) && ik_feasible(s, robot, pose);
        CHECK(static_cast<bool>(irm.at(g.k, g.v, g.u)) == expect);
    }
}

TEST_CASE("coarse stride dilates verdicts back to the pixel grid") {
    SceneConfig cfg;
    RobotModel robot;
    const SceneSpec s = sample_scene(64, cfg);
    const OrthoProjection proj = rasterize(s, 64);
    const IRMLabel coarse = compute_irm(s, robot, 8, proj, 4);
    for (int k = 0; k < 8; ++k)
        for (int v = 0; v < 64; ++v)
            for (int u = 0; u < 64; ++u)
                CHECK(coarse.at(k, v, u) == coarse.at(k, (v / 4) * 4, (u / 4) * 4));
}

TEST_CASE("sample_dataset: non-empty labels, bit-identical regeneration, positive band") {
    SceneConfig cfg;
    RobotModel robot;
    const auto a = sample_dataset(10, 99, cfg, robot, 8, 64);
    REQUIRE(a.size() == 10);
    for (const auto& s : a) CHECK(s.label.positive_count() > 0);

    const auto b = sample_dataset(10, 99, cfg, robot, 8, 64);
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "basepose_irmd_test";
    fs::create_directories(dir);
    save_irm_dataset((dir / "a.irmd").string(), a);
    save_irm_dataset((dir / "b.irmd").string(), b);
    CHECK(file_bytes((dir / "a.irmd").string()) == file_bytes((dir / "b.irmd").string()));

    // regression band for the mean positive fraction, pinned from the generator
    const auto big = sample_dataset(1000, 123, cfg, robot, 8, 64);
    double frac = 0.0;
    for (const auto& s : big)
        frac += static_cast<double>(s.label.positive_count()) /
                static_cast<double>(s.label.cells.size());
    frac /= static_cast<double>(big.size());
    MESSAGE("mean positive fraction: " << frac);
    CHECK(frac > 0.001);
    CHECK(frac < 0.20);
}

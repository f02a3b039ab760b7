#include "basepose/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace basepose {

std::string method_name(Method m) {
    switch (m) {
        case Method::kFbp: return "fbp";
        case Method::kPbs: return "pbs";
        case Method::kNbs: return "nbs";
        case Method::kLearned: return "learned";
    }
    return "?";
}

std::optional<Method> method_from_name(const std::string& s) {
    if (s == "fbp") return Method::kFbp;
    if (s == "pbs") return Method::kPbs;
    if (s == "nbs") return Method::kNbs;
    if (s == "learned") return Method::kLearned;
    return std::nullopt;
}

namespace {

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

struct Stats {
    std::vector<double> xs;
    void add(double x) { xs.push_back(x); }
    double mean() const {
        if (xs.empty()) return 0.0;
        double s = 0.0;
        for (double x : xs) s += x;
        return s / xs.size();
    }
    double stddev() const {
        if (xs.size() < 2) return 0.0;
        const double m = mean();
        double s = 0.0;
        for (double x : xs) s += (x - m) * (x - m);
        return std::sqrt(s / (xs.size() - 1));
    }
};

}  // namespace

EvalReport evaluate(const std::vector<Method>& methods, int n_scenes, uint64_t seed,
                    EvalContext& ctx) {
    for (Method m : methods)
        if (m == Method::kLearned && (!ctx.stage1 || !ctx.stage2))
            throw std::runtime_error("evaluate: learned method requires stage-1/2 weights");

    EvalReport report;
    report.n_scenes = n_scenes;
    report.seed = seed;

    std::map<std::string, std::pair<Stats, Stats>> agg;  // time, path
    std::map<std::string, int> succ_min, succ_feas, abst, fail, count;

    for (int i = 0; i < n_scenes; ++i) {
        // slot-retry scheme: included scenes are those with a non-empty IRM
        SceneSpec scene;
        OrthoProjection proj;
        IRMLabel irm;
        bool ok = false;
        for (int t = 0; t < 64 && !ok; ++t) {
            scene = sample_scene(mix_seed(seed, (static_cast<uint64_t>(i) << 20) | t), ctx.scene);
            proj = rasterize(scene, ctx.h_pixels);
            irm = compute_irm(scene, ctx.robot, ctx.k_bins, proj);
            ok = irm.positive_count() > 0;
        }
        if (!ok) throw std::runtime_error("evaluate: could not sample a scene with a valid pose");

        const NavCostmap map = build_costmap(proj, ctx.robot);
        const std::vector<double> field = nav_cost_field(map, proj, scene.robot_start);
        double min_nav = map.sentinel();
        for (int k = 0; k < irm.k; ++k)
            for (int v = 0; v < irm.hw; ++v)
                for (int u = 0; u < irm.hw; ++u)
                    if (irm.at(k, v, u))
                        min_nav = std::min(min_nav, field[static_cast<size_t>(v) * irm.hw + u]);
        const double tol = proj.resolution * std::numbers::sqrt2 * 0.5;

        for (Method m : methods) {
            SceneRow row;
            row.scene_id = i;
            row.method = m;
            std::optional<GridPose> chosen;
            std::optional<Pose2> chosen_pose;

            const double t0 = now_s();
            switch (m) {
                case Method::kFbp: {
                    const FixedPoseSet set = make_fixed_pose_set(scene, ctx.fbp_standoff);
                    const FbpResult r = fbp_select(scene, ctx.robot, map, proj, set);
                    row.time_s = now_s() - t0;
                    row.path_m = r.path_length;
                    if (r.pose) {
                        chosen_pose = r.pose;
                        GridPose g;
                        world_to_grid(*r.pose, proj, ctx.k_bins, g);
                        chosen = g;
                    }
                    break;
                }
                case Method::kPbs: {
                    // timing includes the IRM the method depends on
                    const IRMLabel own = compute_irm(scene, ctx.robot, ctx.k_bins, proj);
                    const auto r = pbs_select(scene, proj, own);
                    row.time_s = now_s() - t0;
                    if (r) {
                        chosen = *r;
                        row.path_m = field[static_cast<size_t>(r->v) * irm.hw + r->u];
                    }
                    break;
                }
                case Method::kNbs: {
                    const IRMLabel own = compute_irm(scene, ctx.robot, ctx.k_bins, proj);
                    const auto r = nbs_select(scene, ctx.robot, map, proj, own);
                    row.time_s = now_s() - t0;
                    if (r) {
                        chosen = r->pose;
                        row.path_m = r->nav;
                    }
                    break;
                }
                case Method::kLearned: {
                    GridPose rc;
                    world_to_grid(scene.robot_start, proj, ctx.k_bins, rc);
                    const TensorF density =
                        irm_forward(*ctx.stage1, ctx.stage1_cfg, proj, rc.u, rc.v);
                    const auto cands = extract_candidates(density, ctx.tau, ctx.max_candidates);
                    if (!cands.empty()) {
                        const ObpInputs in =
                            build_obp_inputs(cands, proj, scene.robot_start, ctx.k_bins);
                        const Decision dec = decode_select(*ctx.stage2, ctx.obp_cfg, in,
                                                           DecodeMode::kGreedy, seed);
                        row.time_s = now_s() - t0;  // network passes only
                        chosen = cands[static_cast<size_t>(dec.index)].pose;
                        row.path_m =
                            field[static_cast<size_t>(chosen->v) * irm.hw + chosen->u];
                    } else {
                        row.time_s = now_s() - t0;
                    }
                    break;
                }
            }

            if (!chosen && !chosen_pose) {
                row.abstained = true;
            } else {
                const Pose2 pose =
                    chosen_pose ? *chosen_pose : grid_to_world(*chosen, proj, ctx.k_bins);
                const bool feasible =
                    collision_free(scene, ctx.robot, pose) && ik_feasible(scene, ctx.robot, pose);
                double nav = row.path_m;
                if (m == Method::kFbp && chosen)
                    nav = field[static_cast<size_t>(chosen->v) * irm.hw + chosen->u];
                row.success_feasible = feasible;
                row.success_min_cost = feasible && nav <= min_nav + tol;
            }
            report.rows.push_back(row);

            const std::string name = method_name(m);
            ++count[name];
            if (row.abstained)
                ++abst[name];
            else {
                agg[name].first.add(row.time_s);
                agg[name].second.add(row.path_m);
            }
            // success + failed + abstained partitions the scene count
            if (row.success_min_cost)
                ++succ_min[name];
            else if (!row.abstained)
                ++fail[name];
            if (row.success_feasible) ++succ_feas[name];
        }
    }

    for (auto& [name, st] : agg) {
        MethodStats ms;
        ms.time_mean = st.first.mean();
        ms.time_std = st.first.stddev();
        ms.path_mean = st.second.mean();
        ms.path_std = st.second.stddev();
        ms.n = count[name];
        ms.abstained = abst[name];
        ms.failed = fail[name];
        ms.success_min_cost = static_cast<double>(succ_min[name]) / count[name];
        ms.success_feasible = static_cast<double>(succ_feas[name]) / count[name];
        report.methods[name] = ms;
    }
    return report;
}

AblationReport ablation_report(const std::vector<AblationRun>& runs) {
    if (runs.size() < 2) throw std::runtime_error("ablation_report: need at least two runs");
    for (const auto& r : runs)
        if (r.budget != runs[0].budget)
            throw std::runtime_error("ablation_report: mismatched budgets");

    AblationReport rep;
    for (const auto& r : runs) {
        auto it = rep.arms.find(r.arm);
        if (it == rep.arms.end()) {
            rep.arm_order.push_back(r.arm);
            rep.arms[r.arm] = {r.final_metric, r.final_metric, r.final_metric, 1};
        } else {
            auto& a = it->second;
            a.mean += r.final_metric;
            a.min = std::min(a.min, r.final_metric);
            a.max = std::max(a.max, r.final_metric);
            ++a.runs;
        }
    }
    for (auto& [k, a] : rep.arms) a.mean /= a.runs;
    if (rep.arm_order.size() >= 2)
        rep.gap = rep.arms[rep.arm_order[0]].mean - rep.arms[rep.arm_order[1]].mean;
    return rep;
}

}  // namespace basepose

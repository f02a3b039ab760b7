#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "basepose/baselines.hpp"
#include "basepose/obp.hpp"

namespace basepose {

enum class Method { kFbp, kPbs, kNbs, kLearned };
std::string method_name(Method m);
std::optional<Method> method_from_name(const std::string& s);

struct SceneRow {
    int scene_id = 0;
    Method method = Method::kNbs;
    double time_s = 0.0;       // selection call only
    double path_m = 0.0;       // A* leg(s) to the chosen pose
    bool success_min_cost = false;  // feasible and within tol of the IRM min nav
    bool success_feasible = false;  // reached a feasible pose at all
    bool abstained = false;
};

struct MethodStats {
    double time_mean = 0.0, time_std = 0.0;
    double path_mean = 0.0, path_std = 0.0;
    double success_min_cost = 0.0;
    double success_feasible = 0.0;
    int abstained = 0;
    int failed = 0;  // produced a pose that is infeasible or misses the min-cost bar
    int n = 0;
};

struct EvalReport {
    int n_scenes = 0;
    uint64_t seed = 0;
    std::map<std::string, MethodStats> methods;
    std::vector<SceneRow> rows;
};

struct EvalContext {
    SceneConfig scene;
    RobotModel robot;
    int k_bins = 8;
    int h_pixels = 64;
    float tau = 0.5f;
    int max_candidates = 64;
    // learned pipeline weights; required iff Method::kLearned is evaluated
    TransporterConfig stage1_cfg;
    ParamStore* stage1 = nullptr;
    ParamStore* stage2 = nullptr;
    ObpConfig obp_cfg;
    double fbp_standoff = 0.65;
};

// Scenes with empty ground-truth IRMs are excluded and resampled. Success
// (min-cost sense) = chosen pose feasible and nav within half a diagonal cell
// of the IRM minimum. PBS/NBS timing includes their IRM computation; the
// learned method times only its forward passes.
EvalReport evaluate(const std::vector<Method>& methods, int n_scenes, uint64_t seed,
                    EvalContext& ctx);

// ---- ablation aggregation ----
struct AblationRun {
    std::string arm;     // e.g. "equivariant" / "unet" / "greedy" / "no_baseline"
    uint64_t seed = 0;
    int budget = 0;      // epochs or episodes
    double final_metric = 0.0;  // IoU or rolling success
    std::vector<double> curve;
};

struct AblationArm {
    double mean = 0.0, min = 0.0, max = 0.0;
    int runs = 0;
};

struct AblationReport {
    std::map<std::string, AblationArm> arms;
    double gap = 0.0;  // first arm mean - second arm mean (insertion order)
    std::vector<std::string> arm_order;
};

// Requires >= 2 runs and matched budgets across all runs; throws otherwise.
AblationReport ablation_report(const std::vector<AblationRun>& runs);

}  // namespace basepose

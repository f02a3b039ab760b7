#pragma once

#include <optional>
#include <string>
#include <vector>

#include "basepose/navigation.hpp"
#include "basepose/nn.hpp"
#include "basepose/transporter.hpp"

namespace basepose {

// Stage-2 policy: encodes the candidate base poses as a fully-connected
// heterogeneous graph (candidates, the robot node, a global depth embedding)
// with three attention layers, decodes per-node selection likelihoods, and
// trains with single-step REINFORCE against the greedy min-navigation-cost
// baseline.
struct ObpConfig {
    int embed = 64;
    int cand_feats = 5;   // u/W, v/H, cos, sin, score
    int robot_feats = 4;  // u/W, v/H, cos, sin
    double leaky_slope = 0.2;
    std::vector<int> depth_channels = {8, 16, 32, 64};
};

struct RewardConfig {
    double beta1 = 1.0;   // collision-free indicator
    double beta2 = 1.0;   // IK-feasible indicator
    double beta3 = -1.0;  // navigation cost
    double eps = 1e-6;
    // OFF: A' = log(1 + max(eps, R - b)) as written; ON: the sign-preserving
    // variant sign(R-b) * log(1 + |R-b|).
    bool sign_preserving = false;
};

ParamStore make_obp_params(const ObpConfig& cfg, uint64_t seed);

// Inputs of one decision: candidate features [N, 5], robot features [4],
// depth raster [1, H, W].
struct ObpInputs {
    TensorF cand;
    TensorF robot;
    TensorF depth;
};

ObpInputs build_obp_inputs(const std::vector<Candidate>& cands, const OrthoProjection& proj,
                           const Pose2& robot_start, int k_bins);

// Selection likelihoods y (softmax over candidates).
template <typename T>
typename Tape<T>::Id obp_forward(Tape<T>& tape, ParamBinding<T>& bind, const ObpConfig& cfg,
                                 typename Tape<T>::Id cand, typename Tape<T>::Id robot,
                                 typename Tape<T>::Id depth);

enum class DecodeMode { kSample, kGreedy };

struct Decision {
    std::vector<float> likelihoods;
    int index = 0;
};
// Greedy: argmax with ties to the lowest index. Sample: categorical draw.
Decision decode_select(ParamStore& params, const ObpConfig& cfg, const ObpInputs& in,
                       DecodeMode mode, uint64_t seed);

// beta1 * 1(collision-free) + beta2 * 1(ik) + beta3 * nav, indicators taken at
// the continuous cell-center pose.
double reward(const SceneSpec& scene, const RobotModel& robot, const NavCostmap& map,
              const OrthoProjection& proj, const GridPose& a, int k_bins,
              const RewardConfig& cfg);
// Same reward evaluated against a precomputed nav cost (one Dijkstra per scene).
double reward_with_nav(const SceneSpec& scene, const RobotModel& robot,
                       const OrthoProjection& proj, const GridPose& a, int k_bins, double nav,
                       const RewardConfig& cfg);

// Reward of the min-nav-cost candidate; ties by (k, v, u). Candidates must be
// non-empty.
double greedy_baseline(const SceneSpec& scene, const RobotModel& robot,
                       const OrthoProjection& proj, const std::vector<Candidate>& cands,
                       const std::vector<double>& nav, int k_bins, const RewardConfig& cfg);

double scaled_advantage(double r, double b, const RewardConfig& cfg);

// One REINFORCE step: loss = -A' * log y_k back through decoder, attention
// layers and the depth encoder, then Adam.
void reinforce_update(const ObpInputs& in, int k, double advantage, const ObpConfig& cfg,
                      ParamStore& params, const AdamConfig& adam);

struct TrainObpConfig {
    int episodes = 2000;
    uint64_t seed = 3;
    double lr = 1e-4;
    int max_candidates = 32;
    bool learned_source = false;  // oracle IRM cells unless set
    float tau = 0.5f;
    bool use_greedy_baseline = true;  // false: plain REINFORCE (b = 0)
    RewardConfig reward;
    int rolling_window = 100;
    std::string csv_path;
};

struct TrainObpResult {
    ParamStore params;
    std::vector<double> rolling;  // per decided episode
    int decided = 0;
    int skipped = 0;  // empty candidate sets
    double final_rolling = 0.0;
};

// Scene/robot/grid context for episode generation.
struct EpisodeEnv {
    SceneConfig scene;
    RobotModel robot;
    int k_bins = 8;
    int h_pixels = 64;
};

TrainObpResult train_obp(const EpisodeEnv& env, const TrainObpConfig& cfg,
                         const TransporterConfig* stage1_cfg = nullptr,
                         ParamStore* stage1_params = nullptr);

extern template Tape<float>::Id obp_forward<float>(Tape<float>&, ParamBinding<float>&,
                                                   const ObpConfig&, Tape<float>::Id,
                                                   Tape<float>::Id, Tape<float>::Id);
extern template Tape<double>::Id obp_forward<double>(Tape<double>&, ParamBinding<double>&,
                                                     const ObpConfig&, Tape<double>::Id,
                                                     Tape<double>::Id, Tape<double>::Id);

}  // namespace basepose

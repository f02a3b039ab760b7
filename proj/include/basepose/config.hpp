#pragma once

#include <string>
#include <vector>

#include "basepose/kinematics.hpp"
#include "basepose/obp.hpp"
#include "basepose/scene.hpp"
#include "basepose/transporter.hpp"

namespace basepose {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Every tunable, flat key=value text format ('#' comments). Unknown keys are
// rejected; ranges are validated on load.
struct RunConfig {
    // grid / scene distribution
    int grid_px = 64;
    double resolution = 0.075;
    int k_orient = 8;
    double table_width = 1.6;
    double table_depth = 0.8;
    double table_height = 0.75;
    double table_center_range = 1.0;
    int obstacle_min = 1;
    int obstacle_max = 4;
    double obstacle_side_min = 0.2;
    double obstacle_side_max = 0.8;
    double obstacle_full_height_prob = 0.75;
    double obstacle_full_height = 1.5;
    double obstacle_low_height = 0.3;
    double object_size = 0.075;
    double object_margin = 0.1;
    double robot_radius_min = 1.0;
    double robot_radius_max = 3.0;
    int scene_retry_budget = 1000;

    // robot model
    double robot_len = 0.5;
    double robot_wid = 0.5;
    double arm_mount_offset = 0.15;
    double arm_l1 = 0.45;
    double arm_l2 = 0.40;
    double q1_max_deg = 135.0;
    double q2_max_deg = 150.0;
    double grasp_tol = 0.01;

    // stage 1
    std::vector<int> phi_widths = {8, 16, 32, 64};
    std::vector<int> psi_widths;    // empty: derived from phi widths
    std::vector<int> plain_widths;  // empty: 3x phi widths
    int crop_px = 13;
    int irm_stride_px = 1;
    int train_epochs = 10;
    int train_batch = 8;
    double train_lr = 1e-3;
    double heldout_frac = 0.1;
    double tau = 0.5;

    // stage 2
    int obp_episodes = 2000;
    double obp_lr = 1e-4;
    int obp_max_candidates = 32;
    bool obp_sign_preserving = false;
    bool obp_use_baseline = true;
    std::string obp_source = "oracle";  // oracle | learned
    double reward_beta1 = 1.0;
    double reward_beta2 = 1.0;
    double reward_beta3 = -1.0;
    double advantage_eps = 1e-6;
    int rolling_window = 100;

    // evaluation
    int eval_scenes = 100;
    int eval_max_candidates = 64;
    double fbp_standoff = 0.65;

    uint64_t seed = 0;
    int workers = 0;  // 0 = runtime default

    // derived views
    SceneConfig scene_config() const;
    RobotModel robot_model() const;
    TransporterConfig transporter_config() const;
    PlainUNetConfig plain_unet_config() const;
    RewardConfig reward_config() const;
    void validate() const;
};

// defaults -> optional file -> key=value overrides; BASEPOSE_SEED applies when
// neither the file nor an override sets a seed.
RunConfig load_config(const std::string& path_or_empty,
                      const std::vector<std::string>& overrides);

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

std::string dump_config(const RunConfig& cfg);

}  // namespace basepose

#include "basepose/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace basepose {

SceneConfig RunConfig::scene_config() const {
    SceneConfig s;
    s.world_half_extent = grid_px * resolution / 2.0;
    s.resolution = resolution;
    s.table_width = table_width;
    s.table_depth = table_depth;
    s.table_height = table_height;
    s.table_center_range = table_center_range;
    s.obstacle_min = obstacle_min;
    s.obstacle_max = obstacle_max;
    s.obstacle_side_min = obstacle_side_min;
    s.obstacle_side_max = obstacle_side_max;
    s.obstacle_full_height_prob = obstacle_full_height_prob;
    s.obstacle_full_height = obstacle_full_height;
    s.obstacle_low_height = obstacle_low_height;
    s.object_size = object_size;
    s.object_margin = object_margin;
    s.robot_radius_min = robot_radius_min;
    s.robot_radius_max = robot_radius_max;
    s.robot_len = robot_len;
    s.robot_wid = robot_wid;
    s.retry_budget = scene_retry_budget;
    return s;
}

RobotModel RunConfig::robot_model() const {
    RobotModel r;
    r.footprint_len = robot_len;
    r.footprint_wid = robot_wid;
    r.arm_mount_offset = arm_mount_offset;
    r.l1 = arm_l1;
    r.l2 = arm_l2;
    r.q1_max = q1_max_deg * std::numbers::pi / 180.0;
    r.q2_max = q2_max_deg * std::numbers::pi / 180.0;
    r.grasp_tol = grasp_tol;
    return r;
}

TransporterConfig RunConfig::transporter_config() const {
    TransporterConfig t;
    t.n = k_orient;
    t.phi_widths = phi_widths;
    t.psi_widths = psi_widths;
    t.crop_px = crop_px;
    return t;
}

PlainUNetConfig RunConfig::plain_unet_config() const {
    PlainUNetConfig p;
    if (!plain_widths.empty()) {
        p.widths = plain_widths;
    } else {
        p.widths.clear();
        for (int w : phi_widths) p.widths.push_back(3 * w);
    }
    p.k_out = k_orient;
    return p;
}

RewardConfig RunConfig::reward_config() const {
    RewardConfig r;
    r.beta1 = reward_beta1;
    r.beta2 = reward_beta2;
    r.beta3 = reward_beta3;
    r.eps = advantage_eps;
    r.sign_preserving = obp_sign_preserving;
    return r;
}

void RunConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
    if (grid_px < 16 || grid_px % 8 != 0) fail("grid_px must be >= 16 and divisible by 8");
    if (resolution <= 0) fail("resolution must be positive");
    if (k_orient != 4 && k_orient != 8) fail("k_orient must be 4 or 8");
    if (crop_px < 3 || crop_px % 2 == 0) fail("crop_px must be odd and >= 3");
    if (crop_px > grid_px) fail("crop_px must not exceed grid_px");
    if (phi_widths.size() != 4) fail("phi_widths needs 4 entries");
    if (!psi_widths.empty() && psi_widths.size() != 4) fail("psi_widths needs 4 entries");
    if (!plain_widths.empty() && plain_widths.size() != 4) fail("plain_widths needs 4 entries");
    for (int w : phi_widths)
        if (w < 1) fail("phi_widths entries must be positive");
    if (tau <= 0.0 || tau >= 1.0) fail("tau must lie in (0, 1)");
    if (heldout_frac < 0.0 || heldout_frac > 0.5) fail("heldout_frac must lie in [0, 0.5]");
    if (obstacle_min < 0 || obstacle_max < obstacle_min) fail("bad obstacle count range");
    if (obstacle_side_min <= 0 || obstacle_side_max < obstacle_side_min)
        fail("bad obstacle side range");
    if (arm_l1 <= 0 || arm_l2 <= 0) fail("link lengths must be positive");
    if (grasp_tol <= 0) fail("grasp_tol must be positive");
    if (train_epochs < 1 || train_batch < 1) fail("bad training budget");
    if (train_lr <= 0 || obp_lr <= 0) fail("learning rates must be positive");
    if (obp_episodes < 1) fail("obp_episodes must be >= 1");
    if (obp_max_candidates < 1 || eval_max_candidates < 1) fail("max candidates must be >= 1");
    if (obp_source != "oracle" && obp_source != "learned")
        fail("obp_source must be 'oracle' or 'learned'");
    if (advantage_eps <= 0) fail("advantage_eps must be positive");
    if (rolling_window < 1) fail("rolling_window must be >= 1");
    if (eval_scenes < 1) fail("eval_scenes must be >= 1");
    if (irm_stride_px < 1) fail("irm_stride_px must be >= 1");
    if (robot_radius_max < robot_radius_min) fail("bad robot radius range");
}

namespace {

struct Binder {
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <typename T>
T parse_num(const std::string& v, const std::string& key) {
    std::istringstream ss(v);
    T out;
    ss >> out;
    if (ss.fail() || !ss.eof()) throw ConfigError("config: bad value for " + key + ": " + v);
    return out;
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw ConfigError("config: bad boolean for " + key + ": " + v);
}

std::vector<int> parse_ints(const std::string& v, const std::string& key) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(parse_num<int>(item, key));
    return out;
}

std::string ints_str(const std::vector<int>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(v[i]);
    }
    return s;
}

template <typename T>
void bind_num(std::map<std::string, Binder>& t, const std::string& key, T RunConfig::* member) {
    t[key] = Binder{[key, member](RunConfig& c, const std::string& v) {
                        c.*member = parse_num<T>(v, key);
                    },
                    [member](const RunConfig& c) {
                        std::ostringstream ss;
                        ss << c.*member;
                        return ss.str();
                    }};
}

const std::map<std::string, Binder>& binders() {
    static const std::map<std::string, Binder> table = [] {
        std::map<std::string, Binder> t;
        auto num = [&t](const std::string& key, auto member) { bind_num(t, key, member); };
        auto flag = [&t](const std::string& key, bool RunConfig::* member) {
            t[key] = Binder{[key, member](RunConfig& c, const std::string& v) {
                                c.*member = parse_bool(v, key);
                            },
                            [member](const RunConfig& c) { return (c.*member) ? "true" : "false"; }};
        };
        auto ints = [&t](const std::string& key, std::vector<int> RunConfig::* member) {
            t[key] = Binder{[key, member](RunConfig& c, const std::string& v) {
                                c.*member = parse_ints(v, key);
                            },
                            [member](const RunConfig& c) { return ints_str(c.*member); }};
        };
        auto str = [&t](const std::string& key, std::string RunConfig::* member) {
            t[key] = Binder{
                [member](RunConfig& c, const std::string& v) { c.*member = v; },
                [member](const RunConfig& c) { return c.*member; }};
        };

        num("grid_px", &RunConfig::grid_px);
        num("resolution", &RunConfig::resolution);
        num("k_orient", &RunConfig::k_orient);
        num("table_width", &RunConfig::table_width);
        num("table_depth", &RunConfig::table_depth);
        num("table_height", &RunConfig::table_height);
        num("table_center_range", &RunConfig::table_center_range);
        num("obstacle_min", &RunConfig::obstacle_min);
        num("obstacle_max", &RunConfig::obstacle_max);
        num("obstacle_side_min", &RunConfig::obstacle_side_min);
        num("obstacle_side_max", &RunConfig::obstacle_side_max);
        num("obstacle_full_height_prob", &RunConfig::obstacle_full_height_prob);
        num("obstacle_full_height", &RunConfig::obstacle_full_height);
        num("obstacle_low_height", &RunConfig::obstacle_low_height);
        num("object_size", &RunConfig::object_size);
        num("object_margin", &RunConfig::object_margin);
        num("robot_radius_min", &RunConfig::robot_radius_min);
        num("robot_radius_max", &RunConfig::robot_radius_max);
        num("scene_retry_budget", &RunConfig::scene_retry_budget);
        num("robot_len", &RunConfig::robot_len);
        num("robot_wid", &RunConfig::robot_wid);
        num("arm_mount_offset", &RunConfig::arm_mount_offset);
        num("arm_l1", &RunConfig::arm_l1);
        num("arm_l2", &RunConfig::arm_l2);
        num("q1_max_deg", &RunConfig::q1_max_deg);
        num("q2_max_deg", &RunConfig::q2_max_deg);
        num("grasp_tol", &RunConfig::grasp_tol);
        ints("phi_widths", &RunConfig::phi_widths);
        ints("psi_widths", &RunConfig::psi_widths);
        ints("plain_widths", &RunConfig::plain_widths);
        num("crop_px", &RunConfig::crop_px);
        num("irm_stride_px", &RunConfig::irm_stride_px);
        num("train_epochs", &RunConfig::train_epochs);
        num("train_batch", &RunConfig::train_batch);
        num("train_lr", &RunConfig::train_lr);
        num("heldout_frac", &RunConfig::heldout_frac);
        num("tau", &RunConfig::tau);
        num("obp_episodes", &RunConfig::obp_episodes);
        num("obp_lr", &RunConfig::obp_lr);
        num("obp_max_candidates", &RunConfig::obp_max_candidates);
        flag("obp_sign_preserving", &RunConfig::obp_sign_preserving);
        flag("obp_use_baseline", &RunConfig::obp_use_baseline);
        str("obp_source", &RunConfig::obp_source);
        num("reward_beta1", &RunConfig::reward_beta1);
        num("reward_beta2", &RunConfig::reward_beta2);
        num("reward_beta3", &RunConfig::reward_beta3);
        num("advantage_eps", &RunConfig::advantage_eps);
        num("rolling_window", &RunConfig::rolling_window);
        num("eval_scenes", &RunConfig::eval_scenes);
        num("eval_max_candidates", &RunConfig::eval_max_candidates);
        num("fbp_standoff", &RunConfig::fbp_standoff);
        num("seed", &RunConfig::seed);
        num("workers", &RunConfig::workers);
        return t;
    }();
    return table;
}

}  // namespace

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
    const auto& table = binders();
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError("config: unknown key '" + key + "'");
    it->second.set(cfg, value);
}

RunConfig load_config(const std::string& path_or_empty,
                      const std::vector<std::string>& overrides) {
    RunConfig cfg;
    bool seed_set = false;
    if (!path_or_empty.empty()) {
        std::ifstream in(path_or_empty);
        if (!in) throw ConfigError("config: cannot open " + path_or_empty);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const size_t hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            const size_t eq = line.find('=');
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            if (eq == std::string::npos)
                throw ConfigError("config: " + path_or_empty + ":" + std::to_string(lineno) +
                                  ": expected key = value");
            auto trim = [](std::string s) {
                const auto b = s.find_first_not_of(" \t\r");
                const auto e = s.find_last_not_of(" \t\r");
                return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
            };
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            apply_override(cfg, key, value);
            if (key == "seed") seed_set = true;
        }
    }
    for (const auto& o : overrides) {
        const size_t eq = o.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: override must be key=value, got '" + o + "'");
        apply_override(cfg, o.substr(0, eq), o.substr(eq + 1));
        if (o.substr(0, eq) == "seed") seed_set = true;
    }
    if (!seed_set) {
        if (const char* env = std::getenv("BASEPOSE_SEED"))
            cfg.seed = parse_num<uint64_t>(env, "BASEPOSE_SEED");
    }
    cfg.validate();
    return cfg;
}

std::string dump_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& [key, b] : binders()) out += key + " = " + b.get(cfg) + "\n";
    return out;
}

}  // namespace basepose
